"""Statistical analyses relating latent codes to labeled outputs.

The regressions are hand-rolled Newton/IRLS maximizations with a tiny
ridge term for numerical safety, so log-likelihoods and AICs are exact up
to that regularization.  Code/class dependence additionally gets a
distribution-free check via a permutation test on the G statistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

RIDGE = 1e-6
SEPARATION_COEF = 12.0


@dataclass
class RegressionFit:
    coef: np.ndarray  # [p] binary outcome; [p, C-1] baseline-category multinomial
    se: np.ndarray
    z: np.ndarray
    p_values: np.ndarray
    loglik: float
    n_params: int
    aic: float
    converged: bool
    separation: bool
    n_obs: int
    kind: str  # "logistic" | "multinomial"
    design: dict | None = None  # predictor names, reference level, dropped columns


def _wald(coef: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    se = np.sqrt(np.clip(np.diag(cov), 0, None)).reshape(coef.shape, order="F")
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, coef / se, np.inf * np.sign(coef))
    p = 2 * norm.sf(np.abs(z))
    return se, z, p


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    ridge: float = RIDGE,
    max_iter: int = 100,
    tol: float = 1e-10,
    add_intercept: bool = False,
    drop_constant: bool = False,
) -> RegressionFit:
    """Binary logistic regression by Newton's method.

    By default the caller supplies the design matrix as-is (include a
    constant column for an intercept).  With ``add_intercept`` a leading
    ones column is prepended; with ``drop_constant`` constant predictor
    columns are removed with a warning (the intercept survives).  Wald
    standard errors come from the inverse observed information at the
    optimum.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("binary outcome must be 0/1")
    if y.min() == y.max():
        raise ValueError("outcome is constant; nothing to fit")
    dropped = []
    if drop_constant:
        keep = [j for j in range(X.shape[1]) if np.ptp(X[:, j]) > 0]
        dropped = [j for j in range(X.shape[1]) if j not in keep]
        if dropped:
            import warnings

            warnings.warn(f"dropping constant predictor column(s) {dropped}")
            X = X[:, keep]
    if add_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    n, p = X.shape
    if y.shape[0] != n:
        raise ValueError(f"design has {n} rows but outcome has {y.shape[0]}")
    beta = np.zeros(p)
    converged = False
    for _ in range(max_iter):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1 - mu)
        grad = X.T @ (y - mu) - ridge * beta
        H = X.T @ (X * w[:, None]) + ridge * np.eye(p)
        step = np.linalg.solve(H, grad)
        beta = beta + step
        if np.abs(step).max() < tol:
            converged = True
            break
    mu = 1.0 / (1.0 + np.exp(-(X @ beta)))
    muc = np.clip(mu, 1e-12, 1 - 1e-12)
    loglik = float((y * np.log(muc) + (1 - y) * np.log(1 - muc)).sum())
    w = mu * (1 - mu)
    H = X.T @ (X * w[:, None]) + ridge * np.eye(p)
    cov = np.linalg.inv(H)
    se, z, pv = _wald(beta, cov)
    return RegressionFit(
        coef=beta, se=se, z=z, p_values=pv,
        loglik=loglik, n_params=p, aic=2 * p - 2 * loglik,
        converged=converged,
        separation=(not converged) or bool(np.abs(beta).max() > SEPARATION_COEF),
        n_obs=n, kind="logistic",
        design={"intercept": add_intercept, "dropped_columns": dropped},
    )


def _multinomial_probs(X: np.ndarray, B: np.ndarray) -> np.ndarray:
    """[n, C] class probabilities with class 0 as the zero-logit baseline."""
    eta = np.concatenate([np.zeros((X.shape[0], 1)), X @ B], axis=1)
    eta -= eta.max(axis=1, keepdims=True)
    e = np.exp(eta)
    return e / e.sum(axis=1, keepdims=True)


def fit_multinomial(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int | None = None,
    ridge: float = RIDGE,
    max_iter: int = 200,
    tol: float = 1e-9,
) -> RegressionFit:
    """Baseline-category multinomial logit (class 0 is the baseline).

    One coefficient vector per non-baseline class, so the parameter count
    is p * (C - 1).  Full Newton step on the stacked system.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int).reshape(-1)
    n, p = X.shape
    C = int(n_classes if n_classes is not None else y.max() + 1)
    if y.min() < 0 or y.max() >= C:
        raise ValueError(f"class labels must lie in [0, {C})")
    m = C - 1
    Y = np.zeros((n, m))
    for j in range(m):
        Y[:, j] = y == j + 1
    B = np.zeros((p, m))
    converged = False
    H = np.eye(p * m)
    for _ in range(max_iter):
        P = _multinomial_probs(X, B)[:, 1:]
        grad = (X.T @ (Y - P) - ridge * B).ravel(order="F")
        H = np.empty((p * m, p * m))
        for j in range(m):
            for k in range(m):
                w = P[:, j] * ((j == k) - P[:, k])
                block = X.T @ (X * w[:, None])
                if j == k:
                    block = block + ridge * np.eye(p)
                H[j * p : (j + 1) * p, k * p : (k + 1) * p] = block
        step = np.linalg.solve(H, grad)
        B = B + step.reshape((p, m), order="F")
        if np.abs(step).max() < tol:
            converged = True
            break
    P_full = _multinomial_probs(X, B)
    loglik = float(np.log(np.clip(P_full[np.arange(n), y], 1e-300, None)).sum())
    cov = np.linalg.inv(H)
    se, z, pv = _wald(B, cov)
    k = p * m
    return RegressionFit(
        coef=B, se=se, z=z, p_values=pv,
        loglik=loglik, n_params=k, aic=2 * k - 2 * loglik,
        converged=converged,
        separation=(not converged) or bool(np.abs(B).max() > SEPARATION_COEF),
        n_obs=n, kind="multinomial",
    )


def one_hot_design(levels, order=None) -> tuple[np.ndarray, list]:
    """Indicator design matrix with one column per level present in the data.

    Levels absent from the data get no column, so a saturated code/class
    fit keeps full rank even when some codes were never produced.
    """
    levels = list(levels)
    if order is None:
        order = sorted(set(levels))
    else:
        order = [o for o in order if o in set(levels)]
    index = {name: i for i, name in enumerate(order)}
    X = np.zeros((len(levels), len(order)))
    for row, name in enumerate(levels):
        X[row, index[name]] = 1.0
    return X, order


def encode_labels(labels, order=None) -> tuple[np.ndarray, list]:
    labels = list(labels)
    if order is None:
        order = sorted(set(labels))
    index = {name: i for i, name in enumerate(order)}
    return np.array([index[l] for l in labels], dtype=int), order


def code_class_fits(codes, classes) -> tuple[RegressionFit, RegressionFit, list, list]:
    """Saturated (class ~ code) and intercept-only multinomial fits.

    Levels with no observations are dropped from the design; the
    reference class is the lexicographically first label.  Returns
    (full fit, null fit, code levels used, class levels used) so AICs
    and parameter counts can be compared directly.
    """
    y, class_levels = encode_labels(classes)
    X, code_levels = one_hot_design(codes)
    full = fit_multinomial(X, y, n_classes=len(class_levels))
    null = fit_multinomial(np.ones((len(y), 1)), y, n_classes=len(class_levels))
    design = {"reference_class": class_levels[0], "code_levels": [str(c) for c in code_levels]}
    full.design = {**design, "predictor": "code"}
    null.design = {**design, "predictor": "intercept only"}
    return full, null, code_levels, class_levels


def aic_compare(fit_a: RegressionFit, fit_b: RegressionFit) -> dict:
    """Lower AIC wins; refuses to compare fits over different data sizes."""
    if fit_a.n_obs != fit_b.n_obs:
        raise ValueError(
            f"fits cover different data: {fit_a.n_obs} vs {fit_b.n_obs} rows"
        )
    delta = fit_a.aic - fit_b.aic
    return {
        "aic_a": fit_a.aic,
        "aic_b": fit_b.aic,
        "delta": delta,
        "preferred": "a" if delta < 0 else "b",
    }


def feature_capacity_check(n_bits: int, reserved_bits: int, n_target_words: int) -> dict:
    """Can the non-reserved bits address the target vocabulary?"""
    if reserved_bits > n_bits:
        raise ValueError(f"reserved {reserved_bits} exceeds total bits {n_bits}")
    addressable = 2 ** (n_bits - reserved_bits)
    return {
        "n_bits": n_bits,
        "reserved_bits": reserved_bits,
        "addressable": addressable,
        "n_target_words": n_target_words,
        "feasible": addressable >= n_target_words,
    }


def proportion_logit_ci(k: int, n: int, level: float = 0.95) -> tuple[float, float, float]:
    """(p_hat, lo, hi): Wald interval on the log-odds, mapped back.

    Degenerate counts (0 or n successes) get a half-count continuity
    correction so the interval stays finite.
    """
    if n <= 0:
        raise ValueError("need at least one observation")
    p_hat = k / n
    kk, nn = float(k), float(n)
    if k == 0 or k == n:
        kk, nn = kk + 0.5, nn + 1.0
    logit = np.log(kk / (nn - kk))
    se = np.sqrt(1.0 / kk + 1.0 / (nn - kk))
    zq = norm.ppf(0.5 + level / 2)
    lo, hi = logit - zq * se, logit + zq * se
    expit = lambda t: 1.0 / (1.0 + np.exp(-t))
    return float(p_hat), float(expit(lo)), float(expit(hi))


@dataclass
class GroupedProportions:
    n0: int
    k0: int
    p0: float
    ci0: tuple[float, float]
    n1: int
    k1: int
    p1: float
    ci1: tuple[float, float]
    fit: RegressionFit
    p_value: float  # Wald p of the group coefficient


def grouped_feature_test(outcome, group) -> GroupedProportions:
    """Does a binary acoustic outcome depend on one latent feature's state?

    Fits outcome ~ intercept + group and reports per-group proportions
    with logit-scale Wald intervals plus the group coefficient's p-value.
    """
    y = np.asarray(outcome, dtype=float).reshape(-1)
    g = np.asarray(group, dtype=float).reshape(-1)
    if y.shape != g.shape:
        raise ValueError("outcome and group must have equal length")
    X = np.column_stack([np.ones_like(g), g])
    fit = fit_logistic(X, y)
    m0, m1 = g == 0, g == 1
    n0, n1 = int(m0.sum()), int(m1.sum())
    k0, k1 = int(y[m0].sum()), int(y[m1].sum())
    p0, lo0, hi0 = proportion_logit_ci(k0, n0)
    p1, lo1, hi1 = proportion_logit_ci(k1, n1)
    return GroupedProportions(
        n0=n0, k0=k0, p0=p0, ci0=(lo0, hi0),
        n1=n1, k1=k1, p1=p1, ci1=(lo1, hi1),
        fit=fit, p_value=float(fit.p_values[1]),
    )


def contingency_table(codes, classes) -> tuple[np.ndarray, list, list]:
    code_levels = sorted(set(codes))
    class_levels = sorted(set(classes))
    ci = {c: i for i, c in enumerate(code_levels)}
    ki = {k: i for i, k in enumerate(class_levels)}
    table = np.zeros((len(code_levels), len(class_levels)), dtype=int)
    for c, k in zip(codes, classes):
        table[ci[c], ki[k]] += 1
    return table, code_levels, class_levels


def g_statistic(table: np.ndarray) -> float:
    """Log-likelihood-ratio statistic for independence in a count table."""
    obs = np.asarray(table, dtype=np.float64)
    total = obs.sum()
    if total == 0:
        return 0.0
    expected = np.outer(obs.sum(axis=1), obs.sum(axis=0)) / total
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(obs > 0, obs * np.log(obs / expected), 0.0)
    return float(2.0 * terms.sum())


@dataclass
class PermutationTest:
    statistic: float
    p_value: float
    n_perm: int


def permutation_independence(
    codes, classes, n_perm: int = 1000, seed: int = 0
) -> PermutationTest:
    """Permutation p-value for code/class dependence via the G statistic.

    Class labels are shuffled relative to codes; the p-value uses the
    add-one estimator so it is never exactly zero.
    """
    codes = list(codes)
    classes = list(classes)
    observed = g_statistic(contingency_table(codes, classes)[0])
    rng = np.random.default_rng(seed)
    arr = np.array(classes, dtype=object)
    hits = 0
    for _ in range(n_perm):
        perm = arr[rng.permutation(arr.shape[0])]
        if g_statistic(contingency_table(codes, perm)[0]) >= observed:
            hits += 1
    return PermutationTest(
        statistic=observed, p_value=(1 + hits) / (1 + n_perm), n_perm=n_perm
    )


def cluster_purity(codes, classes) -> float:
    """Fraction of outputs whose class is the majority class of their code."""
    table, _, _ = contingency_table(list(codes), list(classes))
    total = table.sum()
    if total == 0:
        raise ValueError("no observations")
    return float(table.max(axis=1).sum() / total)


@dataclass
class PeakMatch:
    row_index: int
    peak_col: int | None
    status: str  # "mutual" | "fail" | "tied"


def peak_match(table: np.ndarray) -> list[PeakMatch]:
    """Audit row/column peak reciprocity in a count table.

    Rows are the audited entities (words), columns their assignments
    (codes).  For each row: find its peak column, then that column's
    peak row.  "mutual" means both peaks are unique and point at each
    other; "tied" means the row ties for top within its peak column (or
    has no unique peak column); anything else — including a flat row —
    is "fail".
    """
    table = np.asarray(table, dtype=np.float64)
    out = []
    for i, row in enumerate(table):
        if row.shape[0] > 1 and np.all(row == row[0]):
            # among >=2 columns, an all-equal row expresses no preference
            out.append(PeakMatch(row_index=i, peak_col=None, status="fail"))
            continue
        top = row.max()
        peaks = np.flatnonzero(row == top)
        if peaks.shape[0] > 1:
            out.append(PeakMatch(row_index=i, peak_col=None, status="tied"))
            continue
        j = int(peaks[0])
        col = table[:, j]
        col_peaks = np.flatnonzero(col == col.max())
        if col_peaks.shape[0] == 1 and int(col_peaks[0]) == i:
            status = "mutual"
        elif col_peaks.shape[0] > 1 and i in col_peaks:
            # the row is tied-for-top within its own peak column
            status = "tied"
        else:
            status = "fail"
        out.append(PeakMatch(row_index=i, peak_col=j, status=status))
    return out


def peak_match_counts(matches: list[PeakMatch]) -> dict:
    counts = {"mutual": 0, "tied": 0, "fail": 0}
    for m in matches:
        counts[m.status] += 1
    return counts
