"""Command-line front end: prepare, train, classify, generate, analyze.

Every verb writes a run manifest next to its outputs recording the
command line, the effective configuration, and the artifacts produced.
Exit codes: 0 success, 2 configuration error, 3 numerical failure during
training, 4 missing or corrupt input files.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audio import write_wav
from .corpus import CorpusError, load_prepared, prepare_corpus, save_prepared
from .latent import LatentSpec, enumerate_hard_codes
from .models import CheckpointError, ModelConfig, desk_model, load_checkpoint, paper_model
from .probe import (
    classify_corpus,
    generate_with_code,
    interpolate_features,
    read_classification_csv,
    sweep_trend,
    write_classification_csv,
)
from .stats import (
    aic_compare,
    cluster_purity,
    code_class_fits,
    contingency_table,
    fit_logistic,
    grouped_feature_test,
    peak_match,
    peak_match_counts,
    permutation_independence,
)
from .toywords import write_toy_corpus
from .train import ConfigError, NumericalError, TrainConfig, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_MISSING = 4


def _manifest(out_dir, verb: str, config: dict, outputs: list, started: str,
              argv: list | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": verb,
        "argv": sys.argv[1:] if argv is None else list(argv),
        "version": __version__,
        "started": started,
        "finished": datetime.datetime.now().isoformat(timespec="seconds"),
        "config": config,
        "outputs": [str(p) for p in outputs],
    }
    (out_dir / "run_manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def _now() -> str:
    return datetime.datetime.now().isoformat(timespec="seconds")


def cmd_prepare(args) -> int:
    started = _now()
    audio_dir = Path(args.audio)
    if args.make_toy:
        write_toy_corpus(
            audio_dir,
            n_classes=args.toy_classes,
            tokens_per_class=args.toy_tokens,
            rate=args.rate,
            seed=args.seed,
        )
    if not audio_dir.is_dir():
        raise CorpusError(f"audio directory {audio_dir} does not exist")
    pc = prepare_corpus(
        audio_dir, args.slice_len, test_fraction=args.test_fraction, seed=args.seed,
        over=args.over_length,
    )
    out = save_prepared(args.out, pc)
    print(
        f"prepared {pc.train_x.shape[0]} train / {pc.test_x.shape[0]} test tokens, "
        f"{len(pc.labels)} classes, slice {pc.slice_len} @ {pc.rate} Hz"
    )
    _manifest(
        out, "prepare",
        {
            "audio": str(audio_dir), "slice_len": args.slice_len,
            "test_fraction": args.test_fraction, "seed": args.seed,
            "content_hash": pc.content_hash(),
        },
        [out / "arrays.npz", out / "manifest.json"], started, argv=args._argv,
    )
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file {args.config} not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {args.config} is not valid JSON: {e}") from e
        cfg = TrainConfig.from_dict(doc)
    else:
        model = paper_model() if args.profile == "paper" else desk_model()
        if args.model_dim:
            model = ModelConfig(
                slice_len=model.slice_len, model_dim=args.model_dim,
                n_layers=model.n_layers,
            )
        latent = LatentSpec(
            kind=args.latent_kind, size=args.latent_size, noise_dim=args.noise_dim
        )
        cfg = TrainConfig(latent=latent, model=model)
    overrides = {
        "batch_size": args.batch_size, "total_steps": args.steps,
        "seed": args.train_seed, "checkpoint_every": args.checkpoint_every,
        "lr": args.lr, "q_weight": args.q_weight, "n_critic": args.n_critic,
    }
    fields = {k: v for k, v in overrides.items() if v is not None}
    if fields:
        doc = cfg.to_dict()
        doc.update(fields)
        cfg = TrainConfig.from_dict(doc)
    cfg.validate()
    return cfg


def cmd_train(args) -> int:
    started = _now()
    cfg = _train_config(args)
    pc = load_prepared(args.corpus)
    if pc.slice_len != cfg.model.slice_len:
        raise ConfigError(
            f"corpus slice {pc.slice_len} != model slice {cfg.model.slice_len}"
        )

    def progress(rec):
        if rec.step % max(1, args.log_every) == 0:
            print(
                f"step {rec.step}: d={rec.d_loss:.4f} g={rec.g_loss:.4f} "
                f"q={rec.q_loss:.4f} gp={rec.gp:.4f}"
            )

    try:
        result = train(cfg, pc, out_dir=args.out, progress=progress)
    except NumericalError:
        print("training aborted on non-finite loss; last checkpoint retained", file=sys.stderr)
        raise
    outputs = [result.final_checkpoint, result.log_path]
    _manifest(args.out, "train", cfg.to_dict(), [p for p in outputs if p], started,
              argv=args._argv)
    print(f"finished {cfg.total_steps} steps; final checkpoint {result.final_checkpoint}")
    return EXIT_OK


def cmd_classify(args) -> int:
    started = _now()
    ckpt = load_checkpoint(args.checkpoint)
    pc = load_prepared(args.corpus)
    if pc.slice_len != ckpt.model_cfg.slice_len:
        raise ConfigError(
            f"corpus slice {pc.slice_len} != model slice {ckpt.model_cfg.slice_len}"
        )
    records = classify_corpus(ckpt.qnet, pc, ckpt.spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_classification_csv(out, records, property_prefix=args.property_prefix)
    counts: dict = {}
    for r in records:
        counts[str(r.decoded)] = counts.get(str(r.decoded), 0) + 1
    print(f"classified {len(records)} held-out tokens into {len(counts)} codes")
    for code in sorted(counts):
        print(f"  code {code}: {counts[code]}")
    _manifest(
        out.parent, "classify",
        {
            "checkpoint": str(args.checkpoint), "corpus": str(args.corpus),
            "corpus_hash": pc.content_hash(),
        },
        [out], started, argv=args._argv,
    )
    return EXIT_OK


def _parse_code(spec: LatentSpec, text: str):
    if spec.kind == "one_hot":
        try:
            index = int(text)
        except ValueError as e:
            raise ConfigError(f"one-hot code must be an integer index, got {text!r}") from e
        if not 0 <= index < spec.size:
            raise ConfigError(f"code index {index} outside [0, {spec.size})")
        return index
    if len(text) != spec.size or set(text) - {"0", "1"}:
        raise ConfigError(f"binary code must be {spec.size} chars of 0/1, got {text!r}")
    return text


def cmd_generate(args) -> int:
    started = _now()
    ckpt = load_checkpoint(args.checkpoint)
    spec = ckpt.spec
    rng = np.random.default_rng(args.seed)
    out = Path(args.out)
    rate = args.rate
    written = []

    if args.interpolate:
        from .latent import sample_noise

        bits = [int(b) for b in args.interpolate[0].split(",")]
        lo, hi, step = (float(v) for v in args.interpolate[1:])
        z = sample_noise(spec, rng, 1)[0]
        sweep = interpolate_features(
            ckpt.generator, spec, z, bits, lo, hi, step, rate=rate
        )
        sweep_dir = out / ("interp_" + "-".join(str(b) for b in bits))
        rows = []
        for i, v in enumerate(sweep.values):
            path = sweep_dir / f"v{i:03d}_{v:.2f}.wav"
            write_wav(path, sweep.clips[i], rate)
            written.append(path)
            rows.append((v, sweep.metrics[i]))
        trend = sweep_trend(sweep)
        csv_path = sweep_dir / "metrics.csv"
        with open(csv_path, "w") as fh:
            fh.write("grid_value,onset_band_ratio\n")
            for v, m in rows:
                fh.write(f"{v:.6g},{m:.8g}\n")
            fh.write(f"# spearman_rho,{trend.rho:.6g}\n")
        written.append(csv_path)
        print(
            f"swept entries {bits} over {len(rows)} grid points: "
            f"rho {trend.rho:+.3f}, delta {trend.delta:+.4f}"
        )
        config = {
            "checkpoint": str(args.checkpoint), "interpolate": args.interpolate,
            "seed": args.seed, "rate": rate,
        }
    else:
        if args.code is not None:
            codes = [_parse_code(spec, args.code)]
        else:
            codes = list(enumerate_hard_codes(spec))
        scale = args.marginal
        for code in codes:
            audio = generate_with_code(ckpt.generator, spec, code, args.n, rng, scale=scale)
            for i in range(audio.shape[0]):
                path = out / f"code_{code}" / f"gen_{i:04d}.wav"
                write_wav(path, audio[i], rate)
                written.append(path)
        print(f"wrote {len(written)} clips for {len(codes)} codes under {out}")
        config = {
            "checkpoint": str(args.checkpoint), "codes": [str(c) for c in codes],
            "n": args.n, "scale": scale if scale is not None else spec.marginal_scale,
            "seed": args.seed, "rate": rate,
        }
    _manifest(out, "generate", config, written[:20], started, argv=args._argv)
    return EXIT_OK


def _fit_csv(path: Path, fit, terms: list[str]) -> None:
    """Coefficient table as CSV: term, estimate, stderr, z, p."""
    coef = np.atleast_2d(fit.coef.T).reshape(-1)
    se = np.atleast_2d(np.asarray(fit.se).T).reshape(-1)
    z = np.atleast_2d(np.asarray(fit.z).T).reshape(-1)
    p = np.atleast_2d(np.asarray(fit.p_values).T).reshape(-1)
    with open(path, "w") as fh:
        fh.write("term,beta,stderr,z,p\n")
        for name, b, s, zz, pp in zip(terms, coef, se, z, p):
            fh.write(f"{name},{b:.8g},{s:.8g},{zz:.8g},{pp:.8g}\n")


def _fit_json(fit) -> dict:
    return {
        "kind": fit.kind,
        "loglik": fit.loglik,
        "n_params": fit.n_params,
        "aic": fit.aic,
        "converged": fit.converged,
        "separation": fit.separation,
        "n_obs": fit.n_obs,
        "design": fit.design,
    }


def cmd_analyze(args) -> int:
    started = _now()
    rows, cols = read_classification_csv(args.records)
    labels = [r["label"] for r in rows]
    codes = [str(r["decoded"]) for r in rows]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"n_records": len(rows), "analyses": []}
    outputs = []

    if args.multinomial:
        full, null, code_levels, class_levels = code_class_fits(codes, labels)
        comparison = aic_compare(full, null)
        perm = permutation_independence(codes, labels, n_perm=args.n_perm, seed=args.seed)
        terms = [
            f"{cls}∕{code}"
            for cls in class_levels[1:]
            for code in [str(c) for c in code_levels]
        ]
        _fit_csv(out / "multinomial_coefficients.csv", full, terms)
        outputs.append(out / "multinomial_coefficients.csv")
        report["analyses"].append("multinomial")
        report["multinomial"] = {
            "code_model": _fit_json(full),
            "null_model": _fit_json(null),
            "compare": comparison,
            "purity": cluster_purity(codes, labels),
            "permutation": {
                "g_statistic": perm.statistic, "p_value": perm.p_value, "n_perm": perm.n_perm,
            },
        }
        print(
            f"multinomial: AIC {full.aic:.1f} (k={full.n_params}) vs "
            f"null {null.aic:.1f} (k={null.n_params}); independence p = {perm.p_value:.4g}"
        )

    if args.logistic:
        col = args.logistic
        if col not in cols:
            raise ConfigError(f"records CSV has no column {col!r}")
        if any(set(c) - {"0", "1"} for c in codes):
            raise ConfigError("per-bit logistic analysis needs binary (bit-string) codes")
        y = np.array([int(r[col]) for r in rows])
        bits = np.array([[int(ch) for ch in c] for c in codes], dtype=float)
        try:
            fit = fit_logistic(bits, y, add_intercept=True, drop_constant=True)
        except ValueError as e:
            raise ConfigError(f"logistic fit is degenerate: {e}") from e
        kept = [j for j in range(bits.shape[1]) if j not in fit.design["dropped_columns"]]
        terms = ["intercept"] + [f"phi{j + 1}" for j in kept]
        _fit_csv(out / "logistic_coefficients.csv", fit, terms)
        outputs.append(out / "logistic_coefficients.csv")
        report["analyses"].append("logistic")
        report["logistic"] = {"outcome": col, **_fit_json(fit)}
        print(f"logistic      {col} ~ bits: AIC {fit.aic:.1f}, k={fit.n_params}")

    if args.grouped:
        bit_list = [int(b) for b in args.grouped[0].split(",")]
        col = args.grouped[1]
        if col not in cols:
            raise ConfigError(f"records CSV has no column {col!r}")
        y, g, mixed = [], [], 0
        for r in rows:
            code = str(r["decoded"])
            states = {int(code[b - 1]) for b in bit_list}
            if len(states) > 1:
                mixed += 1
                continue
            y.append(int(r[col]))
            g.append(states.pop())
        for state in (0, 1):
            if state not in g:
                raise ConfigError(
                    f"no records have bits {bit_list} all set to {state}; "
                    "the grouped comparison needs both groups"
                )
        try:
            grouped = grouped_feature_test(np.array(y), np.array(g))
        except ValueError as e:
            raise ConfigError(f"grouped comparison is degenerate: {e}") from e
        report["analyses"].append("grouped")
        report["grouped"] = {
            "bits": bit_list,
            "outcome": col,
            "mixed_rows": mixed,
            "all_zero": {"n": grouped.n0, "k": grouped.k0, "p": grouped.p0,
                         "ci": list(grouped.ci0)},
            "all_one": {"n": grouped.n1, "k": grouped.k1, "p": grouped.p1,
                        "ci": list(grouped.ci1)},
            "p_value": grouped.p_value,
        }
        print(
            f"grouped bits {bit_list} on {col}: "
            f"{100 * grouped.p0:.1f}% [{100 * grouped.ci0[0]:.1f}, {100 * grouped.ci0[1]:.1f}] vs "
            f"{100 * grouped.p1:.1f}% [{100 * grouped.ci1[0]:.1f}, {100 * grouped.ci1[1]:.1f}], "
            f"p = {grouped.p_value:.4g} ({mixed} mixed rows set aside)"
        )

    if args.peaks is not None:
        words = sorted(set(labels))
        if args.peaks > 0 and args.peaks < len(words):
            rng = np.random.default_rng(args.seed)
            words = sorted(rng.choice(words, size=args.peaks, replace=False))
        keep = [i for i, l in enumerate(labels) if l in words]
        table, word_levels, code_levels = contingency_table(
            [labels[i] for i in keep], [codes[i] for i in keep]
        )
        matches = peak_match(table)
        counts = peak_match_counts(matches)
        with open(out / "peak_match.csv", "w") as fh:
            fh.write("word,peak_code,status\n")
            for m in matches:
                peak = "" if m.peak_col is None else str(code_levels[m.peak_col])
                fh.write(f"{word_levels[m.row_index]},{peak},{m.status}\n")
        outputs.append(out / "peak_match.csv")
        report["analyses"].append("peaks")
        report["peaks"] = {"n_words": len(words), **counts}
        print(
            f"peak match over {len(words)} words: "
            f"{counts['mutual']} mutual, {counts['tied']} tied, {counts['fail']} fail"
        )

    if not report["analyses"]:
        raise ConfigError(
            "analyze needs at least one of --multinomial/--logistic/--grouped/--peaks"
        )
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True))
    outputs.append(report_path)
    _manifest(
        out, "analyze",
        {"records": str(args.records), "seed": args.seed, "analyses": report["analyses"]},
        outputs, started, argv=args._argv,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexigan",
        description="Unsupervised lexical learning from raw audio with an "
        "information-coupled GAN.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("prepare", help="slice a WAV tree into a train/test corpus")
    p.add_argument("--audio", required=True, help="directory of <label>/<token>.wav files")
    p.add_argument("--out", required=True, help="prepared corpus directory")
    p.add_argument("--slice-len", type=int, required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--over-length", choices=("error", "crop"), default="error",
                   help="what to do with tokens longer than the slice")
    p.add_argument("--make-toy", action="store_true",
                   help="synthesize the toy word corpus into --audio first")
    p.add_argument("--toy-classes", type=int, default=4)
    p.add_argument("--toy-tokens", type=int, default=64)
    p.add_argument("--rate", type=int, default=16000)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train generator, critic, and classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON training config; flags below override it")
    p.add_argument("--profile", choices=("paper", "desk"), default="desk")
    p.add_argument("--model-dim", type=int)
    p.add_argument("--latent-kind", choices=("one_hot", "binary"), default="one_hot")
    p.add_argument("--latent-size", type=int, default=4)
    p.add_argument("--noise-dim", type=int, default=90)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--train-seed", type=int)
    p.add_argument("--checkpoint-every", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--q-weight", type=float)
    p.add_argument("--n-critic", type=int)
    p.add_argument("--log-every", type=int, default=50)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classifier posteriors on held-out tokens")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--property-prefix", default="s",
                   help="label prefix marking the derived 0/1 property column")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("generate", help="audio with the latent code pinned or swept")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--code", help="class index or bit string (default: every hard code)")
    p.add_argument("--n", type=int, default=100, help="clips per code")
    p.add_argument("--marginal", type=float, default=None,
                   help="code drive level (default: the model's marginal scale)")
    p.add_argument("--interpolate", nargs=4, metavar=("BITS", "FROM", "TO", "STEP"),
                   help="sweep comma-separated code entries over a grid, e.g. 2,3 0 3 0.2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rate", type=int, default=16000)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="statistics relating codes to labels")
    p.add_argument("--records", required=True, help="CSV from `classify`")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--multinomial", action="store_true",
                   help="label ~ code fit with AIC against the intercept-only model")
    p.add_argument("--logistic", metavar="COL",
                   help="fit CSV column COL (0/1) against the decoded bits")
    p.add_argument("--grouped", nargs=2, metavar=("BITS", "COL"),
                   help="compare COL between rows with BITS all 0 vs all 1")
    p.add_argument("--peaks", type=int, nargs="?", const=0, default=None, metavar="N",
                   help="word-code peak matching (optionally on N sampled words)")
    p.add_argument("--n-perm", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args._argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (CorpusError, CheckpointError, FileNotFoundError) as e:
        print(f"missing or corrupt input: {e}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
