"""Miniature end-to-end run on the synthetic word corpus.

Builds a 4-word corpus (two vowel qualities, with and without an
initial fricative), trains the three networks briefly at a reduced
slice length, then classifies the held-out tokens and summarizes how
the latent codes line up with the words.  A few hundred steps are not
enough for clean clustering -- the point is to watch every stage of the
pipeline run, not to reach the end state.

Run:  python3 demos/02_toy_pipeline.py [--steps N] [--out DIR]
"""

import argparse
import time

from lexigan.corpus import prepare_from_arrays
from lexigan.latent import LatentSpec
from lexigan.models import ModelConfig
from lexigan.probe import classify_clips
from lexigan.stats import (
    aic_compare,
    cluster_purity,
    code_class_fits,
    contingency_table,
    permutation_independence,
)
from lexigan.toywords import make_toy_corpus
from lexigan.train import TrainConfig, train


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--out", default="demo_out/toy_pipeline")
    args = ap.parse_args()

    print("== corpus ==")
    clips, labels, classes = make_toy_corpus(
        n_classes=4, tokens_per_class=50, slice_len=1024, seed=11, over="crop"
    )
    for cls in classes:
        print(f"  {cls.name}: f0 {cls.f0} Hz, "
              f"{'fricative onset' if cls.fricative else 'plain onset'}")
    pc = prepare_from_arrays(clips, labels, 1024, 16000, test_fraction=0.2,
                             seed=11, over="crop")
    print(f"  {pc.train_x.shape[0]} train / {pc.test_x.shape[0]} held out")

    print("== training ==")
    cfg = TrainConfig(
        latent=LatentSpec(kind="one_hot", size=4, noise_dim=30),
        model=ModelConfig(slice_len=1024, model_dim=4, n_layers=3, seed_len=16,
                          kernel=25, stride=4),
        batch_size=8,
        total_steps=args.steps,
        checkpoint_every=0,
        seed=1,
    )
    t0 = time.time()

    def progress(rec):
        if rec.step % 50 == 0 or rec.step == 1:
            print(f"  step {rec.step:4d}: critic {rec.d_loss:+.3f}  "
                  f"generator {rec.g_loss:+.3f}  code loss {rec.q_loss:.3f}")

    result = train(cfg, pc, out_dir=args.out, progress=progress)
    print(f"  {args.steps} steps in {time.time() - t0:.0f} s; "
          f"checkpoint at {result.final_checkpoint}")

    print("== held-out classification ==")
    records = classify_clips(result.state.Q, pc.test_x, cfg.latent,
                             labels=pc.test_y)
    codes = [str(r.decoded) for r in records]
    labs = [r.label for r in records]
    table, code_levels, class_levels = contingency_table(codes, labs)
    header = " ".join(f"{c:>5}" for c in class_levels)
    print(f"  code   {header}")
    for code, row in zip(code_levels, table):
        print(f"  {code:>4}   " + " ".join(f"{v:5d}" for v in row))
    purity = cluster_purity(codes, labs)
    perm = permutation_independence(codes, labs, n_perm=500, seed=0)
    full, null, _, _ = code_class_fits(codes, labs)
    cmp = aic_compare(full, null)
    print(f"  majority-code purity {purity:.2f} (chance 0.25)")
    print(f"  code/word independence: G = {perm.statistic:.1f}, "
          f"p = {perm.p_value:.4g} over {perm.n_perm} permutations")
    print(f"  word ~ code AIC {cmp['aic_a']:.1f} vs intercept-only "
          f"{cmp['aic_b']:.1f} (lower wins)")


if __name__ == "__main__":
    main()
