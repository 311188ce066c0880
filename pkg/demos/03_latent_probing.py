"""Probe a trained checkpoint through its latent code channel.

Loads the checkpoint written by demos/02_toy_pipeline.py (run that
first) and exercises the generation-side tools:

1. generate a few clips per hard code and describe their onsets with
   the high-band energy ratio,
2. push one code entry past its training value (marginal generation),
3. sweep a code entry over a grid at fixed noise and report the
   monotonic trend of the onset measurement.

Run:  python3 demos/02_toy_pipeline.py
      python3 demos/03_latent_probing.py [--checkpoint DIR]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from lexigan.latent import enumerate_hard_codes
from lexigan.models import load_checkpoint
from lexigan.probe import (
    generate_marginal,
    generate_with_code,
    interpolate_features,
    onset_band_ratio,
    sweep_trend,
)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--checkpoint", default=None,
                    help="checkpoint directory (default: newest under demo_out/)")
    args = ap.parse_args()

    if args.checkpoint is None:
        candidates = sorted(Path("demo_out/toy_pipeline").glob("ckpt_*"))
        if not candidates:
            sys.exit("no checkpoint found; run demos/02_toy_pipeline.py first")
        ckpt_dir = candidates[-1]
    else:
        ckpt_dir = Path(args.checkpoint)
    ckpt = load_checkpoint(ckpt_dir)
    spec = ckpt.spec
    rate = 16000
    print(f"loaded {ckpt_dir} (step {ckpt.step}, latent {spec.kind}({spec.size}))")

    rng = np.random.default_rng(0)
    print("== per-code onset character (training-range drive) ==")
    for code in enumerate_hard_codes(spec):
        audio = generate_with_code(ckpt.generator, spec, code, 5, rng,
                                   scale=spec.train_scale)
        ratios = [onset_band_ratio(clip, rate) for clip in audio]
        print(f"  code {code}: onset high-band ratio "
              f"{np.mean(ratios):.3f} +- {np.std(ratios):.3f}")

    print("== marginal generation (code driven past its training value) ==")
    marginal = generate_marginal(ckpt.generator, spec, 5,
                                 np.random.default_rng(1))
    for code, audio in marginal.items():
        ratios = [onset_band_ratio(clip, rate) for clip in audio]
        print(f"  code {code} at drive {spec.marginal_scale:.0f}: "
              f"ratio {np.mean(ratios):.3f}")

    print("== single-entry sweep at fixed noise ==")
    from lexigan.latent import sample_noise

    z = sample_noise(spec, np.random.default_rng(2), 1)[0]
    sweep = interpolate_features(ckpt.generator, spec, z, [1], 0.0, 2.0, 0.25,
                                 rate=rate)
    trend = sweep_trend(sweep)
    for v, m in zip(sweep.values, sweep.metrics):
        print(f"  entry 1 = {v:4.2f} -> onset ratio {m:.3f}")
    print(f"  Spearman rho {trend.rho:+.2f}, endpoint delta {trend.delta:+.3f}")


if __name__ == "__main__":
    main()
