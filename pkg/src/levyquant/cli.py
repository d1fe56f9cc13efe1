"""Command-line entry point: ``levyquant {converge,compare,codec,density,sample}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .density import DensityGrid, DensityInversionError, cf_to_density, compound_density_An
from .harness import (SEED_ENV, ConfigError, ExperimentConfig, default_seed, run_codec_check,
                      run_comparison, run_convergence)
from .noise_models import (GaussianLK, PoissonParams, StableParams, gaussian_exponent,
                           model_from_json, stable_exponent)
from .sampling import IncrementSpec, RngStream, dump_stream, sample_increments

_RUNNERS = {"converge": run_convergence, "compare": run_comparison, "codec": run_codec_check}


def _model_arg(text: str):
    """A model given inline as JSON or as a path to a JSON file."""
    path = Path(text)
    return model_from_json(path.read_text() if path.exists() else text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levyquant", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"run a {name} experiment from a JSON config")
        p.add_argument("config", help="path to the experiment config")
        p.add_argument("--seed", type=int, help=f"override the seed (default: config, then ${SEED_ENV})")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out", help="output directory (default: from config)")

    p = sub.add_parser("density", help="tabulate the density of X_0 or of the nonzero increment part")
    p.add_argument("--model", required=True, type=_model_arg, help="model JSON or path")
    p.add_argument("--window", nargs=2, type=float, metavar=("LO", "HI"), default=(-50.0, 50.0))
    p.add_argument("--points", type=int, default=1 << 16)
    p.add_argument("--n", type=int, default=1, help="window count for Poisson jump densities")
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="dump raw increments as little-endian float64")
    p.add_argument("--model", required=True, type=_model_arg, help="model JSON or path")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    return parser


def _density(args) -> int:
    model = args.model
    if isinstance(model, (StableParams, GaussianLK)):
        expo = stable_exponent if isinstance(model, StableParams) else gaussian_exponent
        grid = cf_to_density(lambda w: np.exp(expo(model, w)), tuple(args.window), args.points)
    elif isinstance(model, PoissonParams):
        amp = model.amplitude
        if amp.pdf is None:
            raise ConfigError("amplitude has no density")
        lo, hi = args.window
        dx = (hi - lo) / (args.points - 1)
        alo, ahi = amp.support
        covered = lo <= alo and ahi <= hi
        alo, ahi = max(lo, alo), min(hi, ahi)
        i0, i1 = int(np.floor(alo / dx + 1e-9)), int(np.ceil(ahi / dx - 1e-9))
        grid_a = DensityGrid.tabulate(amp.pdf, i0 * dx, i1 * dx, i1 - i0 + 1,
                                      tail_mass=0.0 if covered else None)
        grid = compound_density_An(grid_a, model.rate, args.n)
    else:
        raise ConfigError("density supports stable, Gaussian and Poisson models")
    grid.to_csv(args.out)
    print(json.dumps({"out": args.out, "tail_mass": grid.tail_mass, "clamped_mass": grid.clamped_mass}))
    return 0


def _sample(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    x = sample_increments(IncrementSpec(args.model, args.n), args.count, RngStream(seed))
    dump_stream(args.out, x, args.model, args.n, seed)
    print(json.dumps({"out": args.out, "count": args.count, "seed": seed}))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in _RUNNERS:
            cfg = ExperimentConfig.load(args.config)
            result = _RUNNERS[args.command](cfg, seed=args.seed, workers=args.workers, output_dir=args.out)
            for a in result.assertions:
                status = "PASS" if a.passed else "FAIL"
                print(f"{status} {a.kind}{'' if a.required else ' (optional)'}: {a.detail}")
            for path in result.outputs:
                print(path)
            return 0 if result.passed else 1
        if args.command == "density":
            return _density(args)
        return _sample(args)
    except (ConfigError, DensityInversionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
