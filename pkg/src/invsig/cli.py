"""``invsig`` command-line front end.

Exit codes: 0 success, 1 a checked property failed, 2 configuration or
guard failure, 3 I/O failure, 4 malformed or unsupported input file.
Every output file is a function of (config, seed); run times go to
stderr only.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import fixtures
from .datasets import generate, load_dataset, write_dataset
from .errors import (
    ConfigError, DegenerateImage, DimensionMismatch, EmptyBank, EmptyWindow, InsufficientSamples,
    InvalidElement, LipschitzBudgetExceeded, MalformedFile, OrbitsNotDistinct, UnsupportedFormat,
)
from .experiments import ExperimentReport, represent, sample_complexity
from .groups import PoolingWindow, box_window, full_window, group_from_json
from .hw import PoolingSpec, signature
from .image import load_pgm, load_raster_json, normalize
from .rng import derive_seed
from .suites import SUITES, run_suite
from .templates import GaborParams, TemplateBank, make_gabor_bank, make_random_bank

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO, EXIT_FORMAT = 0, 1, 2, 3, 4

_CONFIG_ERRORS = (ConfigError, LipschitzBudgetExceeded, InsufficientSamples, DimensionMismatch,
                  EmptyBank, EmptyWindow, InvalidElement, OrbitsNotDistinct, DegenerateImage)
_FORMAT_ERRORS = (MalformedFile, UnsupportedFormat, json.JSONDecodeError, UnicodeDecodeError)


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg})") from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _write_report(report: ExperimentReport, out: Path, stem: str) -> None:
    _write(out / f"{stem}.csv", report.to_csv())
    _write(out / f"{stem}.json", _dump(report.to_json()))
    for name, text in report.artifacts.items():
        _write(out / name, text)


def _load_image(path):
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return load_pgm(path)
    img = load_raster_json(path)
    return img if img.normalized else normalize(img)


def _pooling(value) -> PoolingSpec:
    """A pooling spec from inline JSON, a JSON file, or one of the names cdf/moments/max."""
    if value is None:
        return PoolingSpec.cdf_bins(16, s=0.05)
    if isinstance(value, dict):
        return PoolingSpec.from_json(value)
    if value in ("cdf", "cdf_bins"):
        return PoolingSpec.cdf_bins(16, s=0.05)
    if value == "moments":
        return PoolingSpec.moments([1, 2, 3])
    if value == "max":
        return PoolingSpec.max()
    text = value if value.lstrip().startswith("{") else Path(value).read_text()
    try:
        return PoolingSpec.from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"bad pooling spec: {exc.msg}") from exc


def _window(value, group) -> PoolingWindow:
    """``full``, an integer box radius, or ``{"members": [...]}``."""
    if value is None or value == "full":
        return full_window(group)
    if isinstance(value, dict):
        if "radius" in value:
            return box_window(group, int(value["radius"]))
        return PoolingWindow(group, tuple(int(m) for m in value["members"]))
    try:
        return box_window(group, int(value))
    except ValueError as exc:
        raise ConfigError(f"bad window {value!r}") from exc


def cmd_gen_data(args) -> int:
    cfg = _read_json(args.config) if args.config else fixtures.STANDARD_DATASET
    ds = generate(cfg, args.seed, args.mode)
    write_dataset(ds, Path(args.out))
    return EXIT_OK


def cmd_sample_complexity(args) -> int:
    """Config keys: ``dataset`` (inline dataset config or a dataset directory),
    ``modes``, ``representations`` (raw, signature), ``bank`` ({K, seed} or
    {path}), ``pooling``, ``window``, ``m_grid`` and ``splits``."""
    cfg = _read_json(args.config) if args.config else {"dataset": fixtures.STANDARD_DATASET}
    try:
        data = cfg["dataset"]
        m_grid = [int(m) for m in cfg.get("m_grid", [1, 2, 4, 8])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad sample-complexity config: {exc}") from exc
    splits = int(cfg.get("splits", 100))
    reps = list(cfg.get("representations", ["raw", "signature"]))
    modes = list(cfg.get("modes", ["unrectified", "rectified"]))
    spec = _pooling(cfg.get("pooling"))
    split_seed = derive_seed(args.seed, "sample-complexity/splits")
    report = ExperimentReport("sample-complexity", dict(cfg, seed=args.seed, m_grid=m_grid, splits=splits))
    if isinstance(data, str):
        stored = load_dataset(data).config
        data, data_seed = stored, int(stored["seed"])
    else:
        data_seed = args.seed
    for mode in modes:
        ds = generate(data, data_seed, mode)
        bank = None
        for rep in reps:
            if rep == "raw":
                feats = represent(ds, None, None)
            elif rep == "signature":
                if bank is None:
                    bank = _bank_from(cfg.get("bank", {}), ds.group, args.seed)
                window = _window(cfg.get("window"), ds.group)
                feats = _signature_features(ds, bank, window, spec)
            else:
                raise ConfigError(f"unknown representation {rep!r}")
            report.rows += sample_complexity(feats, ds.labels(), m_grid, splits, split_seed,
                                             f"{rep}/{mode}", threads=args.threads)
    _write_report(report, Path(args.out), "sample_complexity")
    return EXIT_OK


def _bank_from(obj: dict, group, seed: int) -> TemplateBank:
    if "path" in obj:
        return TemplateBank.load(obj["path"])
    K = int(obj.get("K", 16))
    bank_seed = int(obj["seed"]) if "seed" in obj else derive_seed(seed, "sample-complexity/bank")
    return make_random_bank(group, K, bank_seed)


def _signature_features(ds, bank, window, spec):
    if window.window_id() == "full":
        return represent(ds, bank, spec)
    return np.stack([signature(s.image, bank, window, spec).values.reshape(-1) for s in ds.samples])


def cmd_check(args) -> int:
    cfg = _read_json(args.config) if args.config else {}
    started = time.perf_counter()
    report = run_suite(args.suite, cfg, args.seed)
    _write_report(report, Path(args.out), f"check_{args.suite}")
    for c in report.checks:
        verdict = "PASS" if c["passed"] else "FAIL"
        print(f"{verdict} {args.suite}: {c['name']} value={c['value']:.6g} bound={c['bound']:.6g}")
    print(f"{args.suite}: {time.perf_counter() - started:.2f}s", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_signature(args) -> int:
    image = _load_image(args.image)
    bank = TemplateBank.load(args.bank)
    window = _window(args.window, bank.group)
    sig = signature(image, bank, window, _pooling(args.pooling))
    sys.stdout.write(_dump(sig.to_json()))
    return EXIT_OK


def cmd_gabor_bank(args) -> int:
    """Params file: ``group`` plus either a ``params`` list of Gabor
    parameter objects or ``sigma``, ``omega0`` and an ``orientations`` count
    spread evenly over [0, pi)."""
    cfg = _read_json(args.params)
    try:
        group = group_from_json(cfg["group"])
        if "params" in cfg:
            params = [GaborParams.from_json(p) for p in cfg["params"]]
        else:
            count = int(cfg.get("orientations", 1))
            params = [GaborParams(float(cfg["sigma"]), float(cfg["omega0"]), k * math.pi / count)
                      for k in range(count)]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad Gabor bank parameters: {exc}") from exc
    make_gabor_bank(group, params).save(args.dest)
    return EXIT_OK


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    def add_globals(p, suppress):
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        p.add_argument("--config", default=d(None), help="JSON config file")
        p.add_argument("--seed", type=_seed, default=d(0), help="master seed (unsigned 64-bit)")
        p.add_argument("--out", default=d("."), help="output directory")
        p.add_argument("--threads", type=int, default=d(os.cpu_count() or 1),
                       help="worker threads; never changes output bytes")

    parser = argparse.ArgumentParser(prog="invsig", description="Invariant signatures and their checks.")
    add_globals(parser, False)
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    add_globals(p, True)
    p.add_argument("--mode", choices=["rectified", "unrectified"], default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("sample-complexity", help="nearest-neighbour accuracy against examples per class")
    add_globals(p, True)
    p.set_defaults(func=cmd_sample_complexity)

    p = sub.add_parser("check", help="run a property suite")
    add_globals(p, True)
    p.add_argument("suite", choices=SUITES)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("signature", help="print the signature of an image")
    add_globals(p, True)
    p.add_argument("image", help="raster JSON or binary PGM")
    p.add_argument("bank", help="template bank JSON")
    p.add_argument("--pooling", default=None, help="cdf, moments, max, inline JSON or a JSON file")
    p.add_argument("--window", default=None, help="'full' or a box radius")
    p.set_defaults(func=cmd_signature)

    p = sub.add_parser("gabor-bank", help="write a Gabor template bank")
    add_globals(p, True)
    p.add_argument("params", help="JSON parameter file")
    p.add_argument("dest", help="output bank file")
    p.set_defaults(func=cmd_gabor_bank)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("invsig: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"invsig: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _FORMAT_ERRORS as exc:
        print(f"invsig: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"invsig: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
