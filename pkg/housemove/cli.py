"""Command-line entry point.

Usage::

    python -m housemove sample    --config run.ini [--seed N] [--workers N]
    python -m housemove density   --config run.ini --target h_mu --t 0.5
    python -m housemove density   --config run.ini --target p --transition 0.25 0.4 0.5
    python -m housemove verify    --config run.ini --suite chapman_kolmogorov,reversal
    python -m housemove transform --config sde.ini
    python -m housemove report    out/

Exit codes: 0 success; 2 invalid config or SDE model; 3 any other library
error or a failing asserted verification test; 4 anything unexpected.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from . import storage
from .conditioned import BoundaryCase, sample_boundary_case
from .config import DENSITY_TARGETS, RunConfig, load_config
from .errors import ConfigError, HouseMoveError, ModelError
from .reweighting import DensityEstimate, KernelTable
from .samplers import RngStream
from .verify import run_suite, resolve_suite

logger = logging.getLogger("housemove")

__all__ = ["main", "build_parser", "cmd_sample", "cmd_density", "cmd_verify", "cmd_transform", "cmd_report"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3
EXIT_INTERNAL = 4


# ---------------------------------------------------------------------------
# Logging
# ---------------------------------------------------------------------------


class _LevelFormatter(logging.Formatter):
    """``[info] message`` / ``[warn] message`` lines."""

    _names = {"WARNING": "warn"}

    def format(self, record: logging.LogRecord) -> str:
        record = logging.makeLogRecord(record.__dict__)
        record.levelname = self._names.get(record.levelname, record.levelname.lower())
        return super().format(record)


def _setup_logging(verbose: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_LevelFormatter("[%(levelname)s] %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    logging.captureWarnings(True)
    return handler


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_sample(cfg: RunConfig) -> int:
    """``paths.csv``, ``weights.csv`` and ``diagnostics.txt`` for the configured case."""

    s = cfg.sampling
    settings = cfg.kernel_settings()
    target = s.get("target", "house_moving")
    k = cfg.corridor
    grid = settings.grid(k)
    case = BoundaryCase.house_moving() if target == "house_moving" else BoundaryCase.meander()
    kwargs = {"max_attempts": s["max_attempts"]} if "max_attempts" in s else {}
    if "probes" in s:
        kwargs["probes"] = s["probes"]
    series = sample_boundary_case(
        RngStream(cfg.seed, 0),
        grid,
        k,
        case,
        cfg.effective_schedule,
        settings.sampler,
        paths=s.get("paths", 10_000),
        drift=None if cfg.drift.is_zero else cfg.drift,
        symmetric=target == "house_moving",
        crossing_corrected=settings.crossing_corrected,
        resample_threshold=settings.resample_threshold,
        resampling=settings.resampling,
        workers=cfg.workers,
        **kwargs,
    )
    ens = series.ensemble
    out = cfg.output
    storage.write_paths(ens, out, config_hash=cfg.config_hash, seed=cfg.seed)
    storage.write_weights(ens, out, config_hash=cfg.config_hash, seed=cfg.seed)
    storage.write_diagnostics(
        {**cfg.describe(), **series.summary()}, out / "diagnostics.txt", config_hash=cfg.config_hash, seed=cfg.seed
    )
    print(f"[info] {ens.count} {target} paths (ess {ens.ess:.1f}) written to {out}")
    return EXIT_OK


def _as_density(table: KernelTable) -> DensityEstimate:
    mass = table.meta.get("mass", float(trapezoid(table.values, table.y)))
    return DensityEstimate(table.name, table.y, table.values, table.std_err, mass, table.meta.get("mass_se", 0.0), dict(table.meta))


def cmd_density(cfg: RunConfig, target: str | None = None, t: float | None = None, transition=None) -> int:
    """``density_<target>.csv`` for a marginal (``t``) or transition (``t1 y1 t2``) target."""

    d = cfg.density
    target = target or d.get("target", "h_mu")
    if target not in DENSITY_TARGETS:
        raise ConfigError(f"[density] target: expected one of {', '.join(DENSITY_TARGETS)}, got {target!r}")
    transition = transition if transition is not None else d.get("transition")
    builder = cfg.builder()
    meta: dict[str, object] = {}
    if transition is not None:
        t1, y1, t2 = (float(v) for v in transition)
        meta.update(t1=t1, y1=y1, t2=t2)
        estimate = {
            "h": lambda: builder.h_transition(t1, y1, t2),
            "h_mu": lambda: builder.h_mu_transition(t1, y1, t2),
            "k": lambda: builder.k_transition(t1, y1, t2),
            "k_mu": lambda: builder.k_mu_transition(t1, y1, t2),
            "p": lambda: _as_density(builder.p(t1, y1, t2)),
        }.get(target)
        if estimate is None:
            raise ConfigError(f"[density] transition: target {target!r} has no transition form")
    else:
        if target == "p":
            raise ConfigError("[density] transition: target 'p' needs 't1 y1 t2'")
        t = t if t is not None else d.get("t", 0.5)
        t = builder.grid.snap(t)
        meta["t"] = t
        estimate = {
            "h": lambda: builder.h(t),
            "h_mu": lambda: builder.h_mu(t),
            "k": lambda: builder.k_density(t),
            "k_mu": lambda: builder.k_mu(t),
            "q_up": lambda: _as_density(builder.q_up(t)),
            "q_down": lambda: _as_density(builder.q_down(t)),
        }[target]
    est = estimate()
    if d.get("renormalize", False) and target not in ("q_up", "q_down", "p"):
        est = est.renormalized()
    path = storage.write_density(est, cfg.output, target, config_hash=cfg.config_hash, seed=cfg.seed, meta=meta)
    print(f"[info] {target}: mass {est.mass:.4f} ± {est.mass_se:.4f} on {est.y.size} nodes -> {path}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, suite: str | None = None) -> int:
    """Run the suite, write ``report.csv`` and print one line per test."""

    names = resolve_suite(suite) if suite else cfg.suite
    reports = run_suite(cfg.builder(), names, cfg.verify_options())
    path = storage.write_report([r.row() for r in reports], cfg.output, config_hash=cfg.config_hash, seed=cfg.seed)
    for r in reports:
        print(r.text())
    failed = [r.name for r in reports if r.failed]
    if failed:
        print(f"[warn] failed: {', '.join(failed)} (report: {path})")
        return EXIT_FAILURE
    print(f"[info] {len(reports)} checks, none failed (report: {path})")
    return EXIT_OK


def cmd_transform(cfg: RunConfig, nodes: int = 201) -> int:
    """Print the unit-diffusion drift and write ``lamperti.csv`` (``y,L,mu``)."""

    if cfg.sde is None or cfg.scale_map is None:
        raise ConfigError("[sde]: the transform command needs an [sde] section")
    scale = cfg.scale_map
    lo, hi = cfg.sde.u_range
    y = np.linspace(lo, hi, nodes)
    ly = np.asarray(scale.L(y), dtype=float)
    frame = pd.DataFrame({"y": y, "L": ly, "mu": np.asarray(cfg.drift.mu(ly), dtype=float)})
    round_trip = float(np.max(np.abs(np.asarray(scale.L_inv(ly)) - y)))
    path = storage.write_csv(
        frame, cfg.output / "lamperti.csv", config_hash=cfg.config_hash, seed=cfg.seed, round_trip=f"{round_trip:.3g}"
    )
    print(f"[info] sde {cfg.sde.describe()}")
    print(f"[info] drift {cfg.drift.describe()}")
    print(f"[info] L(g-) {cfg.corridor.lower.describe()}")
    print(f"[info] L(g+) {cfg.corridor.upper.describe()}")
    print(f"[info] max |L^-1(L(y)) - y| = {round_trip:.3g}; table -> {path}")
    return EXIT_OK


def cmd_report(directory: str | Path) -> int:
    """Summarise ``report.csv`` (and ``diagnostics.txt`` when present) of an output directory."""

    directory = Path(directory)
    report = directory / "report.csv"
    if not report.is_file():
        raise ConfigError(f"[run] output: no report.csv in {directory}")
    header = storage.read_header(report)
    frame = storage.read_csv(report)
    print(f"[info] config_hash={header.get('config_hash', '?')} seed={header.get('seed', '?')}")
    cols = [c for c in ("test", "verdict", "asserted", "runtime_s") if c in frame.columns]
    print(frame[cols].to_string(index=False))
    diag = directory / "diagnostics.txt"
    if diag.is_file():
        print(diag.read_text().rstrip())
    failed = frame[(frame["verdict"] == "fail") & frame["asserted"].astype(bool)]
    return EXIT_FAILURE if len(failed) else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="housemove", description="Diffusion house-moving: sampling, densities, verification.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--config", required=True, type=Path, help="INI run configuration")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--workers", type=int, help="override [run] workers")
        return p

    with_config(sub.add_parser("sample", help="sample the conditioned process"))
    dens = with_config(sub.add_parser("density", help="estimate a density or kernel"))
    dens.add_argument("--target", choices=DENSITY_TARGETS)
    dens.add_argument("--t", type=float, help="marginal time")
    dens.add_argument("--transition", type=float, nargs=3, metavar=("T1", "Y1", "T2"))
    ver = with_config(sub.add_parser("verify", help="run verification checks"))
    ver.add_argument("--suite", help="'all' or a comma-separated list of checks")
    with_config(sub.add_parser("transform", help="Lamperti transform of an [sde] section"))
    rep = sub.add_parser("report", help="summarise an output directory")
    rep.add_argument("directory", type=Path)
    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "report":
        return cmd_report(args.directory)
    cfg = load_config(args.config, seed=args.seed, workers=args.workers)
    if args.command == "sample":
        return cmd_sample(cfg)
    if args.command == "density":
        return cmd_density(cfg, args.target, args.t, args.transition)
    if args.command == "verify":
        return cmd_verify(cfg, args.suite)
    return cmd_transform(cfg)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = _setup_logging(args.verbose)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return _dispatch(args)
    except (ConfigError, ModelError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except HouseMoveError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE
    except Exception as exc:  # infrastructure failure
        logger.exception("unexpected failure: %s", exc)
        return EXIT_INTERNAL
    finally:
        logging.getLogger().removeHandler(handler)
        logging.captureWarnings(False)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
