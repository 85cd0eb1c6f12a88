from __future__ import annotations

"""File-system layer: CSV outputs with metadata headers and the table cache.

Every CSV written here starts with one ``#`` comment line carrying the config
hash and the seed, so any output can be traced back to the run that made it::

    # config_hash=3f2a... seed=7
    path_id,t,value,log_weight
    0,0,0,0
    ...

Readers skip comment lines (``pd.read_csv(comment="#")``).

Estimated tables are cached as Parquet under
``{root}/config=<hash>/part-NNN.parquet``; repeated builds for the same config
append new parts, and :func:`load_tables` returns every row of a config as one
frame (empty, with the canonical columns, when nothing has been cached).
"""

import json
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .conditioned import WeightedEnsemble
from .reweighting import DensityEstimate

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

__all__ = [
    "TABLE_ROOT",
    "TABLE_COLUMNS",
    "header_line",
    "write_csv",
    "read_csv",
    "read_header",
    "ensemble_frame",
    "write_paths",
    "write_weights",
    "write_diagnostics",
    "write_density",
    "write_report",
    "write_table_part",
    "load_tables",
]

# Relative to the run's output directory unless callers pass their own root.
TABLE_ROOT = Path("tables")
TABLE_COLUMNS = ["name", "t", "y", "value", "std_err"]
FLOAT_FORMAT = "%.17g"


def header_line(config_hash: str, seed: int, **extra: Any) -> str:
    parts = [f"config_hash={config_hash}", f"seed={seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts) + "\n"


def write_csv(
    frame: pd.DataFrame,
    path: str | Path,
    *,
    config_hash: str,
    seed: int,
    **extra: Any,
) -> Path:
    """Write *frame* under a ``#`` metadata line; floats round-trip exactly."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(header_line(config_hash, seed, **extra))
        frame.to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_header(path: str | Path) -> dict[str, str]:
    """Key/value pairs of the leading ``#`` line (empty when absent)."""

    with Path(path).open() as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    pairs = (tok.split("=", 1) for tok in first[1:].split() if "=" in tok)
    return {k: v for k, v in pairs}


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


def ensemble_frame(ensemble: WeightedEnsemble) -> pd.DataFrame:
    """Long format ``path_id,t,value,log_weight`` (one row per path node)."""

    n_paths, n_nodes = ensemble.values.shape
    return pd.DataFrame(
        {
            "path_id": np.repeat(ensemble.path_ids, n_nodes),
            "t": np.tile(ensemble.grid.times, n_paths),
            "value": ensemble.values.ravel(),
            "log_weight": np.repeat(ensemble.log_weights, n_nodes),
        }
    )


def write_paths(ensemble: WeightedEnsemble, out_dir: str | Path, *, config_hash: str, seed: int) -> Path:
    return write_csv(ensemble_frame(ensemble), Path(out_dir) / "paths.csv", config_hash=config_hash, seed=seed)


def write_weights(ensemble: WeightedEnsemble, out_dir: str | Path, *, config_hash: str, seed: int) -> Path:
    frame = pd.DataFrame(
        {
            "path_id": ensemble.path_ids,
            "log_weight": ensemble.log_weights,
            "weight": ensemble.weights,
        }
    )
    return write_csv(frame, Path(out_dir) / "weights.csv", config_hash=config_hash, seed=seed, ess=f"{ensemble.ess:.6g}")


def _plain(value: Any) -> Any:
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_diagnostics(
    summary: Mapping[str, Any],
    path: str | Path,
    *,
    config_hash: str,
    seed: int,
) -> Path:
    """Structured text: one ``key: value`` line per entry, nested values as JSON."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [header_line(config_hash, seed).rstrip("\n")]
    for key, value in summary.items():
        value = _plain(value)
        text = json.dumps(value, sort_keys=True) if isinstance(value, (dict, list)) else str(value)
        lines.append(f"{key}: {text}")
    path.write_text("\n".join(lines) + "\n")
    return path


# ---------------------------------------------------------------------------
# Densities and reports
# ---------------------------------------------------------------------------


def write_density(
    estimate: DensityEstimate,
    out_dir: str | Path,
    target: str,
    *,
    config_hash: str,
    seed: int,
    meta: Mapping[str, Any] | None = None,
) -> Path:
    """``density_<target>.csv`` (``y,value,std_err``) plus a JSON sidecar."""

    out_dir = Path(out_dir)
    frame = pd.DataFrame({"y": estimate.y, "value": estimate.values, "std_err": estimate.std_err})
    csv_path = write_csv(frame, out_dir / f"density_{target}.csv", config_hash=config_hash, seed=seed)
    sidecar = {
        "target": target,
        "config_hash": config_hash,
        "seed": seed,
        "mass": estimate.mass,
        "mass_std_err": estimate.mass_se,
        **_plain(dict(estimate.meta)),
        **_plain(dict(meta or {})),
    }
    csv_path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return csv_path


def write_report(rows: Sequence[Mapping[str, Any]], out_dir: str | Path, *, config_hash: str, seed: int) -> Path:
    frame = pd.DataFrame([_plain(dict(r)) for r in rows])
    return write_csv(frame, Path(out_dir) / "report.csv", config_hash=config_hash, seed=seed)


# ---------------------------------------------------------------------------
# Table cache
# ---------------------------------------------------------------------------


def write_table_part(
    rows: Iterable[Mapping[str, Any]] | pd.DataFrame,
    *,
    config_hash: str,
    root: str | Path = TABLE_ROOT,
) -> Path:
    """Append one part file to the config's partition.

    Parts are numbered ``part-NNN.parquet`` with a monotonically increasing
    index so repeated builds append cleanly.
    """

    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    if frame.empty:
        raise ValueError("no table rows to write")
    missing = set(TABLE_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"table rows lack columns {sorted(missing)}")

    partition_dir = Path(root) / f"config={config_hash}"
    partition_dir.mkdir(parents=True, exist_ok=True)

    existing_parts = sorted(partition_dir.glob("part-*"))
    next_idx = max((int(p.stem.split("-")[-1]) for p in existing_parts), default=-1) + 1
    out_path = partition_dir / f"part-{next_idx:03d}.parquet"

    frame = frame[TABLE_COLUMNS].astype({"name": str, "t": float, "y": float, "value": float, "std_err": float})
    try:
        frame.to_parquet(out_path, index=False)
    except Exception as exc:  # pragma: no cover - fallback rarely exercised.
        logger.warning("parquet write failed (%s); falling back to JSON", exc)
        out_path = out_path.with_suffix(".json")
        out_path.write_text(json.dumps(frame.to_dict(orient="records")))
    return out_path


def load_tables(config_hash: str, *, root: str | Path = TABLE_ROOT) -> pd.DataFrame:
    """All cached rows for *config_hash*; earliest part wins on duplicates."""

    partition_dir = Path(root) / f"config={config_hash}"
    if not partition_dir.exists():
        return pd.DataFrame(columns=TABLE_COLUMNS)

    files = sorted(partition_dir.glob("part-*"))
    frames = []
    for fp in files:
        try:
            if fp.suffix == ".json":
                df = pd.DataFrame(json.loads(fp.read_text()))
            else:
                df = pd.read_parquet(fp)
        except Exception as exc:
            # Skip unreadable parts rather than failing the whole load.
            logger.warning("could not read %s: %s", fp, exc)
            continue
        frames.append(df)

    if not frames:
        return pd.DataFrame(columns=TABLE_COLUMNS)

    consolidated = pd.concat(frames, ignore_index=True)
    # y is NaN for scalar entries; dedupe on a filled copy of the key.
    key = consolidated[["name", "t"]].assign(y=consolidated["y"].fillna(-np.inf))
    return consolidated.loc[~key.duplicated(keep="first")].reset_index(drop=True)
