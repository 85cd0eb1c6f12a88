"""Run configuration: a sectioned ``key = value`` file validated up front.

Example::

    [corridor]
    lower = constant 0
    upper = cosine 0.1 1 0 1.2

    [drift]
    mu = linear 0 -1

    [grid]
    n_steps = 512

    [run]
    seed = 7
    workers = 4
    output = out/

Curves are ``constant c``, ``linear a b``, ``polynomial c0 c1 ...`` or
``cosine amplitude frequency [phase [offset]]``.  Drifts are ``zero``,
``constant c``, ``linear a b`` or ``polynomial c0 c1 ...``.  An ``[sde]``
section (``nu``, ``sigma``, ``range``) replaces ``[drift]``; the corridor
is then mapped through the Lamperti scale map.

Every problem is reported as :class:`~housemove.errors.ConfigError` with a
``[section] key: reason`` message before any sampling starts.
"""

from __future__ import annotations

import configparser
import hashlib
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from .conditioned import RESAMPLING_SCHEMES, EpsilonSchedule
from .corridor import Corridor, Curve
from .drift import DriftModel, ScaleMap, SdeModel, lamperti_curve, lamperti_transform
from .errors import ConfigError, HouseMoveError, ModelError
from .kernels import KernelSettings, TableBuilder
from .verify import VerifyOptions, resolve_suite

logger = logging.getLogger(__name__)

__all__ = ["RunConfig", "parse_curve", "parse_drift", "load_config", "DENSITY_TARGETS"]

DENSITY_TARGETS = ("h", "h_mu", "k", "k_mu", "q_up", "q_down", "p")
SAMPLE_TARGETS = ("house_moving", "meander")
SAMPLERS = ("smc", "rejection")

# Keys that never change a statistic are left out of the hash.
_UNHASHED = {("run", "workers"), ("run", "output")}


# ---------------------------------------------------------------------------
# Value parsers
# ---------------------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ValueError(f"expected numbers, got {text!r}") from exc


def _float(text: str) -> float:
    vals = _floats(text)
    if len(vals) != 1:
        raise ValueError(f"expected one number, got {text!r}")
    return vals[0]


def _int(text: str) -> int:
    try:
        return int(text.strip())
    except ValueError as exc:
        raise ValueError(f"expected an integer, got {text!r}") from exc


def _positive_int(text: str) -> int:
    v = _int(text)
    if v < 1:
        raise ValueError(f"must be >= 1, got {v}")
    return v


def _nonnegative_int(text: str) -> int:
    v = _int(text)
    if v < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return v


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _pair(text: str) -> tuple[float, float]:
    vals = _floats(text)
    if len(vals) != 2:
        raise ValueError(f"expected two numbers, got {text!r}")
    return vals[0], vals[1]


def _times(text: str) -> tuple[float, ...]:
    vals = _floats(text)
    if not vals:
        raise ValueError("expected at least one time")
    return tuple(vals)


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        v = text.strip()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {v!r}")
        return v

    return parse


def _text(text: str) -> str:
    return text.strip()


def parse_curve(text: str, domain: tuple[float, float] = (0.0, 1.0)) -> Curve:
    """``kind p1 p2 ...`` → :class:`Curve` on ``domain``."""

    kind, *rest = text.split() or [""]
    params = _floats(" ".join(rest))
    if kind == "constant" and len(params) == 1:
        curve = Curve.constant(params[0])
    elif kind == "linear" and len(params) == 2:
        curve = Curve.linear(*params)
    elif kind == "polynomial" and params:
        curve = Curve.polynomial(params)
    elif kind == "cosine" and 2 <= len(params) <= 4:
        curve = Curve.cosine(*params)
    else:
        raise ValueError(
            f"cannot read curve {text!r}; use 'constant c', 'linear a b', 'polynomial c0 ...' "
            "or 'cosine amplitude frequency [phase [offset]]'"
        )
    return replace(curve, domain=tuple(domain)) if tuple(domain) != curve.domain else curve


def parse_drift(text: str) -> DriftModel:
    """``kind p1 p2 ...`` → :class:`DriftModel`."""

    kind, *rest = text.split() or [""]
    params = _floats(" ".join(rest))
    if kind == "zero" and not params:
        return DriftModel.zero()
    if kind == "constant" and len(params) == 1:
        return DriftModel.constant(params[0])
    if kind == "linear" and len(params) == 2:
        return DriftModel.linear(*params)
    if kind == "polynomial" and params:
        return DriftModel.polynomial(params)
    raise ValueError(f"cannot read drift {text!r}; use 'zero', 'constant c', 'linear a b' or 'polynomial c0 ...'")


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

SCHEMA: dict[str, dict[str, Callable[[str], Any]]] = {
    "corridor": {"lower": _text, "upper": _text, "domain": _pair},
    "drift": {"mu": _text},
    "sde": {"nu": _floats, "sigma": _floats, "range": _pair},
    "grid": {"n_steps": _positive_int},
    "schedule": {
        "eps0": _float,
        "rho": _float,
        "levels": _positive_int,
        "eta_minus_scale": _float,
        "eta_plus_scale": _float,
    },
    "sampling": {
        "target": _choice(SAMPLE_TARGETS),
        "paths": _positive_int,
        "sampler": _choice(SAMPLERS),
        "crossing_corrected": _bool,
        "resample_threshold": _float,
        "resampling": _choice(RESAMPLING_SCHEMES),
        "max_attempts": _positive_int,
        "probes": _times,
    },
    "density": {
        "target": _choice(DENSITY_TARGETS),
        "t": _float,
        "transition": _floats,
        "paths": _positive_int,
        "nodes": _positive_int,
        "replicates": _positive_int,
        "renormalize": _bool,
    },
    "verify": {
        "suite": _text,
        "paths": _positive_int,
        "times": _times,
        "x": _float,
        "z": _float,
        "split": _float,
        "splits": _pair,
        "paths_per_node": _positive_int,
        "outer_draws": _positive_int,
        "reversal_t": _float,
        "rn_t": _float,
        "rn_probes": _positive_int,
        "m0": _floats,
        "holder_levels": _pair,
        "window": _pair,
        "bessel_end": _float,
        "replicates": _positive_int,
    },
    "run": {"seed": _nonnegative_int, "workers": _positive_int, "output": _text, "cache": _bool},
}


def _read(source: str | Path | Mapping[str, Mapping[str, str]]) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        if isinstance(source, Mapping):
            parser.read_dict(source)
        else:
            path = Path(source)
            if not path.is_file():
                raise ConfigError(f"config file {path} does not exist")
            parser.read_string(path.read_text(), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return parser


def _validate(parser: configparser.ConfigParser) -> dict[str, dict[str, Any]]:
    values: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"[{section}]: unknown section; expected one of {', '.join(SCHEMA)}")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"[{section}] {key}: unknown key; expected one of {', '.join(SCHEMA[section])}")
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc
    if "corridor" not in values or not {"lower", "upper"} <= set(values["corridor"]):
        raise ConfigError("[corridor] lower/upper: both curves are required")
    if "drift" in values and "sde" in values:
        raise ConfigError("[sde]: give either [drift] or [sde], not both")
    if "sde" in values and "sigma" not in values["sde"]:
        raise ConfigError("[sde] sigma: required")
    return values


def _canonical(parser: configparser.ConfigParser) -> str:
    lines = []
    for section in sorted(parser.sections()):
        for key, raw in sorted(parser.items(section)):
            if (section, key) in _UNHASHED:
                continue
            lines.append(f"{section}.{key}={' '.join(raw.split())}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class RunConfig:
    """Validated configuration of one run.

    Build with :meth:`load`; ``seed`` and ``workers`` may be overridden there
    (the CLI flags) and the hash reflects the effective seed.
    """

    corridor: Corridor
    drift: DriftModel
    n_steps: int = 512
    schedule: EpsilonSchedule | None = None
    sampling: dict[str, Any] = field(default_factory=dict)
    density: dict[str, Any] = field(default_factory=dict)
    verify: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output: Path = Path("out")
    cache: bool = True
    sde: SdeModel | None = None
    scale_map: ScaleMap | None = None
    config_hash: str = ""

    # -- construction ----------------------------------------------------------

    @classmethod
    def load(
        cls,
        source: str | Path | Mapping[str, Mapping[str, str]],
        *,
        seed: int | None = None,
        workers: int | None = None,
    ) -> "RunConfig":
        parser = _read(source)
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"[run] seed: must be >= 0, got {seed}")
            if not parser.has_section("run"):
                parser.add_section("run")
            parser.set("run", "seed", str(seed))
        if workers is not None:
            if workers < 1:
                raise ConfigError(f"[run] workers: must be >= 1, got {workers}")
            if not parser.has_section("run"):
                parser.add_section("run")
            parser.set("run", "workers", str(workers))
        values = _validate(parser)
        config_hash = hashlib.sha256(_canonical(parser).encode()).hexdigest()
        return cls._build(values, config_hash)

    @classmethod
    def _build(cls, values: dict[str, dict[str, Any]], config_hash: str) -> "RunConfig":
        cor = values["corridor"]
        domain = cor.get("domain", (0.0, 1.0))
        curves = {}
        for side in ("lower", "upper"):
            try:
                curves[side] = parse_curve(cor[side], domain)
            except (ValueError, HouseMoveError) as exc:
                raise ConfigError(f"[corridor] {side}: {exc}") from exc

        sde = scale = None
        try:
            if "sde" in values:
                raw = values["sde"]
                sde = SdeModel(tuple(raw.get("nu", ())), tuple(raw["sigma"]), raw.get("range", (-5.0, 5.0)))
                drift, scale = lamperti_transform(sde)
                curves = {side: lamperti_curve(scale, g) for side, g in curves.items()}
            else:
                drift = parse_drift(values.get("drift", {}).get("mu", "zero"))
        except ModelError:
            raise
        except (ValueError, HouseMoveError) as exc:
            section = "sde" if "sde" in values else "drift"
            raise ConfigError(f"[{section}] {'sigma' if section == 'sde' else 'mu'}: {exc}") from exc

        try:
            corridor = Corridor(curves["lower"], curves["upper"], tuple(domain))
        except HouseMoveError as exc:
            raise ConfigError(f"[corridor] upper: {exc}") from exc

        schedule = None
        sched = values.get("schedule", {})
        if sched:
            try:
                eps0 = sched.get("eps0", 0.2 * corridor.min_width)
                schedule = EpsilonSchedule(eps0, **{k: v for k, v in sched.items() if k != "eps0"})
            except HouseMoveError as exc:
                raise ConfigError(f"[schedule] {next(iter(sched))}: {exc}") from exc

        run = values.get("run", {})
        cfg = cls(
            corridor=corridor,
            drift=drift,
            n_steps=values.get("grid", {}).get("n_steps", 512),
            schedule=schedule,
            sampling=values.get("sampling", {}),
            density=values.get("density", {}),
            verify=values.get("verify", {}),
            seed=run.get("seed", 0),
            workers=run.get("workers", 1),
            output=Path(run.get("output", "out")),
            cache=run.get("cache", True),
            sde=sde,
            scale_map=scale,
            config_hash=config_hash,
        )
        cfg._check()
        return cfg

    def _check(self) -> None:
        s = self.sampling
        if "resample_threshold" in s and not 0.0 < s["resample_threshold"] <= 1.0:
            raise ConfigError(f"[sampling] resample_threshold: must lie in (0, 1], got {s['resample_threshold']}")
        for section, key in (("sampling", "probes"), ("verify", "times")):
            for t in getattr(self, section).get(key, ()):
                if not self.corridor.t_start < t < self.corridor.t_end:
                    raise ConfigError(f"[{section}] {key}: time {t:g} outside the open corridor domain")
        if "t" in self.density and not self.corridor.t_start < self.density["t"] < self.corridor.t_end:
            raise ConfigError(f"[density] t: {self.density['t']:g} outside the open corridor domain")
        trans = self.density.get("transition")
        if trans is not None and len(trans) != 3:
            raise ConfigError("[density] transition: expected 't1 y1 t2'")
        if "replicates" in self.density and self.density["replicates"] < 2:
            raise ConfigError("[density] replicates: must be >= 2")
        if "replicates" in self.verify and self.verify["replicates"] < 2:
            raise ConfigError("[verify] replicates: must be >= 2")
        if "suite" in self.verify:
            resolve_suite(self.verify["suite"])
        if self.n_steps % 2:
            raise ConfigError(f"[grid] n_steps: must be even, got {self.n_steps}")

    # -- derived settings ------------------------------------------------------

    @property
    def effective_schedule(self) -> EpsilonSchedule:
        return self.schedule or EpsilonSchedule.default_for(self.corridor)

    def kernel_settings(self) -> KernelSettings:
        s, d = self.sampling, self.density
        return KernelSettings(
            n_steps=self.n_steps,
            paths=d.get("paths", 2000),
            nodes=d.get("nodes", 64),
            sampler=s.get("sampler", "smc"),
            crossing_corrected=s.get("crossing_corrected", True),
            resample_threshold=s.get("resample_threshold", 0.5),
            resampling=s.get("resampling", "multinomial"),
            replicates=d.get("replicates", 4),
            workers=self.workers,
        )

    def verify_options(self) -> VerifyOptions:
        v = dict(self.verify)
        v.pop("suite", None)
        if "times" in v:
            if len(v["times"]) != 3:
                raise ConfigError("[verify] times: expected 's t u'")
            v["times"] = tuple(v["times"])
        if "m0" in v:
            v["m0"] = tuple(int(m) for m in v["m0"])
        if "holder_levels" in v:
            v["holder_levels"] = tuple(int(n) for n in v["holder_levels"])
        return VerifyOptions(**v)

    @property
    def suite(self) -> list[str]:
        return resolve_suite(self.verify.get("suite", "all"))

    def builder(self) -> TableBuilder:
        """The shared table builder, backed by ``<output>/tables`` when caching."""
        cache_root = self.output / "tables" if self.cache else None
        return TableBuilder(
            self.corridor,
            self.drift,
            self.kernel_settings(),
            self.effective_schedule,
            self.seed,
            cache_root=cache_root,
            config_hash=self.config_hash if self.cache else None,
        )

    def describe(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "lower": self.corridor.lower.describe(),
            "upper": self.corridor.upper.describe(),
            "domain": list(self.corridor.domain),
            "drift": self.drift.describe(),
            "n_steps": self.n_steps,
        }


def load_config(path: str | Path, *, seed: int | None = None, workers: int | None = None) -> RunConfig:
    cfg = RunConfig.load(path, seed=seed, workers=workers)
    logger.info("config %s loaded (hash %s, seed %d)", path, cfg.config_hash[:12], cfg.seed)
    return cfg
