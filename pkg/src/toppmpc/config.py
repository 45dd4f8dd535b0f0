"""Run configuration: flat ``key = value`` text with ``#`` comments.

Every key has a default equal to the nominal experiment, so an empty file is
a complete configuration. The run manifest written next to each output is in
the same format and can be fed back with ``--config`` to reproduce a run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .integrator import StepConfig
from .model import NOMINAL_STATE, PARAM_FIELDS, STATE_FIELDS, ModelParams, State
from .montecarlo import CampaignConfig
from .mpc import MpcConfig

MODES = ("openloop", "feedforward", "mpc", "dosemin", "montecarlo", "dosemap")

STATE_KEYS = {f"{n}0": n for n in STATE_FIELDS}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _phi(v):
    return 0 <= v < 1


def _int_ge1(v):
    return v >= 1 and int(v) == v


# key -> (kind, check, description of check)
_SCALARS = {
    "T": ("float", _positive, "> 0"),
    "N": ("int", _int_ge1, "an integer >= 1"),
    "lambda": ("float", _nonneg, ">= 0"),
    "u_eq_max": ("float", _nonneg, ">= 0"),
    "horizon": ("float", _positive, "> 0"),
    "grid_points": ("int", lambda v: v >= 2, ">= 2"),
    "refine_tol": ("float", _positive, "> 0"),
    "h": ("float", _positive, "> 0"),
    "sample_dt": ("float", _positive, "> 0"),
    "u_bar": ("float", _positive, "> 0"),
    "ueq": ("float", _nonneg, ">= 0"),
    "resolution": ("float", _positive, "> 0"),
    "threshold": ("float", _positive, "> 0"),
    "runs": ("int", _int_ge1, "an integer >= 1"),
    "phi": ("float", _phi, "in [0, 1)"),
    "seed": ("int", _nonneg, ">= 0"),
    "workers": ("int", _int_ge1, "an integer >= 1"),
}
for _n in PARAM_FIELDS:
    _SCALARS[_n] = ("float", _nonneg, ">= 0")
for _k in STATE_KEYS:
    _SCALARS[_k] = ("float", _nonneg, ">= 0")

_LISTS = {"perturb_params": PARAM_FIELDS, "perturb_state": STATE_FIELDS}
_STRINGS = ("mode", "out")
KNOWN_KEYS = set(_SCALARS) | set(_LISTS) | set(_STRINGS)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "mpc"
    params: ModelParams = field(default_factory=ModelParams)
    x0: State = NOMINAL_STATE
    mpc: MpcConfig = field(default_factory=MpcConfig)
    campaign: CampaignConfig = field(default_factory=CampaignConfig)
    u_bar: float = 60.0
    ueq: float | None = None
    resolution: float = 0.1
    threshold: float = 300.0
    out: str = "runs"

    def to_text(self, comments: dict[str, str] | None = None) -> str:
        """Serialise every key; floats use ``repr`` so values round-trip exactly."""
        lines = [f"# toppmpc {__version__} run manifest"]
        for k, v in (comments or {}).items():
            lines.append(f"# {k}: {v}")
        kv = self.as_items()
        lines += [f"{k} = {v}" for k, v in kv]
        return "\n".join(lines) + "\n"

    def as_items(self) -> list[tuple[str, str]]:
        m, c = self.mpc, self.campaign
        items = [("mode", self.mode), ("out", self.out)]
        items += [(n, repr(getattr(self.params, n))) for n in PARAM_FIELDS]
        items += [(k, repr(getattr(self.x0, n))) for k, n in STATE_KEYS.items()]
        items += [("T", repr(m.T)), ("N", str(m.N)), ("lambda", repr(m.lam)),
                  ("u_eq_max", repr(m.u_eq_max)), ("horizon", repr(m.horizon)),
                  ("grid_points", str(m.grid_points)), ("refine_tol", repr(m.refine_tol)),
                  ("h", repr(m.step.h)), ("sample_dt", repr(m.step.sample_dt)),
                  ("u_bar", repr(self.u_bar)), ("resolution", repr(self.resolution)),
                  ("threshold", repr(self.threshold)),
                  ("runs", str(c.n_runs)), ("phi", repr(c.phi)), ("seed", str(c.seed)),
                  ("workers", str(c.workers)),
                  ("perturb_params", ",".join(c.perturb_params) or "none"),
                  ("perturb_state", ",".join(c.perturb_state) or "none")]
        if self.ueq is not None:
            items.append(("ueq", repr(self.ueq)))
        return items


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line, f"{source}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _coerce(key: str, raw: str):
    if key not in KNOWN_KEYS:
        raise ConfigError(key, "unknown key")
    if key in _STRINGS:
        if key == "mode" and raw not in MODES:
            raise ConfigError(key, f"must be one of {', '.join(MODES)}")
        return raw
    if key in _LISTS:
        allowed = _LISTS[key]
        if raw in ("all", "*"):
            return tuple(allowed)
        if raw in ("none", ""):
            return ()
        names = tuple(s.strip() for s in raw.split(",") if s.strip())
        bad = [n for n in names if n not in allowed]
        if bad:
            raise ConfigError(key, f"unknown names {bad}")
        return tuple(n for n in allowed if n in names)
    kind, check, desc = _SCALARS[key]
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(key, f"not a number: {raw!r}") from None
    if not math.isfinite(v):
        raise ConfigError(key, f"not finite: {raw!r}")
    if kind == "int":
        if int(v) != v:
            raise ConfigError(key, f"must be an integer, got {raw!r}")
        v = int(v)
    if not check(v):
        raise ConfigError(key, f"must be {desc}, got {raw!r}")
    return v


def build(values: dict[str, str]) -> RunConfig:
    """Apply ``values`` (raw strings) on top of the nominal defaults."""
    vals = {k: _coerce(k, v) for k, v in values.items()}
    base = RunConfig()

    p_over = {n: vals[n] for n in PARAM_FIELDS if n in vals}
    try:
        params = base.params.replace(**p_over)
    except ValueError as exc:
        key = next((n for n in p_over if n in str(exc)), next(iter(p_over), "params"))
        raise ConfigError(key, str(exc)) from None
    x0 = base.x0.replace(**{n: vals[k] for k, n in STATE_KEYS.items() if k in vals})

    step = StepConfig(h=vals.get("h", base.mpc.step.h),
                      sample_dt=vals.get("sample_dt", base.mpc.step.sample_dt))
    mpc = MpcConfig(T=vals.get("T", base.mpc.T), N=vals.get("N", base.mpc.N),
                    lam=vals.get("lambda", base.mpc.lam),
                    u_eq_max=vals.get("u_eq_max", base.mpc.u_eq_max),
                    horizon=vals.get("horizon", base.mpc.horizon),
                    grid_points=vals.get("grid_points", base.mpc.grid_points),
                    refine_tol=vals.get("refine_tol", base.mpc.refine_tol), step=step)
    u_bar = vals.get("u_bar", base.u_bar)
    threshold = vals.get("threshold", base.threshold)
    bc = base.campaign
    campaign = CampaignConfig(n_runs=vals.get("runs", bc.n_runs), phi=vals.get("phi", bc.phi),
                              seed=vals.get("seed", bc.seed),
                              perturb_params=vals.get("perturb_params", bc.perturb_params),
                              perturb_state=vals.get("perturb_state", bc.perturb_state),
                              mpc=mpc, threshold_G=threshold, u_bar=u_bar,
                              workers=vals.get("workers", bc.workers))
    cfg = RunConfig(mode=vals.get("mode", base.mode), params=params, x0=x0, mpc=mpc,
                    campaign=campaign, u_bar=u_bar, ueq=vals.get("ueq"),
                    resolution=vals.get("resolution", base.resolution),
                    threshold=threshold, out=vals.get("out", base.out))
    return validate(cfg)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.mode in ("feedforward", "dosemap") and cfg.ueq is None:
        raise ConfigError("ueq", f"required for mode {cfg.mode}")
    if cfg.mode == "feedforward" and cfg.ueq > cfg.mpc.u_eq_max:
        raise ConfigError("ueq", f"exceeds u_eq_max = {cfg.mpc.u_eq_max}")
    return cfg


def parse_config(path: str | Path | None = None, overrides=()) -> RunConfig:
    """Defaults, then the file at ``path``, then ``key=value`` overrides."""
    values: dict[str, str] = {}
    if path is not None:
        values.update(parse_text(Path(path).read_text(), str(path)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        values[k] = v
    return build(values)


def with_mode(cfg: RunConfig, mode: str, **changes) -> RunConfig:
    return validate(replace(cfg, mode=mode, **changes))
