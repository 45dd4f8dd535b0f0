"""Exercise-augmented Topp model of long-term type-2 diabetes progression.

State vector ``(G, I, beta, S_I, Vl)``:

======  =================================  ==================
G       plasma glucose                     mg/dl
I       serum insulin                      uU/ml
beta    beta-cell mass                     mg
S_I     insulin sensitivity                ml/uU/d
Vl      integral effect of exercise IL-6   (pg/ml) min
======  =================================  ==================

The simulation clock is days. The IL-6 parameters (``SR``, ``K_IL6``,
``k_s``) are per minute, so the ``Vl`` right-hand side is scaled by
``MINUTES_PER_DAY``; its fixed point ``SR*u/(K_IL6*k_s)`` does not depend on
that scaling.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

import numpy as np

MINUTES_PER_DAY = 1440.0

STATE_FIELDS = ("G", "I", "beta", "S_I", "Vl")

# Canonical parameter order; also the draw order of the Monte Carlo perturbations.
PARAM_FIELDS = (
    "R0", "Eg0", "sigma", "alpha", "k", "d0", "c",
    "r1r", "r2r", "r1a", "r2a",
    "zeta_p", "k_p", "zeta_a", "k_a",
    "S_I_target", "zeta_si", "k_n_si",
    "SR", "K_IL6", "k_s",
)

# Denominators or rate constants that must never vanish.
_STRICTLY_POSITIVE = ("k_p", "k_a", "k_n_si", "K_IL6", "k_s", "k")


class DomainError(ValueError):
    """Input outside the domain where the model is defined."""


@dataclass(frozen=True)
class State:
    G: float
    I: float
    beta: float
    S_I: float
    Vl: float

    def __post_init__(self):
        for name in STATE_FIELDS:
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"state component {name} is not finite: {v!r}")
            if v < 0.0:
                raise DomainError(f"state component {name} is negative: {v!r}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_array(cls, x) -> "State":
        x = np.asarray(x, dtype=float)
        if x.shape != (5,):
            raise ValueError(f"expected a 5-vector, got shape {x.shape}")
        return cls(*(float(v) for v in x))

    def as_array(self) -> np.ndarray:
        return np.array([self.G, self.I, self.beta, self.S_I, self.Vl], dtype=float)

    def replace(self, **changes) -> "State":
        return dataclasses.replace(self, **changes)


NOMINAL_STATE = State(G=100.0, I=10.0, beta=300.0, S_I=0.72, Vl=0.0)


@dataclass(frozen=True)
class ModelParams:
    """Model constants at their nominal values.

    ``r2r`` and ``r2a`` multiply ``G**2`` and therefore carry dl^2/mg^2/d;
    the numbers are used as tabulated.
    """

    R0: float = 864.0
    Eg0: float = 1.44
    sigma: float = 43.2
    alpha: float = 20000.0
    k: float = 432.0
    d0: float = 0.06
    c: float = 0.05
    r1r: float = 0.42e-3
    r2r: float = 0.12e-5
    r1a: float = 0.42e-3
    r2a: float = 0.12e-5
    zeta_p: float = 1e-4
    k_p: float = 1e6
    zeta_a: float = 1e-3
    k_a: float = 1e6
    S_I_target: float = 0.028
    zeta_si: float = 1.4
    k_n_si: float = 5e6
    SR: float = 0.045
    K_IL6: float = 0.004
    k_s: float = field(default=-math.log(0.8) / 80640.0)

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v) or v < 0.0:
                raise DomainError(f"parameter {f.name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, f.name, v)
        for name in _STRICTLY_POSITIVE:
            if getattr(self, name) <= 0.0:
                raise DomainError(f"parameter {name} must be > 0")
        if self.zeta_a >= 1.0:
            raise DomainError("zeta_a must be < 1")

    def as_array(self) -> np.ndarray:
        """Parameters in canonical order, as consumed by the integration kernels."""
        return np.array([getattr(self, n) for n in PARAM_FIELDS], dtype=float)

    @classmethod
    def from_array(cls, values) -> "ModelParams":
        values = list(values)
        if len(values) != len(PARAM_FIELDS):
            raise ValueError(f"expected {len(PARAM_FIELDS)} parameters, got {len(values)}")
        return cls(**dict(zip(PARAM_FIELDS, values)))

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return {n: getattr(self, n) for n in PARAM_FIELDS}


@dataclass(frozen=True)
class ExerciseProgram:
    """Periodic training: intensity ``u_bar`` (percent), session length
    ``delta`` and period ``T`` (both minutes)."""

    u_bar: float
    delta: float
    T: float

    def __post_init__(self):
        if not self.u_bar > 0.0:
            raise DomainError("u_bar must be > 0")
        if not self.T > 0.0:
            raise DomainError("training period T must be > 0")
        if not 0.0 <= self.delta <= self.T:
            raise DomainError(f"session duration must lie in [0, T], got {self.delta}")


def _check_vl(Vl: float) -> None:
    if Vl < 0.0:
        raise DomainError(f"Vl must be >= 0, got {Vl}")


def psi1(Vl: float, params: ModelParams) -> float:
    """Proliferation gain from accumulated IL-6; in ``[1, 1 + zeta_p)``."""
    _check_vl(Vl)
    V2 = Vl * Vl
    return 1.0 + params.zeta_p * V2 / (params.k_p * params.k_p + V2)


def psi2(Vl: float, params: ModelParams) -> float:
    """Apoptosis attenuation from accumulated IL-6; in ``(1 - zeta_a, 1]``."""
    _check_vl(Vl)
    V2 = Vl * Vl
    return 1.0 - params.zeta_a * V2 / (params.k_a * params.k_a + V2)


def proliferation(G: float, params: ModelParams) -> float:
    return params.r1r * G - params.r2r * G * G


def apoptosis(G: float, params: ModelParams) -> float:
    return params.d0 - params.r1a * G + params.r2a * G * G


def derivative(x, u_eq: float, params: ModelParams) -> np.ndarray:
    """Right-hand side of the model in per-day units.

    ``x`` may be a :class:`State` or any 5-vector. Returns
    ``(dG, dI, dbeta, dS_I, dVl)``.
    """
    if isinstance(x, State):
        G, I, beta, S_I, Vl = x.G, x.I, x.beta, x.S_I, x.Vl
    else:
        G, I, beta, S_I, Vl = (float(v) for v in x)
        if not all(math.isfinite(v) for v in (G, I, beta, S_I, Vl)):
            raise DomainError("non-finite state")
    if not math.isfinite(u_eq) or u_eq < 0.0:
        raise DomainError(f"u_eq must be finite and >= 0, got {u_eq}")
    p = params
    G2 = G * G
    dG = p.R0 - (p.Eg0 + S_I * I) * G
    dI = beta * p.sigma * G2 / (p.alpha + G2) - p.k * I
    net = proliferation(G, p) * psi1(Vl, p) - apoptosis(G, p) * psi2(Vl, p)
    dbeta = net * beta
    dS = -p.c * (S_I - p.S_I_target) * (1.0 - p.zeta_si * Vl / (p.k_n_si + Vl))
    dV = MINUTES_PER_DAY * (p.SR / p.K_IL6 * u_eq - p.k_s * Vl)
    return np.array([dG, dI, dbeta, dS, dV])


def beta_growth_roots(params: ModelParams) -> tuple[float, ...]:
    """Glucose levels where proliferation balances apoptosis with no exercise.

    Solves ``d0 - (r1r + r1a) G + (r2r + r2a) G^2 = 0``. Roots at ``G = 0``
    are excluded, so ``d0 = 0`` yields a single root.
    """
    a = params.r2r + params.r2a
    b = -(params.r1r + params.r1a)
    c = params.d0
    if c == 0.0:
        return (-b / a,)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise DomainError("no physiological roots: negative discriminant")
    sq = math.sqrt(disc)
    # Vieta for the small root to avoid cancellation.
    big = (-b + sq) / (2.0 * a)
    small = c / (a * big)
    return (small, big)


def vl_steady_state(u_eq: float, params: ModelParams) -> float:
    return params.SR * u_eq / (params.K_IL6 * params.k_s)
