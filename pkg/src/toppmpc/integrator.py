"""Long-horizon integration under piecewise-constant inputs.

Two methods:

``rk4``
    Classical fixed-step Runge-Kutta through the compiled (or fallback)
    kernel. Every sub-interval between breakpoints (segment boundaries and
    output samples) is split into ``ceil(L/h)`` equal steps, so no step ever
    straddles an input discontinuity.
``adaptive``
    Dormand-Prince 5(4) written directly against :func:`model.derivative`.
    Independent of the kernels; used as the reference in tests.

Negative components smaller than ``NEG_TOL`` in magnitude are clamped to zero
and counted; anything below that raises :class:`IntegrationError`.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .model import MINUTES_PER_DAY, STATE_FIELDS, ModelParams, State, derivative

NEG_TOL = 1e-6
TRAJECTORY_HEADER = ("t_days",) + STATE_FIELDS + ("u_eq",)

_TIME_EPS = 1e-9


class IntegrationError(RuntimeError):
    """Integration could not continue; ``t`` is the time of failure."""

    def __init__(self, message: str, t: float, partial: "Trajectory | None" = None):
        super().__init__(f"{message} at t={t:.6g} d")
        self.t = t
        self.partial = partial


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    u_eq: float


class InputProfile:
    """Ordered, contiguous piecewise-constant input segments (days)."""

    def __init__(self, segments: Iterable[Segment | tuple]):
        segs = [s if isinstance(s, Segment) else Segment(*map(float, s)) for s in segments]
        if not segs:
            raise ValueError("input profile needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if b.t_start != a.t_end:
                raise ValueError(f"segments not contiguous at t={a.t_end}")
        for s in segs:
            if not s.t_end > s.t_start:
                raise ValueError(f"empty or reversed segment {s}")
            if not (math.isfinite(s.u_eq) and s.u_eq >= 0.0):
                raise ValueError(f"segment input must be finite and >= 0, got {s.u_eq}")
        self.segments: tuple[Segment, ...] = tuple(segs)

    @classmethod
    def constant(cls, u_eq: float, t0: float, t1: float) -> "InputProfile":
        return cls([Segment(float(t0), float(t1), float(u_eq))])

    @classmethod
    def from_sequence(cls, values: Sequence[float], period: float, t0: float = 0.0,
                      t1: float | None = None) -> "InputProfile":
        """Hold ``values[k]`` on ``[t0 + k*period, t0 + (k+1)*period)``.

        If ``t1`` is given the last segment is cut at ``t1``.
        """
        segs = []
        for k, u in enumerate(values):
            a = t0 + k * period
            b = t0 + (k + 1) * period
            if t1 is not None:
                if a >= t1 - _TIME_EPS:
                    break
                b = min(b, t1)
            segs.append(Segment(a, b, float(u)))
        return cls(segs)

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def u_at(self, t: float) -> float:
        """Input on the half-open segment containing ``t``; the last segment
        also owns its right endpoint."""
        for s in self.segments:
            if s.t_start <= t < s.t_end:
                return s.u_eq
        if t == self.t_end:
            return self.segments[-1].u_eq
        raise ValueError(f"t={t} outside profile [{self.t_start}, {self.t_end}]")

    def covers(self, t0: float, t1: float) -> bool:
        return self.t_start <= t0 + _TIME_EPS and self.t_end >= t1 - _TIME_EPS

    def restrict(self, t0: float, t1: float) -> "InputProfile":
        segs = [Segment(max(s.t_start, t0), min(s.t_end, t1), s.u_eq)
                for s in self.segments if s.t_end > t0 and s.t_start < t1]
        return InputProfile(segs)

    def __eq__(self, other):
        return isinstance(other, InputProfile) and self.segments == other.segments

    def __repr__(self):
        return f"InputProfile({len(self.segments)} segments, [{self.t_start}, {self.t_end}])"


@dataclass(frozen=True)
class StepConfig:
    method: str = "rk4"
    h: float = 5e-4
    rtol: float = 1e-8
    atol: float = 1e-8
    sample_dt: float = 1.0

    def __post_init__(self):
        if self.method not in ("rk4", "adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        for name in ("h", "rtol", "atol", "sample_dt"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0, got {v}")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    profile: InputProfile
    steps: int = 0
    n_clamped: int = 0
    max_error_estimate: float | None = None
    inputs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float).reshape(-1, 5)
        if self.inputs is None:
            self.inputs = np.array([self.profile.u_at(t) for t in self.times])

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> State:
        return State.from_array(self.states[-1])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, STATE_FIELDS.index(name)]

    def to_csv(self, target=None) -> str | None:
        """Write ``t_days,G,I,beta,S_I,Vl,u_eq``; returns text if no target."""
        buf = io.StringIO() if target is None else None
        fh = buf if buf is not None else open(target, "w", newline="")
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJECTORY_HEADER)
            for t, x, u in zip(self.times, self.states, self.inputs):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(u))])
        finally:
            if buf is None:
                fh.close()
        return buf.getvalue() if buf is not None else None

    @classmethod
    def from_csv(cls, source) -> "Trajectory":
        """Inverse of :meth:`to_csv`. The profile is rebuilt from the sampled
        inputs, so it is exact only when input changes fall on samples."""
        if isinstance(source, str) and "\n" in source:
            rows = list(csv.reader(io.StringIO(source)))
        else:
            with open(source, newline="") as fh:
                rows = list(csv.reader(fh))
        if tuple(rows[0]) != TRAJECTORY_HEADER:
            raise ValueError(f"unexpected trajectory header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        times, states, inputs = data[:, 0], data[:, 1:6], data[:, 6]
        if len(times) == 1:
            profile = InputProfile.constant(inputs[0], times[0], times[0] + 1.0)
        else:
            profile = InputProfile([Segment(a, b, u) for a, b, u in
                                    zip(times[:-1], times[1:], inputs[:-1])])
        return cls(times, states, profile, inputs=inputs)


class Outcome(enum.Enum):
    PREVENTED = "Prevented"
    PROGRESSED = "Progressed"
    FAILED = "Failed"

    def __str__(self):
        return self.value


def _sample_times(t0: float, t1: float, dt: float) -> list[float]:
    n = int(math.floor((t1 - t0) / dt + _TIME_EPS))
    ts = [t0 + j * dt for j in range(n + 1)]
    if t1 - ts[-1] > _TIME_EPS:
        ts.append(t1)
    else:
        ts[-1] = t1
    return ts


def n_steps(length: float, h: float) -> int:
    """Number of equal steps of size at most ``h`` covering ``length``."""
    return max(1, int(math.ceil(length / h - _TIME_EPS)))


def advance_rk4(x: np.ndarray, u_eq: float, length: float, h: float,
                params_arr: np.ndarray, t_start: float = 0.0) -> tuple[float, int, int]:
    """Advance ``x`` in place by ``length`` days with constant input.

    Returns ``(g2_integral, steps, n_clamped)``.
    """
    n = n_steps(length, h)
    status, acc, nclamp, fail = _backend.advance(x, float(u_eq), n, length / n,
                                                 params_arr, MINUTES_PER_DAY)
    if status:
        what = "non-finite state" if status == 1 else "negative state excursion"
        raise IntegrationError(what, t_start + (fail + 1) * length / n)
    return acc, n, nclamp


# Dormand-Prince 5(4) tableau.
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = tuple(np.array(row) for row in (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
))
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = _DP_B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                          -92097 / 339200, 187 / 2100, 1 / 40])


def _clamp(x: np.ndarray, t: float) -> int:
    if not np.all(np.isfinite(x)):
        raise IntegrationError("non-finite state", t)
    neg = x < 0.0
    if not neg.any():
        return 0
    if np.any(x < -NEG_TOL):
        raise IntegrationError("negative state excursion", t)
    x[neg] = 0.0
    return int(neg.sum())


def advance_adaptive(x: np.ndarray, u_eq: float, t: float, t_end: float, cfg: StepConfig,
                     params: ModelParams, h0: float | None = None):
    """Dormand-Prince from ``t`` to ``t_end`` in place on ``x``.

    Returns ``(steps, n_clamped, max_error_estimate, h_next)``.
    """
    f = lambda y: derivative(y, u_eq, params)  # noqa: E731
    h = h0 if h0 is not None else min(1e-3, t_end - t)
    steps = nclamp = 0
    max_err = 0.0
    k = np.empty((7, 5))
    k[0] = f(x)
    while t_end - t > _TIME_EPS:
        h = min(h, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        for i in range(1, 7):
            k[i] = f(x + h * (_DP_A[i] @ k[:i]))
        y_new = x + h * (_DP_B @ k)
        err_vec = h * (_DP_E @ k)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(x), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if not math.isfinite(err):
            h *= 0.2
            continue
        if err <= 1.0:
            t += h
            x[:] = y_new
            clamped = _clamp(x, t)
            nclamp += clamped
            steps += 1
            max_err = max(max_err, float(np.max(np.abs(err_vec))))
            k[0] = f(x) if clamped else k[6]
        fac = 0.9 * err ** -0.2 if err > 0 else 5.0
        h *= min(5.0, max(0.2, fac))
    return steps, nclamp, max_err, h


def integrate(x0: State, profile: InputProfile, span: tuple[float, float],
              cfg: StepConfig = StepConfig(), params: ModelParams = ModelParams()) -> Trajectory:
    """Integrate from ``x0`` at ``span[0]`` to ``span[1]`` under ``profile``."""
    t0, t1 = map(float, span)
    if not t1 > t0:
        raise ValueError("span must have t1 > t0")
    if not profile.covers(t0, t1):
        raise ValueError(f"profile {profile} does not cover [{t0}, {t1}]")
    if not isinstance(x0, State):
        x0 = State.from_array(x0)
    samples = _sample_times(t0, t1, cfg.sample_dt)
    boundaries = [s.t_end for s in profile.segments if t0 < s.t_end < t1]
    breaks = sorted(set(samples) | set(boundaries))
    sample_set = set(samples)

    x = x0.as_array()
    parr = params.as_array()
    times, states = [t0], [x.copy()]
    steps = nclamp = 0
    max_err = 0.0 if cfg.method == "adaptive" else None
    h_next = None
    for a, b in zip(breaks[:-1], breaks[1:]):
        u = profile.u_at(a)
        try:
            if cfg.method == "rk4":
                _, n, c = advance_rk4(x, u, b - a, cfg.h, parr, a)
            else:
                n, c, e, h_next = advance_adaptive(x, u, a, b, cfg, params, h_next)
                max_err = max(max_err, e)
        except IntegrationError as exc:
            exc.partial = Trajectory(np.array(times), np.array(states), profile.restrict(t0, t1))
            raise
        steps += n
        nclamp += c
        if b in sample_set:
            times.append(b)
            states.append(x.copy())
    return Trajectory(np.array(times), np.array(states), profile.restrict(t0, t1),
                      steps=steps, n_clamped=nclamp, max_error_estimate=max_err)


def simulate_constant(x0: State, u_eq: float, horizon_days: float,
                      cfg: StepConfig = StepConfig(), params: ModelParams = ModelParams(),
                      t0: float = 0.0) -> Trajectory:
    profile = InputProfile.constant(u_eq, t0, t0 + horizon_days)
    return integrate(x0, profile, (t0, t0 + horizon_days), cfg, params)


def classify_outcome(traj: Trajectory, threshold_G: float = 300.0) -> Outcome:
    """``PREVENTED`` iff the last sampled glucose is strictly below threshold."""
    if traj is None or len(traj) == 0:
        raise ValueError("empty trajectory")
    return Outcome.PREVENTED if traj.states[-1, 0] < threshold_G else Outcome.PROGRESSED
