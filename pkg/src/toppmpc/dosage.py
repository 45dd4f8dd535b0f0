"""Exercise prescriptions from the equivalent input, and control-effort norms.

Units: intensity ``u_bar`` in percent (60 means 60 %), session duration and
training period in minutes. With ``u_bar = 60`` and a 2-day period
(2880 min) a 48-minute session is ``u_eq = 60 * 48 / 2880 = 1.0``, and the
minimum preventing dose ``u_eq = 1.1`` maps back to 52.8 minutes.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .integrator import InputProfile, Outcome, StepConfig, classify_outcome, simulate_constant
from .model import MINUTES_PER_DAY, ExerciseProgram, ModelParams, State

SCHEDULE_HEADER = ("k", "t_days", "delta_min", "weekly_min")
WEEK_DAYS = 7.0


class InfeasiblePrescription(ValueError):
    pass


class DoseSearchError(RuntimeError):
    pass


def equivalent_input(program: ExerciseProgram) -> float:
    return program.u_bar * program.delta / program.T


def duration_from_input(u_eq: float, u_bar: float, T: float) -> float:
    """Session minutes delivering ``u_eq`` at intensity ``u_bar`` every ``T`` minutes."""
    if not u_bar > 0:
        raise ValueError("u_bar must be > 0")
    if u_eq < 0:
        raise ValueError("u_eq must be >= 0")
    delta = u_eq * T / u_bar
    if delta > T * (1.0 + 1e-12):
        raise InfeasiblePrescription(
            f"infeasible prescription: {delta:.4g} min per session exceeds the {T:.4g}-min period")
    return delta


@dataclass(frozen=True)
class DurationSchedule:
    durations: np.ndarray       # minutes per session, one per period
    u_bar: float
    T_days: float
    t0: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.durations, dtype=float)
        object.__setattr__(self, "durations", d)
        if np.any(d < 0) or np.any(d > self.T_days * MINUTES_PER_DAY * (1 + 1e-12)):
            raise ValueError("session durations must lie in [0, T]")

    @classmethod
    def from_inputs(cls, inputs: Sequence[float], u_bar: float = 60.0, T_days: float = 2.0,
                    t0: float = 0.0) -> "DurationSchedule":
        T_min = T_days * MINUTES_PER_DAY
        return cls(np.array([duration_from_input(u, u_bar, T_min) for u in inputs]),
                   u_bar, T_days, t0)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.T_days * np.arange(len(self.durations))

    @property
    def weekly(self) -> np.ndarray:
        return weekly_minutes(self)

    def to_csv(self, target=None) -> str | None:
        buf = io.StringIO() if target is None else None
        fh = buf if buf is not None else open(target, "w", newline="")
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCHEDULE_HEADER)
            for k, (t, d, wk) in enumerate(zip(self.times, self.durations, self.weekly)):
                w.writerow([k, repr(float(t)), repr(float(d)), repr(float(wk))])
        finally:
            if buf is None:
                fh.close()
        return buf.getvalue() if buf is not None else None

    @classmethod
    def from_csv(cls, source, u_bar: float = 60.0) -> "DurationSchedule":
        if isinstance(source, str) and "\n" in source:
            rows = list(csv.reader(io.StringIO(source)))
        else:
            with open(source, newline="") as fh:
                rows = list(csv.reader(fh))
        if tuple(rows[0]) != SCHEDULE_HEADER:
            raise ValueError(f"unexpected schedule header {rows[0]}")
        t = np.array([float(r[1]) for r in rows[1:]])
        d = np.array([float(r[2]) for r in rows[1:]])
        T_days = float(t[1] - t[0]) if len(t) > 1 else 2.0
        return cls(d, u_bar, T_days, float(t[0]) if len(t) else 0.0)


def weekly_minutes(schedule: DurationSchedule) -> np.ndarray:
    """Minutes of exercise in the 7-day window starting at each period.

    Each period contributes its session minutes in proportion to how much of
    the period lies inside the window, so a constant schedule with a 2-day
    period gives 3.5 sessions per week. Windows running past the end of the
    schedule only count the periods that exist.
    """
    d = schedule.durations
    n = len(d)
    if n == 0:
        raise ValueError("empty schedule")
    T = schedule.T_days
    starts = T * np.arange(n)
    out = np.zeros(n)
    for k in range(n):
        w0, w1 = starts[k], starts[k] + WEEK_DAYS
        overlap = np.clip(np.minimum(starts + T, w1) - np.maximum(starts, w0), 0.0, T)
        out[k] = float(np.dot(d, overlap)) / T
    return out


def control_effort(u, period: float | None = None) -> float:
    """L1 norm of a non-negative input over its span.

    ``u`` is an :class:`InputProfile` (exact piecewise-constant integral) or a
    per-period sequence, in which case ``period`` is required.
    """
    if isinstance(u, InputProfile):
        return float(sum(abs(s.u_eq) * (s.t_end - s.t_start) for s in u.segments))
    if period is None:
        raise ValueError("period is required for a per-period sequence")
    return float(period * np.sum(np.abs(np.asarray(u, dtype=float))))


def _grid_value(i: int, resolution: float) -> float:
    # 11 * 0.1 must come out as 1.1, not 1.1000000000000001
    return round(i * resolution, 12)


def min_feedforward_dose(x0: State, params: ModelParams = ModelParams(), resolution: float = 0.1,
                         horizon: float = 365.0, threshold: float = 300.0, u_eq_max: float = 3.0,
                         cfg: StepConfig = StepConfig()) -> float:
    """Smallest grid input whose constant one-horizon run is ``PREVENTED``.

    Bisection on the grid ``{0, res, 2 res, ..., u_eq_max}`` assuming the
    outcome is monotone in the dose; the two neighbours of the answer are
    then simulated to check that assumption.
    """
    if not resolution > 0:
        raise ValueError("resolution must be > 0")
    n = int(math.floor(u_eq_max / resolution + 1e-9))
    cache: dict[int, bool] = {}

    def prevents(i):
        if i not in cache:
            traj = simulate_constant(x0, _grid_value(i, resolution), horizon, cfg, params)
            cache[i] = classify_outcome(traj, threshold) is Outcome.PREVENTED
        return cache[i]

    if prevents(0):
        return 0.0
    if not prevents(n):
        raise DoseSearchError(f"prevention infeasible: u_eq = {_grid_value(n, resolution)} "
                              "does not prevent progression")
    lo, hi = 0, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if prevents(mid):
            hi = mid
        else:
            lo = mid
    if prevents(hi - 1) or (hi < n and not prevents(hi + 1)):
        raise DoseSearchError(f"outcome not monotone in dose around u_eq = "
                              f"{_grid_value(hi, resolution)}")
    return _grid_value(hi, resolution)


def dose_map(u_eq: float, intensities: Sequence[float] = (40, 50, 60, 70, 80),
             periods_days: Sequence[float] = (1, 2, 3, 7)) -> str:
    """Plain-text table of session minutes (and minutes/week) for ``u_eq``."""
    header = "u_bar[%] | " + " | ".join(f"T={p:g} d: min/session (min/week)" for p in periods_days)
    lines = [f"equivalent input u_eq = {u_eq:g}", header, "-" * len(header)]
    for ub in intensities:
        cells = []
        for p in periods_days:
            try:
                d = duration_from_input(u_eq, ub, p * MINUTES_PER_DAY)
                cells.append(f"{d:10.1f} ({d * WEEK_DAYS / p:7.1f})")
            except InfeasiblePrescription:
                cells.append(f"{'infeasible':>20}")
        lines.append(f"{ub:8g} | " + " | ".join(f"{c:>32}" for c in cells))
    return "\n".join(lines) + "\n"
