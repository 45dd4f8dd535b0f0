"""Sampled-data receding-horizon controller on the equivalent exercise input.

At each period boundary ``t_k = k*T`` the controller picks the scalar
``u`` in ``[0, u_eq_max]`` minimising

    integral over [t_k, t_k + N*T] of  G(s)^2 + lambda * u^2  ds

with ``u`` held over the whole prediction window, applies it for one period
and repeats. The minimiser is found by a uniform grid followed by
golden-section refinement of the bracket around the best grid point.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .integrator import (InputProfile, IntegrationError, StepConfig, Trajectory,
                         advance_rk4, integrate, n_steps)
from .model import MINUTES_PER_DAY, ModelParams, State

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

INPUTS_HEADER = ("k", "t_days", "u_eq_star", "cost_predicted", "G_at_k")


class SolverError(RuntimeError):
    pass


class MpcRunError(RuntimeError):
    """A receding-horizon step failed; ``partial`` holds the run so far."""

    def __init__(self, message, partial: "ControlledRun"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class MpcConfig:
    T: float = 2.0
    N: int = 20
    lam: float = 60.0
    u_eq_max: float = 3.0
    horizon: float = 365.0
    grid_points: int = 31
    refine_tol: float = 1e-3
    step: StepConfig = field(default_factory=StepConfig)

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be > 0")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be an integer >= 1")
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if not self.u_eq_max >= 0:
            raise ValueError("u_eq_max must be >= 0")
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if not self.refine_tol > 0:
            raise ValueError("refine_tol must be > 0")
        if self.step.method != "rk4":
            raise ValueError("the controller predicts with the fixed-step rk4 method")

    @property
    def window(self) -> float:
        return self.N * self.T

    @property
    def n_periods(self) -> int:
        # A horizon that is not a multiple of T ends with a shortened period.
        return int(math.ceil(self.horizon / self.T - 1e-9))


@dataclass(frozen=True)
class StepResult:
    u: float
    cost: float
    evaluations: int


@dataclass
class ControlledRun:
    inputs: np.ndarray
    times: np.ndarray
    states_at_k: np.ndarray
    predicted_costs: np.ndarray
    evaluations: np.ndarray
    trajectory: Trajectory | None
    config: MpcConfig
    final_state: State | None = None

    @property
    def G_at_k(self) -> np.ndarray:
        return self.states_at_k[:, 0]

    @property
    def t_end(self) -> float:
        return min(self.times[-1] + self.config.T, self.config.horizon)

    @property
    def profile(self) -> InputProfile:
        return InputProfile.from_sequence(self.inputs, self.config.T, self.times[0], self.t_end)

    def effort(self) -> float:
        from .dosage import control_effort
        if len(self.inputs) == 0:
            return 0.0
        return control_effort(self.profile)

    def inputs_csv(self, target=None) -> str | None:
        buf = io.StringIO() if target is None else None
        fh = buf if buf is not None else open(target, "w", newline="")
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(INPUTS_HEADER)
            for k, (t, u, c, g) in enumerate(zip(self.times, self.inputs,
                                                 self.predicted_costs, self.G_at_k)):
                w.writerow([k, repr(float(t)), repr(float(u)), repr(float(c)), repr(float(g))])
        finally:
            if buf is None:
                fh.close()
        return buf.getvalue() if buf is not None else None

    @staticmethod
    def read_inputs_csv(source) -> dict[str, np.ndarray]:
        if isinstance(source, str) and "\n" in source:
            rows = list(csv.reader(io.StringIO(source)))
        else:
            with open(source, newline="") as fh:
                rows = list(csv.reader(fh))
        if tuple(rows[0]) != INPUTS_HEADER:
            raise ValueError(f"unexpected inputs header {rows[0]}")
        cols = list(zip(*rows[1:])) if len(rows) > 1 else [()] * len(INPUTS_HEADER)
        out = {name: np.array([float(v) for v in col]) for name, col in zip(INPUTS_HEADER, cols)}
        out["k"] = out["k"].astype(int)
        return out


def _check_candidate(u: float, cfg: MpcConfig):
    if not 0.0 <= u <= cfg.u_eq_max:
        raise ValueError(f"candidate input {u} outside [0, {cfg.u_eq_max}]")


def predicted_cost(x_k: State, u_candidate: float, cfg: MpcConfig = MpcConfig(),
                   params: ModelParams = ModelParams()) -> float:
    """Window cost for holding ``u_candidate`` over ``N*T`` days from ``x_k``.

    The glucose term is the trapezoidal rule on the integrator's step grid.
    """
    _check_candidate(u_candidate, cfg)
    x = x_k.as_array() if isinstance(x_k, State) else np.array(x_k, dtype=float)
    g2, _, _ = advance_rk4(x, u_candidate, cfg.window, cfg.step.h, params.as_array())
    return g2 + cfg.lam * u_candidate * u_candidate * cfg.window


def _grid(cfg: MpcConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.u_eq_max, cfg.grid_points)


def grid_costs(x_k: State, cfg: MpcConfig = MpcConfig(),
               params: ModelParams = ModelParams()) -> tuple[np.ndarray, np.ndarray]:
    """Costs of every grid candidate (``inf`` where integration failed)."""
    us = _grid(cfg)
    x = x_k.as_array() if isinstance(x_k, State) else np.asarray(x_k, dtype=float)
    n = n_steps(cfg.window, cfg.step.h)
    status, g2, _ = _backend.advance_batch(x, us, n, cfg.window / n, params.as_array(),
                                           MINUTES_PER_DAY)
    costs = g2 + cfg.lam * us * us * cfg.window
    costs[status != 0] = np.inf
    return us, costs


def golden_section(f, a: float, b: float, tol: float):
    """Golden-section search on ``[a, b]`` until the bracket is below ``tol``.

    Returns ``(x_best, f_best, evaluations)`` over every evaluated point.
    """
    best_x, best_f, evals = None, math.inf, 0

    def g(x):
        nonlocal best_x, best_f, evals
        v = f(x)
        evals += 1
        if v < best_f:
            best_x, best_f = x, v
        return v

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = g(c), g(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = g(d)
    return best_x, best_f, evals


def solve_step(x_k: State, cfg: MpcConfig = MpcConfig(),
               params: ModelParams = ModelParams()) -> StepResult:
    """Minimise the window cost over ``[0, u_eq_max]``.

    Never returns a point worse than the best grid candidate.
    """
    us, costs = grid_costs(x_k, cfg, params)
    if not np.any(np.isfinite(costs)):
        raise SolverError("all grid candidates failed to integrate")
    i = int(np.argmin(costs))
    best_u, best_c = float(us[i]), float(costs[i])
    evals = len(us)
    lo, hi = float(us[max(i - 1, 0)]), float(us[min(i + 1, len(us) - 1)])
    if hi - lo > cfg.refine_tol:
        x = x_k.as_array() if isinstance(x_k, State) else np.asarray(x_k, dtype=float)

        def f(u):
            try:
                return predicted_cost(x, u, cfg, params)
            except IntegrationError:
                return math.inf

        u_g, c_g, n = golden_section(f, lo, hi, cfg.refine_tol)
        evals += n
        if c_g < best_c:
            best_u, best_c = u_g, c_g
    return StepResult(best_u, best_c, evals)


def run_receding_horizon(x0: State, cfg: MpcConfig = MpcConfig(),
                         params: ModelParams = ModelParams(),
                         start_period: int = 0, record_trajectory: bool = True) -> ControlledRun:
    """Closed loop from ``x0`` at ``t = start_period * T`` to the horizon."""
    if not isinstance(x0, State):
        x0 = State.from_array(x0)
    n_total = cfg.n_periods
    x = x0
    inputs, times, states, costs, evals = [], [], [], [], []
    # each period contributes its samples except the right endpoint, which is
    # the next period's first sample
    traj_t, traj_x, traj_u = [], [], []
    last = None
    n_clamped = steps = 0

    def assemble():
        traj = None
        if record_trajectory and last is not None:
            traj = Trajectory(np.concatenate(traj_t + [last.times[-1:]]),
                              np.concatenate(traj_x + [last.states[-1:]]),
                              InputProfile.from_sequence(inputs, cfg.T, times[0], last.times[-1]),
                              steps=steps, n_clamped=n_clamped,
                              inputs=np.concatenate(traj_u + [last.inputs[-1:]]))
        return ControlledRun(np.array(inputs), np.array(times), np.array(states).reshape(-1, 5),
                             np.array(costs), np.array(evals, dtype=int), traj, cfg, x)

    for k in range(start_period, n_total):
        t_k = k * cfg.T
        t_next = min((k + 1) * cfg.T, cfg.horizon)
        try:
            res = solve_step(x, cfg, params)
            seg = integrate(x, InputProfile.constant(res.u, t_k, t_next), (t_k, t_next),
                            cfg.step, params)
        except (SolverError, IntegrationError) as exc:
            raise MpcRunError(f"period {k}: {exc}", assemble()) from exc
        inputs.append(res.u)
        times.append(t_k)
        states.append(x.as_array())
        costs.append(res.cost)
        evals.append(res.evaluations)
        if record_trajectory:
            traj_t.append(seg.times[:-1])
            traj_x.append(seg.states[:-1])
            traj_u.append(seg.inputs[:-1])
        last = seg
        steps += seg.steps
        n_clamped += seg.n_clamped
        x = seg.final
    return assemble()
