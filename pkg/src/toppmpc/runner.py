"""Mode pipelines behind the CLI. Each writes its CSVs plus ``manifest.txt``."""
from __future__ import annotations

import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, _backend
from .config import RunConfig
from .dosage import (DoseSearchError, DurationSchedule, InfeasiblePrescription, control_effort,
                     dose_map, duration_from_input, min_feedforward_dose)
from .integrator import IntegrationError, InputProfile, classify_outcome, integrate
from .model import MINUTES_PER_DAY, DomainError
from .montecarlo import run_campaign
from .mpc import MpcRunError, run_receding_horizon

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2

DOMAIN_ERRORS = (DoseSearchError, InfeasiblePrescription, IntegrationError, MpcRunError,
                 DomainError)


@dataclass
class RunResult:
    exit_code: int
    files: list[Path] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)


def _openloop(cfg: RunConfig, out: Path, res: RunResult):
    traj = integrate(cfg.x0, InputProfile.constant(0.0, 0.0, cfg.mpc.horizon),
                     (0.0, cfg.mpc.horizon), cfg.mpc.step, cfg.params)
    traj.to_csv(out / "trajectory.csv")
    res.files.append(out / "trajectory.csv")
    res.lines += [f"final G = {traj.states[-1, 0]:.3f} mg/dl",
                  f"outcome: {classify_outcome(traj, cfg.threshold)}"]


def _feedforward(cfg: RunConfig, out: Path, res: RunResult):
    u = cfg.ueq
    profile = InputProfile.constant(u, 0.0, cfg.mpc.horizon)
    traj = integrate(cfg.x0, profile, (0.0, cfg.mpc.horizon), cfg.mpc.step, cfg.params)
    n = cfg.mpc.n_periods
    sched = DurationSchedule.from_inputs([u] * n, cfg.u_bar, cfg.mpc.T)
    traj.to_csv(out / "trajectory.csv")
    sched.to_csv(out / "schedule.csv")
    res.files += [out / "trajectory.csv", out / "schedule.csv"]
    res.lines += [f"u_eq = {u!r}",
                  f"final G = {traj.states[-1, 0]:.3f} mg/dl",
                  f"outcome: {classify_outcome(traj, cfg.threshold)}",
                  f"effort eta = {control_effort(profile):.4g}",
                  f"session duration = {sched.durations[0]:.4g} min"]


def _mpc(cfg: RunConfig, out: Path, res: RunResult):
    run = run_receding_horizon(cfg.x0, cfg.mpc, cfg.params)
    sched = DurationSchedule.from_inputs(run.inputs, cfg.u_bar, cfg.mpc.T)
    run.trajectory.to_csv(out / "trajectory.csv")
    run.inputs_csv(out / "inputs.csv")
    sched.to_csv(out / "schedule.csv")
    res.files += [out / "trajectory.csv", out / "inputs.csv", out / "schedule.csv"]
    eta = run.effort()
    avg = duration_from_input(eta / cfg.mpc.horizon, cfg.u_bar, cfg.mpc.T * MINUTES_PER_DAY)
    res.lines += [f"final G = {run.final_state.G:.3f} mg/dl",
                  f"outcome: {classify_outcome(run.trajectory, cfg.threshold)}",
                  f"effort eta = {eta:.4g}",
                  f"average session = {avg:.4g} min",
                  f"peak weekly minutes = {sched.weekly.max():.4g}"]


def _dosemin(cfg: RunConfig, out: Path, res: RunResult):
    u = min_feedforward_dose(cfg.x0, cfg.params, cfg.resolution, cfg.mpc.horizon,
                             cfg.threshold, cfg.mpc.u_eq_max, cfg.mpc.step)
    (out / "dosemin.txt").write_text(f"{u!r}\n")
    res.files.append(out / "dosemin.txt")
    res.lines.append(f"{u!r}")


def _montecarlo(cfg: RunConfig, out: Path, res: RunResult):
    summary = run_campaign(cfg.campaign, cfg.params, cfg.x0)
    summary.runs_csv(out / "campaign.csv")
    summary.summary_csv(out / "campaign_summary.csv")
    text = summary.summary_text()
    (out / "campaign_summary.txt").write_text(text)
    res.files += [out / "campaign.csv", out / "campaign_summary.csv",
                  out / "campaign_summary.txt"]
    res.lines += text.rstrip("\n").splitlines()


def _dosemap(cfg: RunConfig, out: Path, res: RunResult):
    text = dose_map(cfg.ueq)
    (out / "dosemap.txt").write_text(text)
    res.files.append(out / "dosemap.txt")
    res.lines += text.rstrip("\n").splitlines()


PIPELINES = {"openloop": _openloop, "feedforward": _feedforward, "mpc": _mpc,
             "dosemin": _dosemin, "montecarlo": _montecarlo, "dosemap": _dosemap}


def run(cfg: RunConfig) -> RunResult:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    res = RunResult(EXIT_OK)
    t0 = time.perf_counter()
    try:
        PIPELINES[cfg.mode](cfg, out, res)
    except DOMAIN_ERRORS as exc:
        res.exit_code = EXIT_DOMAIN
        res.lines.append(f"error: {exc}")
    elapsed = time.perf_counter() - t0
    manifest = cfg.to_text({
        "software": f"toppmpc {__version__} (kernel: {_backend.BACKEND})",
        "python": platform.python_version(),
        "wall time [s]": f"{elapsed:.3f}",
        "exit code": str(res.exit_code),
    })
    (out / "manifest.txt").write_text(manifest)
    res.files.append(out / "manifest.txt")
    return res
