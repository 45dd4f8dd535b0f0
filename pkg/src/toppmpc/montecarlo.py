"""Seeded robustness campaigns: perturb parameters and initial state, run the
closed loop, classify each run.

RNG contract (campaign CSVs are regression artifacts, so this is fixed):
run ``i`` of a campaign with master seed ``s`` draws from
``numpy.random.Generator(PCG64(run_seed))`` where
``run_seed = SeedSequence([s, i]).generate_state(1, uint64)[0]``. Each run
draws 26 uniforms on ``[-phi, phi]`` in a fixed order (the 21 parameters in
``PARAM_FIELDS`` order, then ``G, I, beta, S_I, Vl``) whether or not a quantity is
selected, so narrowing the selection never shifts the other draws.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dosage import DurationSchedule
from .integrator import Outcome
from .model import PARAM_FIELDS, STATE_FIELDS, DomainError, ModelParams, State
from .mpc import MpcConfig, MpcRunError, run_receding_horizon

CAMPAIGN_HEADER = ("run", "seed", "outcome", "G_final", "beta_final", "eta", "peak_weekly_min")
SUMMARY_HEADER = ("n", "prevented", "progressed", "failed", "success_rate",
                  "G_final_min", "G_final_median", "G_final_max",
                  "beta_final_min", "beta_final_median", "beta_final_max")


@dataclass(frozen=True)
class CampaignConfig:
    n_runs: int = 100
    phi: float = 0.05
    seed: int = 20240501
    perturb_params: tuple[str, ...] = PARAM_FIELDS
    perturb_state: tuple[str, ...] = STATE_FIELDS
    mpc: MpcConfig = field(default_factory=MpcConfig)
    threshold_G: float = 300.0
    u_bar: float = 60.0
    workers: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0.0 <= self.phi < 1.0:
            raise ValueError("phi must lie in [0, 1)")
        unknown = set(self.perturb_params) - set(PARAM_FIELDS)
        unknown |= set(self.perturb_state) - set(STATE_FIELDS)
        if unknown:
            raise ValueError(f"unknown perturbation targets: {sorted(unknown)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


def run_seed(master_seed: int, run_index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), int(run_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def sample_perturbed(params: ModelParams, x0: State, phi: float, rng: np.random.Generator,
                     perturb_params=PARAM_FIELDS, perturb_state=STATE_FIELDS):
    """Scale each selected quantity by ``1 + eps``, ``eps ~ U[-phi, phi]``."""
    if not 0.0 <= phi < 1.0:
        raise ValueError("phi must lie in [0, 1)")
    eps = rng.uniform(-phi, phi, size=len(PARAM_FIELDS) + len(STATE_FIELDS))
    p = params.as_dict()
    for i, name in enumerate(PARAM_FIELDS):
        if name in perturb_params:
            p[name] = p[name] * (1.0 + eps[i])
    off = len(PARAM_FIELDS)
    s = {n: getattr(x0, n) for n in STATE_FIELDS}
    for j, name in enumerate(STATE_FIELDS):
        if name in perturb_state:
            s[name] = s[name] * (1.0 + eps[off + j])
    return ModelParams(**p), State(**s)


@dataclass(frozen=True)
class RunRecord:
    run: int
    seed: int
    outcome: Outcome
    params: ModelParams
    x0: State
    final_state: State | None
    eta: float
    peak_weekly_min: float
    error: str | None = None

    def csv_row(self):
        G = self.final_state.G if self.final_state else math.nan
        b = self.final_state.beta if self.final_state else math.nan
        return [self.run, self.seed, str(self.outcome), repr(G), repr(b),
                repr(self.eta), repr(self.peak_weekly_min)]


def _one_run(args) -> RunRecord:
    i, cfg, params, x0 = args
    seed = run_seed(cfg.seed, i)
    rng = np.random.default_rng(seed)
    p_i, x_i = sample_perturbed(params, x0, cfg.phi, rng, cfg.perturb_params, cfg.perturb_state)
    try:
        run = run_receding_horizon(x_i, cfg.mpc, p_i, record_trajectory=False)
    except (MpcRunError, DomainError) as exc:
        partial = getattr(exc, "partial", None)
        eta = partial.effort() if partial is not None and len(partial.inputs) else math.nan
        return RunRecord(i, seed, Outcome.FAILED, p_i, x_i, None, eta, math.nan, str(exc))
    final = run.final_state
    outcome = Outcome.PREVENTED if final.G < cfg.threshold_G else Outcome.PROGRESSED
    sched = DurationSchedule.from_inputs(run.inputs, cfg.u_bar, cfg.mpc.T)
    return RunRecord(i, seed, outcome, p_i, x_i, final, run.effort(),
                     float(np.max(sched.weekly)))


@dataclass
class CampaignSummary:
    records: list[RunRecord]
    config: CampaignConfig

    @property
    def n(self) -> int:
        return len(self.records)

    def count(self, outcome: Outcome) -> int:
        return sum(r.outcome is outcome for r in self.records)

    @property
    def success_rate(self) -> float:
        # failed runs count as not prevented
        return self.count(Outcome.PREVENTED) / self.n

    def _stats(self, attr):
        vals = np.array([getattr(r.final_state, attr) for r in self.records if r.final_state])
        if len(vals) == 0:
            return (math.nan,) * 3
        return float(vals.min()), float(np.median(vals)), float(vals.max())

    def summary_row(self):
        return [self.n, self.count(Outcome.PREVENTED), self.count(Outcome.PROGRESSED),
                self.count(Outcome.FAILED), repr(self.success_rate),
                *map(repr, self._stats("G")), *map(repr, self._stats("beta"))]

    def runs_csv(self, target=None):
        return _write_csv(target, CAMPAIGN_HEADER, [r.csv_row() for r in self.records])

    def summary_csv(self, target=None):
        return _write_csv(target, SUMMARY_HEADER, [self.summary_row()])

    def summary_text(self) -> str:
        g = self._stats("G")
        b = self._stats("beta")
        lines = [
            f"runs: {self.n} (phi = {self.config.phi:g}, master seed = {self.config.seed})",
            f"prevented: {self.count(Outcome.PREVENTED)}  progressed: "
            f"{self.count(Outcome.PROGRESSED)}  failed: {self.count(Outcome.FAILED)}",
            f"success rate: {self.success_rate:.2%}",
            f"final G    [mg/dl]  min {g[0]:.1f}  median {g[1]:.1f}  max {g[2]:.1f}",
            f"final beta [mg]     min {b[0]:.1f}  median {b[1]:.1f}  max {b[2]:.1f}",
        ]
        return "\n".join(lines) + "\n"

    @staticmethod
    def read_runs_csv(source) -> list[dict]:
        text = source if isinstance(source, str) and "\n" in source else open(source).read()
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != CAMPAIGN_HEADER:
            raise ValueError(f"unexpected campaign header {rows[0]}")
        out = []
        for r in rows[1:]:
            out.append({"run": int(r[0]), "seed": int(r[1]), "outcome": Outcome(r[2]),
                        "G_final": float(r[3]), "beta_final": float(r[4]),
                        "eta": float(r[5]), "peak_weekly_min": float(r[6])})
        return out


def _write_csv(target, header, rows):
    buf = io.StringIO() if target is None else None
    fh = buf if buf is not None else open(target, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if buf is None:
            fh.close()
    return buf.getvalue() if buf is not None else None


def run_campaign(cfg: CampaignConfig = CampaignConfig(), params: ModelParams = ModelParams(),
                 x0: State | None = None, progress=None) -> CampaignSummary:
    """Run ``cfg.n_runs`` perturbed closed loops; records ordered by run index."""
    from .model import NOMINAL_STATE
    x0 = NOMINAL_STATE if x0 is None else x0
    jobs = [(i, cfg, params, x0) for i in range(cfg.n_runs)]
    workers = min(cfg.workers, cfg.n_runs)
    records: list[RunRecord] = []
    if workers == 1:
        for job in jobs:
            records.append(_one_run(job))
            if progress:
                progress(records[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_one_run, jobs):
                records.append(rec)
                if progress:
                    progress(rec)
    records.sort(key=lambda r: r.run)
    return CampaignSummary(records, cfg)
