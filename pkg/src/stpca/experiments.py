"""Monte-Carlo experiment harness: phase diagrams and concentration checks.

Every trial seed is derived from the master seed, the cell index, and the
trial index, so sweeps are reproducible row-for-row regardless of worker
count or execution order.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import SignalSpec, sample_noise_tensor, sample_sstm, substream
from .recovery import (
    _candidate_index_coeff,
    enumerate_candidates,
    match_supports,
    recover_multi,
    threshold_lambda,
)
from .tensor import DenseTensor

CSV_HEADER = [
    "n", "p", "k", "r", "t", "lambda", "trial", "seed",
    "exact", "overlap", "argmax_value", "runtime_ms", "error",
]

CONCENTRATION_CANDIDATE_GUARD = 10**5
CONCENTRATION_PAIR_GUARD = 2 * 10**5


@dataclass(frozen=True)
class PhaseConfig:
    """Grid sweep over model/algorithm parameters.

    lambda_mode "absolute" takes lambdas as-is; "threshold-multiple" scales
    each lambda by the provable threshold of the cell (eps=1/2, kappa=5,
    delta=0.01). noise_scale 0 is the noise-free debug mode.
    """

    n_grid: tuple[int, ...]
    p_grid: tuple[int, ...]
    k_grid: tuple[int, ...]
    r_grid: tuple[int, ...]
    t_grid: tuple[int, ...]
    lambda_grid: tuple[float, ...]
    trials: int
    master_seed: int
    lambda_mode: str = "absolute"
    noise_scale: float = 1.0
    # wall-clock timing is nondeterministic; disable it when byte-identical
    # CSVs across reruns or worker counts are required
    record_runtime: bool = True

    def __post_init__(self):
        for name in ("n_grid", "p_grid", "k_grid", "r_grid", "t_grid", "lambda_grid"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.lambda_mode not in ("absolute", "threshold-multiple"):
            raise ValueError("lambda_mode must be 'absolute' or 'threshold-multiple'")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be nonnegative")

    def cells(self) -> list[tuple[int, int, int, int, int, float]]:
        return list(
            itertools.product(
                self.n_grid, self.p_grid, self.k_grid,
                self.r_grid, self.t_grid, self.lambda_grid,
            )
        )

    @classmethod
    def from_json_dict(cls, d: dict) -> "PhaseConfig":
        return cls(
            n_grid=tuple(d["n"]), p_grid=tuple(d["p"]), k_grid=tuple(d["k"]),
            r_grid=tuple(d.get("r", [1])), t_grid=tuple(d["t"]),
            lambda_grid=tuple(d["lambda"]), trials=d["trials"],
            master_seed=d["seed"], lambda_mode=d.get("lambda_mode", "absolute"),
            noise_scale=d.get("noise_scale", 1.0),
            record_runtime=d.get("record_runtime", True),
        )

    @classmethod
    def from_json_file(cls, path: str) -> "PhaseConfig":
        with open(path) as f:
            return cls.from_json_dict(json.load(f))


def trial_seed(master_seed: int, cell_index: int, trial: int) -> int:
    """Deterministic per-trial seed; independent of execution order."""
    return int(substream(master_seed, "trial", cell_index, trial).integers(2**62))


def _run_cell(config: PhaseConfig, cell_index: int, cell) -> list[list]:
    n, p, k, r, t, lam_raw = cell
    rows = []
    for trial in range(config.trials):
        seed = trial_seed(config.master_seed, cell_index, trial)
        base = [n, p, k, r, t, None, trial, seed, "", "", "", "", ""]
        try:
            lam = lam_raw
            if config.lambda_mode == "threshold-multiple":
                lam = lam_raw * threshold_lambda(n, k, p, t, r)[0]
            base[5] = repr(float(lam))
            spec = SignalSpec(n=n, p=p, k=k, r=r, strengths=(float(lam),) * r)
            inst = sample_sstm(spec, seed)
            Y = inst.observation
            if config.noise_scale != 1.0:
                noise = sample_noise_tensor(n, p, seed)
                Y = DenseTensor(n, p, Y.data + (config.noise_scale - 1.0) * noise.data)
            start = time.perf_counter()
            recovered, values = recover_multi(Y, k, t, r, seed)
            runtime_ms = (time.perf_counter() - start) * 1000.0
            report = match_supports(recovered, inst.truth_supports(), values)
            base[8] = int(report.all_exact)
            base[9] = repr(sum(report.overlap) / len(report.overlap))
            base[10] = repr(values[0])
            base[11] = repr(runtime_ms) if config.record_runtime else ""
        except Exception as exc:  # cell failures become rows, the sweep continues
            base[5] = base[5] if base[5] is not None else repr(float(lam_raw))
            base[12] = f"{type(exc).__name__}: {exc}"
        rows.append(base)
    return rows


def run_phase_diagram(config: PhaseConfig, out_path: str, workers: int = 1) -> int:
    """Run the sweep and write one CSV row per (cell, trial). Returns row count.

    Rows are buffered and written in deterministic cell/trial order, so the
    output is byte-identical for any worker count.
    """
    cells = config.cells()
    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_cell = list(
                pool.map(lambda ic: _run_cell(config, ic[0], ic[1]), enumerate(cells))
            )
    else:
        per_cell = [_run_cell(config, i, c) for i, c in enumerate(cells)]
    count = 0
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for rows in per_cell:
            for row in rows:
                writer.writerow(row)
                count += 1
    return count


def concentration_bound(n: int, p: int, t: int, r: int, gamma: float) -> float:
    """High-probability bound on max_u |<W, u_1 x ... x u_p>| over the family."""
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    return math.sqrt(8 * (4 * r * t * math.log(n * p / t) + math.log(1 / gamma)))


@dataclass
class ConcentrationReport:
    n: int
    p: int
    t: int
    r: int
    gamma: float
    trials: int
    bound: float
    per_trial_max: list[float] = field(repr=False)
    failure_fraction: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "n": self.n, "p": self.p, "t": self.t, "r": self.r,
            "gamma": self.gamma, "trials": self.trials, "bound": self.bound,
            "failure_fraction": self.failure_fraction,
            "max_over_trials": max(self.per_trial_max),
        }


def _pair_index_coeff(n: int, p: int, t: int):
    """Index/coeff rows for all compositions x ordered disjoint candidate pairs."""
    rows_idx, rows_coeff = [], []
    for m1 in range(1, p):
        m2 = p - m1
        cands1 = list(enumerate_candidates(n, t, frozenset(), m1))
        for u in cands1:
            u_idx, u_coeff = _candidate_index_coeff(n, m1, u)
            for v in enumerate_candidates(n, t, frozenset(u.support), m2):
                v_idx, v_coeff = _candidate_index_coeff(n, m2, v)
                idx = (u_idx[:, None] * n**m2 + v_idx[None, :]).reshape(-1)
                coeff = (u_coeff[:, None] * v_coeff[None, :]).reshape(-1)
                rows_idx.append(idx)
                rows_coeff.append(coeff)
                if len(rows_idx) > CONCENTRATION_PAIR_GUARD:
                    raise ValueError("candidate pair family exceeds guard")
    return np.array(rows_idx), np.array(rows_coeff)


def check_concentration(
    n: int,
    p: int,
    t: int,
    r: int,
    gamma: float,
    trials: int,
    seed: int,
    noise_scale: float = 1.0,
) -> ConcentrationReport:
    """Exhaustive per-trial max of |<W, candidates>| against the theory bound.

    r=1 scans U_t; r=2 scans ordered disjoint candidate pairs across all mode
    compositions. Reports the fraction of trials whose max exceeds the bound
    (theory says at most 2*gamma per trial).
    """
    if r not in (1, 2):
        raise ValueError("r must be 1 or 2 at desk scale")
    if math.comb(n, t) * 2**t > CONCENTRATION_CANDIDATE_GUARD:
        raise ValueError("candidate family exceeds feasibility guard")
    if r == 1:
        cands = list(enumerate_candidates(n, t, frozenset(), p))
        idx_mat = np.empty((len(cands), t**p), dtype=np.int64)
        coeff_mat = np.empty_like(idx_mat, dtype=np.float64)
        for i, cand in enumerate(cands):
            idx_mat[i], coeff_mat[i] = _candidate_index_coeff(n, p, cand)
    else:
        idx_mat, coeff_mat = _pair_index_coeff(n, p, t)
    bound = concentration_bound(n, p, t, r, gamma)
    per_trial_max = []
    for trial in range(trials):
        W = sample_noise_tensor(n, p, trial_seed(seed, 0, trial))
        data = W.data if noise_scale == 1.0 else W.data * noise_scale
        values = (data[idx_mat] * coeff_mat).sum(axis=1)
        per_trial_max.append(float(np.abs(values).max()))
    failures = sum(1 for v in per_trial_max if v > bound)
    return ConcentrationReport(
        n, p, t, r, gamma, trials, bound, per_trial_max, failures / trials
    )


def estimate_phase_boundary(
    n: int,
    p: int,
    k: int,
    t: int,
    seed: int,
    trials: int = 20,
    steps: int = 8,
) -> dict:
    """Bisect the success curve over lambda = c * sqrt(k^p ln n).

    Calibration output only: returns the multiple c at which exact recovery
    crosses a 50% success rate, with the bracketing rates.
    """
    unit = math.sqrt(k**p * math.log(n))

    def success_rate(c: float, label: int) -> float:
        wins = 0
        for trial in range(trials):
            s = trial_seed(seed, label, trial)
            spec = SignalSpec(n=n, p=p, k=k, strengths=(c * unit,))
            inst = sample_sstm(spec, s)
            recovered, _ = recover_multi(inst.observation, k, t, 1, s)
            wins += recovered[0] == inst.truth_supports()[0]
        return wins / trials

    lo, hi = 0.0, 1.0
    label = 1
    hi_rate = success_rate(hi, label)
    while hi_rate < 0.5 and hi < 1024:
        lo, hi = hi, hi * 2
        label += 1
        hi_rate = success_rate(hi, label)
    lo_rate = success_rate(lo, 0) if lo > 0 else 0.0
    for _ in range(steps):
        mid = (lo + hi) / 2
        label += 1
        rate = success_rate(mid, label)
        if rate >= 0.5:
            hi, hi_rate = mid, rate
        else:
            lo, lo_rate = mid, rate
    return {
        "unit": unit,
        "boundary_multiple": hi,
        "boundary_lambda": hi * unit,
        "rate_below": lo_rate,
        "rate_at": hi_rate,
    }
