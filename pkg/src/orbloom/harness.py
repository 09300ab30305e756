"""Seeded Monte Carlo runner: trials, sweeps, summaries and persistence.

Trial ``i`` of a run uses the seed ``trial_seed(scenario.seed, i)``, so every
trial can be recomputed on its own and the result of a run does not depend on
how trials are chunked or scheduled.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Iterator, Sequence

import numpy as np

from . import _hashing, analysis
from .exceptions import ParameterError, PersistenceError
from .schemes import (Scenario, ar_decode, ar_encode, classify_mt_error, mac_batch,
                      mac_batch_implicit, mt_decode, mt_encode, sample_activity)

MODES = ("mac", "ar", "mt")
CSV_COLUMNS = ("trial_index", "seed", "mode", "N", "beta", "gamma", "L1", "K1", "L2", "K2",
               "M", "a", "w1", "w2", "candidate_list_size", "encode_hashes",
               "decode_hashes", "success", "error_cause")
CAUSES = ("", "ambiguity", "inactive-false-accept", "active-false-message", "phase1-miss", "miss")
SWEEP_AXES = {"N": "n_users", "beta": "beta", "gamma": "gamma", "kappa": "kappa",
              "kappa1": "kappa1", "kappa2": "kappa2", "omega_a": "omega_a", "L": "length"}
MAC_CHUNK = 20_000
_PER_TRIAL = ("a", "w1", "w2", "candidate_list_size", "encode_hashes", "decode_hashes")


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    mode: str
    N: int
    beta: float
    gamma: float
    L1: int
    K1: int
    L2: int
    K2: int
    M: int
    a: int
    w1: int
    w2: int
    candidate_list_size: int
    encode_hashes: int
    decode_hashes: int
    success: bool
    error_cause: str

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


class TrialRecords:
    """Columnar storage for the trials of one run; iterates as TrialRecord."""

    def __init__(self, scenario: Scenario, mode: str, params: tuple[int, int, int, int],
                 columns: dict[str, np.ndarray]):
        self.scenario = scenario
        self.mode = mode
        self.params = params
        self.columns = columns

    def __len__(self) -> int:
        return int(self.columns["trial_index"].size)

    def __getitem__(self, i: int) -> TrialRecord:
        c = self.columns
        L1, K1, L2, K2 = self.params
        return TrialRecord(
            int(c["trial_index"][i]), int(c["seed"][i]), self.mode, self.scenario.n_users,
            self.scenario.beta, self.scenario.gamma, L1, K1, L2, K2, self.scenario.n_msgs,
            *(int(c[k][i]) for k in _PER_TRIAL),
            bool(c["success"][i]), CAUSES[int(c["cause"][i])])

    def __iter__(self) -> Iterator[TrialRecord]:
        return (self[i] for i in range(len(self)))

    def write_csv(self, fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        sc = self.scenario
        L1, K1, L2, K2 = self.params
        fixed = [self.mode, sc.n_users, repr(sc.beta), repr(sc.gamma), L1, K1, L2, K2, sc.n_msgs]
        c = self.columns
        per = [c[k].tolist() for k in _PER_TRIAL]
        for i, (idx, seed, ok, cause) in enumerate(zip(c["trial_index"].tolist(), c["seed"].tolist(),
                                                       c["success"].tolist(), c["cause"].tolist())):
            writer.writerow([idx, seed, *fixed, *(col[i] for col in per),
                             int(ok), CAUSES[cause]])


@dataclass(frozen=True)
class Summary:
    mode: str
    fingerprint: str
    trials: int
    errors: int
    error_rate: float
    ci_low: float
    ci_high: float
    miss_count: int
    cause_counts: dict
    mean_active: float
    mean_candidate_ratio: float | None
    max_candidate_ratio: float | None
    mean_encode_hashes: float  # per active user
    mean_decode_hashes: float  # per user
    mean_weight: float
    L1: int
    K1: int
    L2: int
    K2: int
    M: int
    exact_error: float | None = None
    bound_error: float | None = None
    feasible: bool | None = None
    scenario: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Summary":
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def within(self, p: float, sigmas: float = 3.0) -> bool:
        """Whether the error rate is within ``sigmas`` binomial standard errors of p."""
        se = math.sqrt(max(p * (1 - p), 1e-300) / self.trials)
        return abs(self.error_rate - p) <= sigmas * se


# -- per-trial execution

def _params(scenario: Scenario, mode: str) -> tuple[int, int, int, int]:
    if mode == "mac":
        L, K = scenario.mac_params()
        return L, K, 0, 0
    if mode == "ar":
        L, K = scenario.ar_params()
        return L, K, 0, 0
    return scenario.mt_params()


def _empty_columns(n: int) -> dict[str, np.ndarray]:
    cols = {k: np.zeros(n, dtype=np.int64) for k in _PER_TRIAL}
    cols["trial_index"] = np.zeros(n, dtype=np.int64)
    cols["seed"] = np.zeros(n, dtype=np.uint64)
    cols["success"] = np.zeros(n, dtype=bool)
    cols["cause"] = np.zeros(n, dtype=np.int8)
    return cols


def _run_mac_chunk(scenario: Scenario, indices: np.ndarray) -> dict[str, np.ndarray]:
    L, K = scenario.mac_params()
    N, M = scenario.n_users, scenario.n_msgs
    seeds = _hashing.trial_seed(scenario.seed, indices)
    batch = mac_batch_implicit if scenario.implicit_codebook() else mac_batch
    out = batch(seeds, N, M, L, K)
    cols = _empty_columns(indices.size)
    cols["trial_index"][:] = indices
    cols["seed"][:] = seeds
    cols["a"][:] = N
    cols["w1"][:] = out["weight"]
    cols["encode_hashes"][:] = N * K
    cols["decode_hashes"][:] = out["decode_hashes"]
    cols["success"][:] = out["success"]
    cols["cause"][:] = np.where(out["miss"], CAUSES.index("miss"),
                                np.where(out["success"], 0, CAUSES.index("ambiguity")))
    return cols


def _run_ar_chunk(scenario: Scenario, indices: np.ndarray) -> dict[str, np.ndarray]:
    L, K = scenario.ar_params()
    cols = _empty_columns(indices.size)
    for j, idx in enumerate(indices):
        seed = int(_hashing.trial_seed(scenario.seed, idx))
        pattern = sample_activity(scenario, seed)
        y = ar_encode(scenario, pattern, seed)
        out = ar_decode(y, scenario, seed)
        missed = not pattern.active <= out.declared_active
        ok = out.declared_active == pattern.active
        cols["trial_index"][j] = idx
        cols["seed"][j] = seed
        cols["a"][j] = pattern.a
        cols["w1"][j] = int(y.bits.sum())
        cols["candidate_list_size"][j] = out.candidate_list_size
        cols["encode_hashes"][j] = pattern.a * K
        cols["decode_hashes"][j] = out.hash_count_total
        cols["success"][j] = ok
        cols["cause"][j] = (CAUSES.index("miss") if missed
                            else 0 if ok else CAUSES.index("inactive-false-accept"))
    return cols


def _run_mt_chunk(scenario: Scenario, indices: np.ndarray) -> dict[str, np.ndarray]:
    L1, K1, L2, K2 = scenario.mt_params()
    cols = _empty_columns(indices.size)
    for j, idx in enumerate(indices):
        seed = int(_hashing.trial_seed(scenario.seed, idx))
        pattern = sample_activity(scenario, seed)
        y1, y2 = mt_encode(scenario, pattern, seed)
        out = mt_decode(y1, y2, scenario, seed)
        cause = classify_mt_error(pattern, out)
        cols["trial_index"][j] = idx
        cols["seed"][j] = seed
        cols["a"][j] = pattern.a
        cols["w1"][j] = int(y1.bits.sum())
        cols["w2"][j] = int(y2.bits.sum())
        cols["candidate_list_size"][j] = out.candidate_list_size
        cols["encode_hashes"][j] = pattern.a * (K1 + K2)
        cols["decode_hashes"][j] = out.hash_count_total
        cols["success"][j] = cause is None
        cols["cause"][j] = 0 if cause is None else CAUSES.index(cause)
    return cols


_RUNNERS = {"mac": _run_mac_chunk, "ar": _run_ar_chunk, "mt": _run_mt_chunk}


def _comparison(scenario: Scenario, mode: str, params) -> tuple[float | None, float | None, bool | None]:
    N = scenario.n_users
    if mode == "mac":
        L, K = params[:2]
        return 1.0 - analysis.success_prob_exact(N, scenario.n_msgs, L, K), None, None
    a_fixed = scenario.active_count
    if mode == "ar":
        L, K = params[:2]
        if a_fixed is not None:
            exact = analysis.ar_success_exact(N, a_fixed, L, K)
        else:
            exact = analysis.ar_success_unconditional(N, scenario.n_active, L, K)
        a_ref = a_fixed if a_fixed else scenario.n_active
        bound = analysis.best_ar_lower_bound(N, a_ref, L, K).value
        return 1.0 - exact, 1.0 - bound, None
    L1, K1, L2, K2 = params
    M = scenario.n_msgs
    if a_fixed is not None:
        exact = float(analysis.mt_success_by_active(N, M, L1, K1, L2, K2, np.array([a_fixed]))[0])
    else:
        exact = analysis.mt_success_unconditional(N, scenario.n_active, M, L1, K1, L2, K2)
    feasible = analysis.feasibility_mt(scenario.kappa1, scenario.kappa2, scenario.beta, scenario.gamma)
    return 1.0 - exact, None, feasible


def summarize(records: TrialRecords, compare: bool = True) -> Summary:
    c = records.columns
    n = len(records)
    if n == 0:
        raise ParameterError("cannot summarize zero trials")
    successes = int(c["success"].sum())
    errors = n - successes
    lo, hi = wilson_interval(errors, n)
    causes = np.bincount(c["cause"].astype(np.int64), minlength=len(CAUSES))
    cause_counts = {name: int(causes[i]) for i, name in enumerate(CAUSES) if name and causes[i]}
    a = c["a"]
    if records.mode == "mt":
        with_active = a > 0
        ratios = c["candidate_list_size"][with_active] / a[with_active]
        mean_ratio = float(ratios.mean()) if ratios.size else None
        max_ratio = float(ratios.max()) if ratios.size else None
    else:
        mean_ratio = max_ratio = None
    total_active = int(a.sum())
    exact = bound = feasible = None
    if compare:
        exact, bound, feasible = _comparison(records.scenario, records.mode, records.params)
    L1, K1, L2, K2 = records.params
    return Summary(
        mode=records.mode,
        fingerprint=records.scenario.fingerprint(),
        trials=n,
        errors=errors,
        error_rate=errors / n,
        ci_low=lo,
        ci_high=hi,
        miss_count=int(cause_counts.get("miss", 0) + cause_counts.get("phase1-miss", 0)),
        cause_counts=cause_counts,
        mean_active=float(a.mean()),
        mean_candidate_ratio=mean_ratio,
        max_candidate_ratio=max_ratio,
        mean_encode_hashes=float(c["encode_hashes"].sum() / total_active) if total_active else 0.0,
        mean_decode_hashes=float(c["decode_hashes"].sum() / (n * records.scenario.n_users)),
        mean_weight=float(c["w1"].mean()),
        L1=L1, K1=K1, L2=L2, K2=K2,
        M=records.scenario.n_msgs,
        exact_error=exact,
        bound_error=bound,
        feasible=feasible,
        scenario=records.scenario.to_dict(),
    )


def run_trials(scenario: Scenario, mode: str, trials: int, workers: int = 1,
               compare: bool = True) -> tuple[Summary, TrialRecords]:
    """Run ``trials`` independent trials of ``mode`` and summarize them."""
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if isinstance(trials, bool) or not isinstance(trials, (int, np.integer)) or trials < 1:
        raise ParameterError(f"trials must be a positive integer, got {trials!r}")
    params = _params(scenario, mode)
    runner = _RUNNERS[mode]
    chunk = MAC_CHUNK if mode == "mac" else max(1, math.ceil(trials / max(workers, 1)))
    chunks = [np.arange(s, min(s + chunk, trials), dtype=np.int64) for s in range(0, trials, chunk)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda idx: runner(scenario, idx), chunks))
    else:
        parts = [runner(scenario, idx) for idx in chunks]
    columns = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    records = TrialRecords(scenario, mode, params, columns)
    return summarize(records, compare=compare), records


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    summary: Summary
    records: TrialRecords | None = None


def run_sweep(base: Scenario, axis: str, values: Sequence, mode: str, trials: int,
              workers: int = 1, compare: bool = True, keep_records: bool = False) -> list[SweepRow]:
    """One run per value of ``axis``; the analytic comparison rides along."""
    if axis not in SWEEP_AXES:
        raise ParameterError(f"axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    rows = []
    for value in values:
        scenario = base.replace(**{SWEEP_AXES[axis]: value})
        summary, records = run_trials(scenario, mode, trials, workers=workers, compare=compare)
        rows.append(SweepRow(axis, value, summary, records if keep_records else None))
    return rows


def format_table(rows: Sequence[SweepRow] | Sequence[Summary], axis: str | None = None) -> str:
    """Aligned text table of empirical error vs the analytic columns."""
    header = ["value" if axis else "mode", "L1", "K1", "L2", "K2", "M", "trials", "error_rate",
              "ci_low", "ci_high", "exact_error", "bound_error", "cand_ratio",
              "enc_hash/active", "dec_hash/user", "note"]
    lines = [header]
    for row in rows:
        s = row.summary if isinstance(row, SweepRow) else row
        first = f"{row.value:g}" if isinstance(row, SweepRow) else s.mode
        note = ""
        if s.feasible is False:
            note = "infeasible-by-Eq.(33)"
        lines.append([first, str(s.L1), str(s.K1), str(s.L2), str(s.K2),
                      str(s.M) if s.M < 10**9 else f"{float(s.M):.3g}", str(s.trials),
                      f"{s.error_rate:.5f}", f"{s.ci_low:.5f}", f"{s.ci_high:.5f}",
                      _fmt(s.exact_error), _fmt(s.bound_error), _fmt(s.mean_candidate_ratio, 3),
                      f"{s.mean_encode_hashes:.2f}", f"{s.mean_decode_hashes:.3f}", note])
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip() for r in lines)


def _fmt(x, digits: int = 5) -> str:
    return "-" if x is None else f"{x:.{digits}f}"


# -- persistence

def persist(records: TrialRecords | Sequence[TrialRecords] | None,
            summaries: Summary | Sequence[Summary], path, stem: str = "run") -> list[Path]:
    """Write ``<stem>.csv`` (or ``<stem>_<i>.csv`` per run) and ``<stem>.json``."""
    directory = Path(path)
    if isinstance(summaries, Summary):
        summaries = [summaries]
    if records is None:
        record_sets = []
    elif isinstance(records, TrialRecords):
        record_sets = [records]
    else:
        record_sets = list(records)
    written = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for i, recs in enumerate(record_sets):
            name = f"{stem}.csv" if len(record_sets) == 1 else f"{stem}_{i}.csv"
            target = directory / name
            with open(target, "w", newline="", encoding="utf-8") as fh:
                recs.write_csv(fh)
            written.append(target)
        target = directory / f"{stem}.json"
        doc = {"summaries": [s.to_dict() for s in summaries]}
        with open(target, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
        written.append(target)
    except OSError as exc:
        raise PersistenceError(f"cannot write results under {directory}: {exc}") from exc
    return written


def load_summaries(path) -> list[Summary]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    return [Summary.from_dict(d) for d in doc["summaries"]]


def load_records_csv(path) -> list[dict]:
    """Trial rows as dicts of strings, in file order."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc


def default_output_dir() -> Path:
    return Path(os.environ.get("ORBLOOM_OUTPUT_DIR", "results"))
