"""Limited brute-force support recovery.

The algorithm family: split the observation into two independent copies,
maximize <Y1, u^{xp}> over the t-sparse flat candidates U_t, then read off
the signal support from the leave-one-mode contraction against Y2. Multi-
spike recovery repeats the round with the already-recovered indices
forbidden; the general-tensor variant searches over tuples of disjoint
candidates across mode compositions.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import substream
from .tensor import (
    DenseTensor,
    DenseUnitVector,
    SparseSignVector,
    add_rank1,
    contract_leave_mode,
    contract_leave_one,
    rank1_inner,
)


class EnumerationError(ValueError):
    """Too few free coordinates to enumerate t-sparse candidates."""


@dataclass(frozen=True)
class RecoveryParams:
    """Knobs of the provable-guarantee threshold: budget t, slack eps, ratio kappa."""

    k: int
    t: int
    r: int = 1
    eps: float = 0.5
    kappa: float = 5.0
    delta: float = 0.01
    A: float = 1.0

    def __post_init__(self):
        if not 1 <= self.t <= self.k:
            raise ValueError(f"need 1 <= t <= k, got t={self.t}, k={self.k}")
        if not 0 < self.eps <= 0.5:
            raise ValueError("eps must be in (0, 1/2]")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0, 1)")
        if self.A < 1:
            raise ValueError("A must be >= 1")


@dataclass
class RecoveryReport:
    """Recovered supports matched against ground truth."""

    recovered: list[frozenset[int]]
    matching: list[int]  # recovered[i] is matched to truth[matching[i]]
    exact: list[bool]
    overlap: list[float]
    argmax_values: list[float]
    wall_times: list[float]

    @property
    def all_exact(self) -> bool:
        return all(self.exact)

    def to_json_dict(self) -> dict:
        return {
            "recovered": [sorted(s) for s in self.recovered],
            "matching": self.matching,
            "exact": self.exact,
            "overlap": self.overlap,
            "argmax_values": self.argmax_values,
            "wall_times": self.wall_times,
        }


def preprocess_split(Y: DenseTensor, seed: int) -> tuple[DenseTensor, DenseTensor]:
    """Split Y into two independent copies Y1 = (Y+Z)/sqrt2, Y2 = (Y-Z)/sqrt2."""
    Z = substream(seed, "split").standard_normal(Y.data.shape[0])
    s = 1.0 / np.sqrt(2.0)
    return (
        DenseTensor(Y.n, Y.p, (Y.data + Z) * s),
        DenseTensor(Y.n, Y.p, (Y.data - Z) * s),
    )


def candidate_count(n: int, t: int, n_forbidden: int, p: int) -> int:
    """|U_t| after removing forbidden coordinates and (for even p) sign flips."""
    free = n - n_forbidden
    if free < t:
        return 0
    return math.comb(free, t) * 2 ** (t - (1 if p % 2 == 0 else 0))


def enumerate_candidates(
    n: int, t: int, forbidden: frozenset[int] | set[int], p: int
):
    """Deterministic iterator over U_t avoiding forbidden coordinates.

    Supports come in lexicographic order of the sorted index tuple; for each
    support, sign patterns follow binary counting (bit 0 -> +1, first support
    index is the most significant bit). For even p the global flip symmetry
    <u, x>^p = <-u, x>^p lets us pin the first index to +1, halving the count.
    """
    allowed = [i for i in range(1, n + 1) if i not in forbidden]
    if len(allowed) < t:
        raise EnumerationError(
            f"only {len(allowed)} free coordinates, need t={t}"
        )
    n_signs = 2 ** (t - 1) if p % 2 == 0 else 2**t
    for support in itertools.combinations(allowed, t):
        for pattern in range(n_signs):
            if p % 2 == 0:
                pattern_bits = pattern  # leading sign implicitly +1
                width = t - 1
            else:
                pattern_bits = pattern
                width = t
            signs = []
            for b in range(width):
                bit = (pattern_bits >> (width - 1 - b)) & 1
                signs.append(-1 if bit else 1)
            if p % 2 == 0:
                signs = [1] + signs
            yield SparseSignVector(n, support, tuple(signs))


def _candidate_index_coeff(n: int, p: int, cand: SparseSignVector):
    """Flat indices and coefficients of the t^p nonzeros of cand^{xp}."""
    entries = cand.entries()
    idxs = np.empty(len(entries) ** p, dtype=np.int64)
    coeffs = np.empty(len(entries) ** p)
    for j, combo in enumerate(itertools.product(entries, repeat=p)):
        idx = 0
        coeff = 1.0
        for i, val in combo:
            idx = idx * n + (i - 1)
            coeff *= val
        idxs[j] = idx
        coeffs[j] = coeff
    return idxs, coeffs


def _scan_chunk(Y1: DenseTensor, chunk: list[tuple[int, SparseSignVector]]):
    """Best (value, rank, candidate) over a contiguous enumeration chunk."""
    n, p = Y1.n, Y1.p
    idx_mat = np.empty((len(chunk), len(chunk[0][1].support) ** p), dtype=np.int64)
    coeff_mat = np.empty_like(idx_mat, dtype=np.float64)
    for row, (_, cand) in enumerate(chunk):
        idx_mat[row], coeff_mat[row] = _candidate_index_coeff(n, p, cand)
    values = (Y1.data[idx_mat] * coeff_mat).sum(axis=1)
    best = int(np.argmax(values))  # np.argmax returns the first max: rank tie-break
    return float(values[best]), chunk[best][0], chunk[best][1]


def argmax_over_Ut(
    Y1: DenseTensor,
    t: int,
    forbidden: frozenset[int] | set[int] = frozenset(),
    workers: int = 1,
    chunk_size: int = 4096,
) -> tuple[SparseSignVector, float]:
    """Maximize <Y1, u^{xp}> over the enumerated candidate set.

    Ties break by enumeration rank (earliest wins), so the result is
    identical for any worker count or chunk partitioning.
    """
    ranked = enumerate(enumerate_candidates(Y1.n, t, forbidden, Y1.p))
    chunks: list[list[tuple[int, SparseSignVector]]] = []
    while True:
        chunk = list(itertools.islice(ranked, chunk_size))
        if not chunk:
            break
        chunks.append(chunk)
    if not chunks:
        raise EnumerationError("empty candidate set")
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _scan_chunk(Y1, c), chunks))
    else:
        results = [_scan_chunk(Y1, c) for c in chunks]
    # reduce by (value, -rank): larger value wins, then earlier rank
    best_value, best_rank, best_cand = results[0]
    for value, rank, cand in results[1:]:
        if value > best_value or (value == best_value and rank < best_rank):
            best_value, best_rank, best_cand = value, rank, cand
    return best_cand, best_value


def top_k_magnitude(alpha: np.ndarray, k: int) -> frozenset[int]:
    """1-based indices of the k largest |alpha| entries, ties to smaller index."""
    order = np.lexsort((np.arange(len(alpha)), -np.abs(alpha)))
    return frozenset(int(i) + 1 for i in order[:k])


def recover_single(
    Y: DenseTensor, k: int, t: int, seed: int, workers: int = 1
) -> tuple[frozenset[int], float]:
    """Single-spike limited brute force; returns (support estimate, argmax value)."""
    if not 1 <= t <= k <= Y.n:
        raise ValueError(f"need 1 <= t <= k <= n, got t={t}, k={k}, n={Y.n}")
    Y1, Y2 = preprocess_split(Y, seed)
    v_star, value = argmax_over_Ut(Y1, t, frozenset(), workers)
    alpha = contract_leave_one(Y2, v_star)
    return top_k_magnitude(alpha, k), value


def recover_multi(
    Y: DenseTensor, k: int, t: int, r: int, seed: int, workers: int = 1
) -> tuple[list[frozenset[int]], list[float]]:
    """r-round recovery with disjointness constraints; one split for all rounds."""
    if r * k > Y.n:
        raise ValueError(f"need r*k <= n, got r={r}, k={k}, n={Y.n}")
    if not 1 <= t <= k:
        raise ValueError(f"need 1 <= t <= k, got t={t}, k={k}")
    Y1, Y2 = preprocess_split(Y, seed)
    recovered: list[frozenset[int]] = []
    values: list[float] = []
    forbidden: set[int] = set()
    for i in range(r):
        try:
            v_star, value = argmax_over_Ut(Y1, t, forbidden, workers)
        except EnumerationError as exc:
            raise EnumerationError(f"round {i + 1}/{r}: {exc}") from exc
        alpha = contract_leave_one(Y2, v_star)
        support = top_k_magnitude(alpha, k)
        recovered.append(support)
        values.append(value)
        forbidden |= support
    return recovered, values


def _compositions(p: int, ell: int):
    """All C(p-1, ell-1) compositions of p into ell positive parts, lexicographic."""
    for cuts in itertools.combinations(range(1, p), ell - 1):
        bounds = (0, *cuts, p)
        yield tuple(b - a for a, b in zip(bounds, bounds[1:]))


def recover_general(
    Y: DenseTensor, k: int, t: int, ell: int, seed: int
) -> tuple[list[frozenset[int]], float]:
    """Recover the ell factor supports of a general spike x_(1) x ... x x_(p).

    Maximizes <Y1, u_(1) x ... x u_(p)> over all compositions and all
    ell-tuples of disjoint-support U_t candidates, then reads each factor's
    support from the contraction leaving one of its modes free.
    """
    p = Y.p
    if not 1 <= ell <= p:
        raise ValueError(f"need 1 <= ell <= p, got ell={ell}")
    if ell * t > Y.n:
        raise EnumerationError(f"cannot place {ell} disjoint {t}-sparse candidates")
    Y1, Y2 = preprocess_split(Y, seed)
    best: tuple[float, int, tuple, tuple] | None = None
    rank = 0
    for comp in _compositions(p, ell):
        for cands in _disjoint_tuples(Y1.n, t, comp):
            factors = []
            for cand, m in zip(cands, comp):
                factors.extend([cand] * m)
            value = rank1_inner(Y1, factors)
            if best is None or value > best[0]:
                best = (value, rank, comp, cands)
            rank += 1
    assert best is not None
    value, _, comp, cands = best
    supports = []
    for q in range(ell):
        # free the last mode occupied by factor q
        factors: list[SparseSignVector] = []
        for cand, m in zip(cands, comp):
            factors.extend([cand] * m)
        free_mode = sum(comp[: q + 1]) - 1
        alpha = contract_leave_mode(Y2, factors, free_mode)
        supports.append(top_k_magnitude(alpha, k))
    return supports, value


def _disjoint_tuples(n: int, t: int, composition: tuple[int, ...]):
    """Ordered tuples of U_t candidates with pairwise-disjoint supports.

    Factor q occupies composition[q] modes; flipping it scales the product by
    (-1)^{composition[q]}, so the sign-pruning parity is per factor, not the
    global tensor order.
    """

    def rec(prefix: tuple, used: frozenset[int]):
        if len(prefix) == len(composition):
            yield prefix
            return
        parity = composition[len(prefix)]
        for cand in enumerate_candidates(n, t, used, parity):
            yield from rec(prefix + (cand,), used | set(cand.support))

    yield from rec((), frozenset())


def threshold_lambda(
    n: int,
    k: int,
    p: int,
    t: int,
    r: int = 1,
    A: float = 1.0,
    eps: float = 0.5,
    kappa: float = 5.0,
    delta: float = 0.01,
) -> tuple[float, bool]:
    """Signal strength at which recovery is provably reliable, with the
    kappa-validity flag.

    lambda = (32 kappa / (A eps)^p) * sqrt(t (k/t)^p ln(n/delta)); valid when
    kappa >= 5 A^{2p} (eps/(1-eps))^{p-1}. r does not enter the formula but is
    kept for parity with the recovery entry points.
    """
    RecoveryParams(k=k, t=t, r=r, eps=eps, kappa=kappa, delta=delta, A=A)
    lam = (32.0 * kappa / (A * eps) ** p) * math.sqrt(t * (k / t) ** p * math.log(n / delta))
    valid = kappa >= 5.0 * A ** (2 * p) * (eps / (1.0 - eps)) ** (p - 1)
    return lam, valid


def threshold_lambda_general(
    n: int,
    k: int,
    p: int,
    t: int,
    ell: int,
    A: float = 1.0,
    eps: float = 0.5,
    kappa: float = 5.0,
    delta: float = 0.01,
) -> tuple[float, bool]:
    """Threshold for the ell-distinct-factor spike: extra sqrt(ell) factor."""
    lam, valid = threshold_lambda(n, k, p, t, 1, A, eps, kappa, delta)
    return lam * math.sqrt(ell), valid


def match_supports(
    recovered: list[frozenset[int]],
    truth: list[frozenset[int]],
    argmax_values: list[float] | None = None,
    wall_times: list[float] | None = None,
) -> RecoveryReport:
    """Greedy maximum-overlap bijection between recovered and truth supports."""
    if len(recovered) != len(truth):
        raise ValueError(f"length mismatch: {len(recovered)} vs {len(truth)}")
    r = len(recovered)
    pairs = sorted(
        ((i, j) for i in range(r) for j in range(r)),
        key=lambda ij: (-len(recovered[ij[0]] & truth[ij[1]]), ij[0], ij[1]),
    )
    matching = [-1] * r
    used_truth: set[int] = set()
    for i, j in pairs:
        if matching[i] == -1 and j not in used_truth:
            matching[i] = j
            used_truth.add(j)
    exact = [recovered[i] == truth[matching[i]] for i in range(r)]
    overlap = [
        len(recovered[i] & truth[matching[i]]) / max(len(truth[matching[i]]), 1)
        for i in range(r)
    ]
    return RecoveryReport(
        recovered=list(recovered),
        matching=matching,
        exact=exact,
        overlap=overlap,
        argmax_values=list(argmax_values or []),
        wall_times=list(wall_times or []),
    )


def distinguish(Y: DenseTensor, xhat: DenseUnitVector, k: int, C: float = 2.0) -> str:
    """'planted' iff |<Y, xhat^{xp}>| >= C sqrt(k ln n), else 'null'."""
    stat = abs(rank1_inner(Y, [xhat] * Y.p))
    return "planted" if stat >= C * math.sqrt(k * math.log(Y.n)) else "null"


def recover_and_report(
    Y: DenseTensor,
    k: int,
    t: int,
    r: int,
    seed: int,
    truth: list[frozenset[int]],
    workers: int = 1,
) -> RecoveryReport:
    """Run multi-spike recovery and match against known truth supports."""
    start = time.perf_counter()
    recovered, values = recover_multi(Y, k, t, r, seed, workers)
    elapsed = time.perf_counter() - start
    return match_supports(recovered, truth, values, [elapsed])
