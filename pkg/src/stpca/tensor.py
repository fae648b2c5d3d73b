"""Dense order-p tensors and sparse rank-one contractions.

Tensors are stored flat in lexicographic ("row-major") order over 1-based
p-tuples; linear indices are 0-based. All recovery algorithms are built on
three primitives: rank-one inner products, leave-one-mode contractions, and
rank-one updates. When every factor is sparse these touch only support
combinations (O(prod t_i) work instead of O(n^p)).
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

# n^p doubles; 2^27 * 8 bytes = 1 GiB
DEFAULT_ENTRY_CAP = 2**27

SSTF1_MAGIC = b"SSTF1"
SSTF1_VERSION = 1


class CapacityError(ValueError):
    """Requested tensor would exceed the entry cap."""


class DimensionMismatchError(ValueError):
    """Operands disagree on ambient dimension or order."""


def check_capacity(n: int, p: int, entry_cap: int = DEFAULT_ENTRY_CAP) -> int:
    """Return n**p, refusing sizes above the cap."""
    if n < 1 or p < 2:
        raise ValueError(f"need n >= 1 and p >= 2, got n={n}, p={p}")
    size = n**p
    if size > entry_cap:
        raise CapacityError(
            f"tensor with n={n}, p={p} has {size} entries, cap is {entry_cap}"
        )
    return size


def flat_index(coords: tuple[int, ...], n: int) -> int:
    """Map a 1-based p-tuple to its 0-based lexicographic linear index."""
    idx = 0
    for c in coords:
        if not 1 <= c <= n:
            raise IndexError(f"coordinate {c} out of range [1, {n}]")
        idx = idx * n + (c - 1)
    return idx


def unflatten(idx: int, n: int, p: int) -> tuple[int, ...]:
    """Inverse of :func:`flat_index`."""
    if not 0 <= idx < n**p:
        raise IndexError(f"linear index {idx} out of range [0, {n**p})")
    coords = []
    for _ in range(p):
        coords.append(idx % n + 1)
        idx //= n
    return tuple(reversed(coords))


@dataclass(frozen=True)
class SparseSignVector:
    """Element of U_t: t-sparse flat vector with entries in {-1/sqrt(t), 0, +1/sqrt(t)}.

    support is strictly increasing, 1-based. The nonzero magnitude 1/sqrt(t)
    is implicit, so the induced vector has unit norm exactly.
    """

    n: int
    support: tuple[int, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        t = len(self.support)
        if t < 1 or t > self.n:
            raise ValueError(f"sparsity {t} out of range [1, {self.n}]")
        if len(self.signs) != t:
            raise ValueError("signs and support lengths differ")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be +-1")
        prev = 0
        for i in self.support:
            if not prev < i <= self.n:
                raise ValueError("support must be strictly increasing in [1, n]")
            prev = i

    @property
    def t(self) -> int:
        return len(self.support)

    def entries(self) -> list[tuple[int, float]]:
        """(1-based index, value) pairs of the nonzero entries."""
        mag = 1.0 / np.sqrt(self.t)
        return [(i, s * mag) for i, s in zip(self.support, self.signs)]

    def to_dense(self) -> np.ndarray:
        v = np.zeros(self.n)
        mag = 1.0 / np.sqrt(self.t)
        for i, s in zip(self.support, self.signs):
            v[i - 1] = s * mag
        return v


@dataclass(frozen=True)
class DenseUnitVector:
    """Unit vector in R^n with an explicit entry array; k counts nonzeros."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (self.n,):
            raise DimensionMismatchError(f"expected shape ({self.n},), got {vals.shape}")
        object.__setattr__(self, "values", vals)
        norm = float(np.linalg.norm(vals))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"not a unit vector: ||v|| = {norm}")

    @property
    def k(self) -> int:
        return int(np.count_nonzero(self.values))

    def support_set(self) -> frozenset[int]:
        """1-based indices of nonzero entries."""
        return frozenset(int(i) + 1 for i in np.nonzero(self.values)[0])

    def to_dense(self) -> np.ndarray:
        return self.values


FactorVector = SparseSignVector | DenseUnitVector


@dataclass(frozen=True)
class DenseTensor:
    """Dense order-p tensor over R^n, flat lexicographic float64 storage."""

    n: int
    p: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        size = check_capacity(self.n, self.p)
        data = np.asarray(self.data, dtype=np.float64)
        if data.shape != (size,):
            raise ValueError(f"expected {size} entries, got shape {data.shape}")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, n: int, p: int) -> DenseTensor:
        return cls(n, p, np.zeros(check_capacity(n, p)))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> DenseTensor:
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr.shape[0], arr.ndim, arr.reshape(-1))

    def as_ndarray(self) -> np.ndarray:
        """Read-only view shaped (n,) * p."""
        return self.data.reshape((self.n,) * self.p)

    def __getitem__(self, coords: tuple[int, ...]) -> float:
        return float(self.data[flat_index(coords, self.n)])

    def max_abs_diff(self, other: DenseTensor) -> float:
        _check_same_shape(self, other)
        return float(np.max(np.abs(self.data - other.data)))


def _check_same_shape(a: DenseTensor, b: DenseTensor) -> None:
    if a.n != b.n or a.p != b.p:
        raise DimensionMismatchError(
            f"shape mismatch: (n={a.n}, p={a.p}) vs (n={b.n}, p={b.p})"
        )


def _check_factor(Y: DenseTensor, v: FactorVector) -> None:
    if v.n != Y.n:
        raise DimensionMismatchError(f"factor dimension {v.n} != tensor dimension {Y.n}")


def rank1_inner(Y: DenseTensor, factors: list[FactorVector]) -> float:
    """<Y, u_1 x ... x u_p>, the rank-one inner product.

    When all factors are sparse, only support combinations are touched.
    Otherwise falls back to dense mode-by-mode contraction.
    """
    if len(factors) != Y.p:
        raise DimensionMismatchError(f"need {Y.p} factors, got {len(factors)}")
    for v in factors:
        _check_factor(Y, v)
    if all(isinstance(v, SparseSignVector) for v in factors):
        n = Y.n
        total = 0.0
        for combo in itertools.product(*(v.entries() for v in factors)):
            idx = 0
            coeff = 1.0
            for i, val in combo:
                idx = idx * n + (i - 1)
                coeff *= val
            total += coeff * Y.data[idx]
        return total
    acc = Y.as_ndarray()
    for v in factors:
        acc = np.tensordot(acc, v.to_dense(), axes=([0], [0]))
    return float(acc)


def contract_leave_one(Y: DenseTensor, v: SparseSignVector) -> np.ndarray:
    """alpha with alpha_l = <Y, v^{x(p-1)} x e_l>; the free slot is the last mode.

    One pass costing O(t^{p-1} * n).
    """
    _check_factor(Y, v)
    return contract_leave_mode(Y, [v] * (Y.p - 1) + [v], Y.p - 1)


def contract_leave_mode(
    Y: DenseTensor, factors: list[FactorVector], free_mode: int
) -> np.ndarray:
    """All n values of <Y, u_1 x ... x e_l at free_mode x ... x u_p>.

    factors[free_mode] is ignored. Sparse factors contribute only their
    support combinations; dense factors force a dense contraction.
    """
    if len(factors) != Y.p:
        raise DimensionMismatchError(f"need {Y.p} factors, got {len(factors)}")
    fixed = [v for m, v in enumerate(factors) if m != free_mode]
    for v in fixed:
        _check_factor(Y, v)
    n = Y.n
    if all(isinstance(v, SparseSignVector) for v in fixed):
        nd = Y.as_ndarray()
        alpha = np.zeros(n)
        for combo in itertools.product(*(v.entries() for v in fixed)):
            coeff = 1.0
            key: list = []
            ci = iter(combo)
            for m in range(Y.p):
                if m == free_mode:
                    key.append(slice(None))
                else:
                    i, val = next(ci)
                    key.append(i - 1)
                    coeff *= val
            alpha += coeff * nd[tuple(key)]
        return alpha
    acc = Y.as_ndarray()
    # contract fixed modes back to front; lower axis indices stay put
    for m in reversed(range(Y.p)):
        if m == free_mode:
            continue
        acc = np.tensordot(acc, factors[m].to_dense(), axes=([m], [0]))
    return np.asarray(acc, dtype=np.float64)


def add_rank1(Y: DenseTensor, lam: float, factors: list[FactorVector]) -> DenseTensor:
    """Return Y + lam * u_1 x ... x u_p as a new tensor."""
    if len(factors) != Y.p:
        raise DimensionMismatchError(f"need {Y.p} factors, got {len(factors)}")
    for v in factors:
        _check_factor(Y, v)
    if lam == 0.0:
        return DenseTensor(Y.n, Y.p, Y.data)
    n = Y.n
    out = Y.data.copy()
    if all(isinstance(v, SparseSignVector) for v in factors):
        for combo in itertools.product(*(v.entries() for v in factors)):
            idx = 0
            coeff = lam
            for i, val in combo:
                idx = idx * n + (i - 1)
                coeff *= val
            out[idx] += coeff
        return DenseTensor(n, Y.p, out)
    spike = factors[0].to_dense()
    for v in factors[1:]:
        spike = np.multiply.outer(spike, v.to_dense())
    out += lam * spike.reshape(-1)
    return DenseTensor(n, Y.p, out)


def write_sstf1(Y: DenseTensor, path: str) -> None:
    """Write the binary SSTF1 format (magic, version, p, n, LE doubles)."""
    with open(path, "wb") as f:
        f.write(SSTF1_MAGIC)
        f.write(bytes([SSTF1_VERSION]))
        f.write(struct.pack("<II", Y.p, Y.n))
        f.write(Y.data.astype("<f8").tobytes())


def read_sstf1(path: str) -> DenseTensor:
    """Read an SSTF1 file; round-trips bit-exactly with :func:`write_sstf1`."""
    with open(path, "rb") as f:
        magic = f.read(5)
        if magic != SSTF1_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {SSTF1_MAGIC!r}")
        version = f.read(1)
        if version != bytes([SSTF1_VERSION]):
            raise ValueError(f"unsupported version byte {version!r}")
        p, n = struct.unpack("<II", f.read(8))
        size = check_capacity(n, p)
        data = np.frombuffer(f.read(size * 8), dtype="<f8")
        if data.shape != (size,):
            raise ValueError(f"truncated file: expected {size} doubles")
    return DenseTensor(n, p, data.astype(np.float64))
