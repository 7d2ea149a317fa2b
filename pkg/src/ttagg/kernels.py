"""Kinetic coefficient tensors in dense, tensor-train and CP form.

The central object is the symmetric d-way array of collision rate
coefficients for simultaneous d-particle mergers.  For generalized
Brownian coefficients (permutation-symmetrized products of power
functions of the particle sizes) an exact low-rank tensor-train
representation is built constructively; its ranks depend only on the
number of colliding particles, never on the number of size classes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

__all__ = [
    "KernelError",
    "BrownianSpec",
    "ConstantSpec",
    "TableSpec",
    "TTKernel",
    "CPKernel",
    "DenseKernel",
    "SubsetCodec",
    "brownian_element",
    "build_brownian_tt",
    "tt_element",
    "cp_element",
    "dense_from_spec",
    "dense_from_tt",
    "dense_from_cp",
    "tt_max_rank_bound",
    "constant_tt",
    "constant_cp",
]

# D! permutations are enumerated literally; beyond this the sum is impractical.
PERMUTATION_GUARD = 8

# Default cap on N**D elements for any dense materialization.
DENSE_ELEMENT_BUDGET = 1 << 26


class KernelError(ValueError):
    """Malformed kernel data, out-of-range index, or budget violation."""


def _power(size: int, exponent: float) -> float:
    # size >= 1, so the log is safe; exp(mu*log i) handles fractional and
    # negative exponents uniformly (i**0 == 1 exactly).
    return math.exp(exponent * math.log(size))


def _power_vector(n_classes: int, exponent: float) -> np.ndarray:
    sizes = np.arange(1, n_classes + 1, dtype=np.float64)
    return np.exp(exponent * np.log(sizes))


def _validated_index(idx, dimension: int, n_classes: int | None = None) -> tuple[int, ...]:
    entries = tuple(int(i) for i in idx)
    if len(entries) != dimension:
        raise KernelError(
            f"index has {len(entries)} entries, kernel dimension is {dimension}"
        )
    for i in entries:
        if i < 1:
            raise KernelError(f"size indices are 1-based, got {i}")
        if n_classes is not None and i > n_classes:
            raise KernelError(f"index {i} outside [1, {n_classes}]")
    return entries


# ---------------------------------------------------------------------------
# kernel specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BrownianSpec:
    """Exponent vector (mu_1, ..., mu_D) of a generalized Brownian kernel."""

    exponents: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "exponents", tuple(float(m) for m in self.exponents))
        if len(self.exponents) < 2:
            raise KernelError("a Brownian kernel needs at least two exponents")

    @property
    def dimension(self) -> int:
        return len(self.exponents)


@dataclass(frozen=True)
class ConstantSpec:
    """Kernel with every coefficient equal to `value`."""

    value: float
    dimension: int

    def __post_init__(self):
        if self.dimension < 2:
            raise KernelError("kernel dimension must be >= 2")


@dataclass(frozen=True)
class TableSpec:
    """Kernel read from a file of N**D coefficients in row-major index order.

    The file is either flat binary (little-endian 64-bit floats) or
    whitespace-separated text; the format is detected from the file size.
    """

    path: str
    dimension: int

    def __post_init__(self):
        if self.dimension < 2:
            raise KernelError("kernel dimension must be >= 2")


# ---------------------------------------------------------------------------
# tensor containers
# ---------------------------------------------------------------------------

def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TTKernel:
    """Tensor-train kernel: a chain of 3-way cores of shape (R_prev, N, R_next).

    An element is the product of the matrix slices taken at the size
    indices; boundary ranks are 1 so the chain collapses to a scalar.
    """

    cores: tuple[np.ndarray, ...]

    def __post_init__(self):
        cores = tuple(_readonly(c) for c in self.cores)
        if len(cores) < 2:
            raise KernelError("a TT kernel needs at least two cores")
        for lam, core in enumerate(cores, start=1):
            if core.ndim != 3:
                raise KernelError(f"core {lam} is not a 3-way array")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise KernelError("boundary TT ranks must equal 1")
        n_classes = cores[0].shape[1]
        for lam in range(len(cores)):
            if cores[lam].shape[1] != n_classes:
                raise KernelError("all cores must share the same mode size")
            if lam and cores[lam - 1].shape[2] != cores[lam].shape[0]:
                raise KernelError(
                    f"rank mismatch between cores {lam} and {lam + 1}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def dimension(self) -> int:
        return len(self.cores)

    @property
    def n_classes(self) -> int:
        return self.cores[0].shape[1]

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def max_rank(self) -> int:
        return max(self.ranks)


@dataclass(frozen=True)
class CPKernel:
    """Canonical polyadic kernel: one N x R factor matrix per mode.

    No decomposition routine is provided; CP kernels are inputs, supplied
    by the user or known analytically.
    """

    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(_readonly(f) for f in self.factors)
        if len(factors) < 2:
            raise KernelError("a CP kernel needs at least two factors")
        shape = factors[0].shape
        if len(shape) != 2:
            raise KernelError("CP factors must be N x R matrices")
        for f in factors:
            if f.shape != shape:
                raise KernelError("all CP factors must share the same N x R shape")
        object.__setattr__(self, "factors", factors)

    @property
    def dimension(self) -> int:
        return len(self.factors)

    @property
    def n_classes(self) -> int:
        return self.factors[0].shape[0]

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]


@dataclass(frozen=True)
class DenseKernel:
    """Fully materialized kernel, used as ground truth at small N."""

    values: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values)
        if values.ndim < 2:
            raise KernelError("dense kernels must have dimension >= 2")
        n_classes = values.shape[0]
        if any(s != n_classes for s in values.shape):
            raise KernelError("dense kernels must have equal mode sizes")
        object.__setattr__(self, "values", values)

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# subset bookkeeping for the constructive TT builder
# ---------------------------------------------------------------------------

class SubsetCodec:
    """Bijection between rank indices and the level-subsets of {1, ..., D}.

    Rank index r (0-based) maps to the r-th subset of the given size in
    colexicographic order; subsets are stored with strictly increasing
    1-based mode labels.  Colex order is stable and cheap to invert, so
    cores built from it are reproducible bit for bit.
    """

    def __init__(self, dimension: int, level: int):
        if dimension < 1:
            raise KernelError("dimension must be >= 1")
        if not 0 <= level <= dimension:
            raise KernelError(f"subset size {level} outside [0, {dimension}]")
        self.dimension = dimension
        self.level = level
        subs = sorted(
            combinations(range(1, dimension + 1), level), key=lambda s: s[::-1]
        )
        self.subsets: tuple[tuple[int, ...], ...] = tuple(subs)
        self._rank_of = {s: r for r, s in enumerate(self.subsets)}

    def __len__(self) -> int:
        return len(self.subsets)

    def decode(self, rank: int) -> tuple[int, ...]:
        if not 0 <= rank < len(self.subsets):
            raise KernelError(f"rank {rank} outside [0, {len(self.subsets)})")
        return self.subsets[rank]

    def encode(self, subset) -> int:
        key = tuple(sorted(int(s) for s in subset))
        try:
            return self._rank_of[key]
        except KeyError:
            raise KernelError(f"{key} is not a {self.level}-subset of 1..{self.dimension}") from None


# ---------------------------------------------------------------------------
# element evaluators
# ---------------------------------------------------------------------------

def brownian_element(spec: BrownianSpec, idx) -> float:
    """Coefficient at a multi-index: sum over all permutations of the index
    entries of the product of per-slot powers.

    Symmetric in the index by construction.  The D! permutations are
    enumerated literally, so the dimension is capped at PERMUTATION_GUARD.
    """
    d = spec.dimension
    if d > PERMUTATION_GUARD:
        raise KernelError(
            f"permutation enumeration capped at dimension {PERMUTATION_GUARD}, got {d}"
        )
    entries = _validated_index(idx, d)
    total = 0.0
    for perm in permutations(entries):
        term = 1.0
        for size, mu in zip(perm, spec.exponents):
            term *= _power(size, mu)
        total += term
    return total


def tt_element(kernel: TTKernel, idx) -> float:
    """Evaluate one kernel coefficient by chaining the core slices."""
    entries = _validated_index(idx, kernel.dimension, kernel.n_classes)
    v = kernel.cores[0][:, entries[0] - 1, :]
    for size, core in zip(entries[1:], kernel.cores[1:]):
        v = v @ core[:, size - 1, :]
    return float(v[0, 0])


def cp_element(kernel: CPKernel, idx) -> float:
    """Evaluate one kernel coefficient: sum over ranks of factor products."""
    entries = _validated_index(idx, kernel.dimension, kernel.n_classes)
    acc = np.ones(kernel.rank)
    for size, factor in zip(entries, kernel.factors):
        acc = acc * factor[size - 1]
    return float(acc.sum())


# ---------------------------------------------------------------------------
# constructive TT builder
# ---------------------------------------------------------------------------

def build_brownian_tt(spec: BrownianSpec, n_classes: int) -> TTKernel:
    """Exact TT representation of a generalized Brownian kernel.

    Rank index r at level lam stands for a lam-subset of exponent labels;
    the partial chain up to level lam reproduces the lower-dimensional
    kernel over exactly those exponents.  A core entry connecting subset S
    to subset T is the power function for the single label T \\ S when S is
    contained in T, and zero otherwise.  The resulting ranks are the
    binomial coefficients C(D, lam), independent of n_classes.
    """
    if n_classes < 1:
        raise KernelError("n_classes must be >= 1")
    d = spec.dimension
    pows = [_power_vector(n_classes, mu) for mu in spec.exponents]
    codecs = [SubsetCodec(d, lam) for lam in range(d + 1)]

    cores = []
    first = np.zeros((1, n_classes, d))
    for r, (label,) in enumerate(codecs[1].subsets):
        first[0, :, r] = pows[label - 1]
    cores.append(first)

    for lam in range(2, d + 1):
        prev, cur = codecs[lam - 1], codecs[lam]
        core = np.zeros((len(prev), n_classes, len(cur)))
        for rc, subset in enumerate(cur.subsets):
            for label in subset:
                rest = tuple(x for x in subset if x != label)
                core[prev.encode(rest), :, rc] = pows[label - 1]
        cores.append(core)

    return TTKernel(tuple(cores))


def tt_max_rank_bound(dimension: int) -> int:
    """Largest TT rank attained by the constructive Brownian build."""
    if dimension < 2:
        raise KernelError("kernel dimension must be >= 2")
    return math.comb(dimension, math.ceil(dimension / 2))


def constant_tt(value: float, dimension: int, n_classes: int) -> TTKernel:
    """Rank-1 TT kernel with every coefficient equal to `value`."""
    if dimension < 2:
        raise KernelError("kernel dimension must be >= 2")
    cores = [np.ones((1, n_classes, 1)) for _ in range(dimension)]
    cores[0] *= float(value)
    return TTKernel(tuple(cores))


def constant_cp(value: float, dimension: int, n_classes: int) -> CPKernel:
    """Rank-1 CP kernel with every coefficient equal to `value`."""
    if dimension < 2:
        raise KernelError("kernel dimension must be >= 2")
    factors = [np.ones((n_classes, 1)) for _ in range(dimension)]
    factors[0] *= float(value)
    return CPKernel(tuple(factors))


# ---------------------------------------------------------------------------
# dense expansions (verification oracles)
# ---------------------------------------------------------------------------

def _check_budget(n_classes: int, dimension: int, element_budget: int) -> None:
    elements = n_classes**dimension
    if elements > element_budget:
        raise KernelError(
            f"dense kernel would hold {elements} elements, over the budget of "
            f"{element_budget}; reduce N or raise element_budget"
        )


def _load_table(path: str, dimension: int, n_classes: int) -> np.ndarray:
    expected = n_classes**dimension
    if not os.path.exists(path):
        raise KernelError(f"kernel table file not found: {path}")
    if os.path.getsize(path) == expected * 8:
        flat = np.fromfile(path, dtype="<f8")
    else:
        try:
            flat = np.loadtxt(path, dtype=np.float64).ravel()
        except (ValueError, UnicodeDecodeError) as exc:
            raise KernelError(
                f"kernel table {path} could not be read: expected {expected} "
                f"binary doubles or text values ({exc})"
            ) from None
    if flat.size != expected:
        raise KernelError(
            f"kernel table {path} holds {flat.size} values, expected {expected}"
        )
    return flat.reshape((n_classes,) * dimension)


def dense_from_spec(
    spec,
    n_classes: int,
    *,
    element_budget: int = DENSE_ELEMENT_BUDGET,
) -> DenseKernel:
    """Materialize a kernel specification as a full D-way array."""
    d = spec.dimension
    _check_budget(n_classes, d, element_budget)
    if isinstance(spec, ConstantSpec):
        values = np.full((n_classes,) * d, float(spec.value))
    elif isinstance(spec, TableSpec):
        values = _load_table(spec.path, d, n_classes)
    elif isinstance(spec, BrownianSpec):
        if d > PERMUTATION_GUARD:
            raise KernelError(
                f"permutation enumeration capped at dimension {PERMUTATION_GUARD}, got {d}"
            )
        pows = [_power_vector(n_classes, mu) for mu in spec.exponents]
        values = np.zeros((n_classes,) * d)
        # Each permutation assigns exponent slot perm[m] to mode m.
        for perm in permutations(range(d)):
            term = pows[perm[0]]
            for m in range(1, d):
                term = np.multiply.outer(term, pows[perm[m]])
            values += term
    else:
        raise KernelError(f"unsupported kernel specification {type(spec).__name__}")
    return DenseKernel(values)


def dense_from_tt(
    kernel: TTKernel, *, element_budget: int = DENSE_ELEMENT_BUDGET
) -> DenseKernel:
    """Contract all TT cores into the full array."""
    _check_budget(kernel.n_classes, kernel.dimension, element_budget)
    out = kernel.cores[0][0]  # (N, R1)
    for core in kernel.cores[1:]:
        out = np.tensordot(out, core, axes=([out.ndim - 1], [0]))
    return DenseKernel(out[..., 0])


def dense_from_cp(
    kernel: CPKernel, *, element_budget: int = DENSE_ELEMENT_BUDGET
) -> DenseKernel:
    """Expand a CP kernel as the sum of its rank-1 terms."""
    _check_budget(kernel.n_classes, kernel.dimension, element_budget)
    values = np.zeros((kernel.n_classes,) * kernel.dimension)
    for r in range(kernel.rank):
        term = kernel.factors[0][:, r]
        for factor in kernel.factors[1:]:
            term = np.multiply.outer(term, factor[:, r])
        values += term
    return DenseKernel(values)
