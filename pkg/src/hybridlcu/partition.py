"""Set partitions of the term indices and the reduction factor R.

Partitioning the index set of an LCU decomposition fixes which terms are
implemented coherently (inside one group, sharing a block encoding) and
which interferences are simulated virtually (across groups). The reduction
factor

    R = sum_k q_k tr[K_k^dag K_k rho],   q_k = sum_{i in S_k} p_i,

is the second-moment scale of the hybrid estimator and satisfies
``P <= R <= 1`` with the coherent/singleton partitions attaining the
extremes. Everything here is computed from explicitly assembled group
operators; this module is the ground-truth oracle for the shot sampler.

Indices are 0-based internally; the text form (``1,2|3|4,5``) is 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lcu, qcore
from .qcore import TOL

__all__ = [
    "PartitionError",
    "OverlapError",
    "GapError",
    "EmptyGroupError",
    "Partition",
    "validate",
    "group_operators",
    "GroupOperator",
    "reduction_factor",
    "reduction_factor_obs",
    "is_refinement",
    "split_delta",
    "fragment_bound",
    "harmonic_mean",
    "tail_bound_R",
    "enumerate_partitions",
    "MAX_ENUM_M",
]

MAX_ENUM_M = 10  # B(10) = 115975; enumeration beyond this blows up


class PartitionError(ValueError):
    pass


class OverlapError(PartitionError):
    pass


class GapError(PartitionError):
    pass


class EmptyGroupError(PartitionError):
    pass


class Partition:
    """Canonicalized set partition of ``range(m)``.

    Groups are ordered by least member, members ascending, so equal
    partitions are structurally equal.
    """

    def __init__(self, groups, m: int):
        canon = tuple(sorted((tuple(sorted(g)) for g in groups), key=lambda g: g[0]))
        self.groups = canon
        self.m = m
        self.G = len(canon)

    def __eq__(self, other):
        return isinstance(other, Partition) and self.groups == other.groups and self.m == other.m

    def __hash__(self):
        return hash((self.groups, self.m))

    def __repr__(self):
        return f"Partition({self.to_text()!r}, m={self.m})"

    def to_text(self) -> str:
        return "|".join(",".join(str(i + 1) for i in g) for g in self.groups)

    @classmethod
    def from_text(cls, text: str, m: int) -> "Partition":
        groups = []
        for chunk in text.split("|"):
            idx = [int(tok) - 1 for tok in chunk.split(",") if tok.strip()]
            groups.append(idx)
        return validate(groups, m)

    @classmethod
    def coherent(cls, m: int) -> "Partition":
        return cls([tuple(range(m))], m)

    @classmethod
    def singletons(cls, m: int) -> "Partition":
        return cls([(i,) for i in range(m)], m)


def validate(groups, m: int) -> Partition:
    """Check disjoint cover of ``range(m)`` and return the canonical form."""
    seen: set[int] = set()
    cleaned = []
    for g in groups:
        g = [int(i) for i in g]
        if not g:
            raise EmptyGroupError("partition contains an empty group")
        for i in g:
            if i < 0 or i >= m:
                raise PartitionError(f"index {i} outside range(0, {m})")
            if i in seen:
                raise OverlapError(f"index {i} appears in more than one group")
            seen.add(i)
        cleaned.append(g)
    if len(seen) != m:
        missing = sorted(set(range(m)) - seen)
        raise GapError(f"indices {missing} not covered by any group")
    return Partition(cleaned, m)


@dataclass(frozen=True)
class GroupOperator:
    """Weight, normalized operator and member indices of one group."""

    weight: float
    operator: np.ndarray
    members: tuple[int, ...]


def group_operators(dec: lcu.LcuDecomposition, part: Partition) -> list[GroupOperator]:
    """Assemble ``q_k = sum p_i`` and ``K_k = sum (p_i/q_k) U_i`` per group."""
    if part.m != dec.m:
        raise ValueError(f"partition over {part.m} indices, decomposition has {dec.m} terms")
    ops = []
    for g in part.groups:
        q = float(sum(dec.probs[i] for i in g))
        k = np.zeros((dec.dimension, dec.dimension), dtype=complex)
        for i in g:
            k += (dec.probs[i] / q) * dec.terms[i].unitary
        k.setflags(write=False)
        ops.append(GroupOperator(weight=q, operator=k, members=tuple(g)))
    return ops


def reduction_factor(dec: lcu.LcuDecomposition, part: Partition, state) -> float:
    """``R = sum_k q_k tr[K_k^dag K_k rho]``."""
    rho = qcore.density(state)
    total = 0.0
    for g in group_operators(dec, part):
        total += g.weight * float(np.trace(g.operator.conj().T @ g.operator @ rho).real)
    return total


def reduction_factor_obs(dec: lcu.LcuDecomposition, part: Partition, state, obs) -> float:
    """``R^O = sum_k q_k tr[O^2 K_k rho K_k^dag]``, the sampler's E[g^2]."""
    rho = qcore.density(state)
    o = obs.matrix if isinstance(obs, qcore.Observable) else qcore.require_hermitian(obs, what="observable")
    o2 = o @ o
    total = 0.0
    for g in group_operators(dec, part):
        total += g.weight * float(np.trace(o2 @ g.operator @ rho @ g.operator.conj().T).real)
    return total


def is_refinement(fine: Partition, coarse: Partition) -> bool:
    """True iff every group of ``fine`` lies inside one group of ``coarse``."""
    if fine.m != coarse.m:
        raise ValueError("partitions are over different index sets")
    owner = {}
    for gi, g in enumerate(coarse.groups):
        for i in g:
            owner[i] = gi
    for g in fine.groups:
        owners = {owner[i] for i in g}
        if len(owners) != 1:
            return False
    return True


def split_delta(dec, part: Partition, group_idx: int, subset_a, state, obs) -> float:
    """Exact increase of R^O when one group is split in two.

    Splitting group ``S`` into ``A`` and ``B = S \\ A`` changes R^O by

        (q_A q_B / (q_A + q_B)) tr[(O K_A - O K_B)^dag (O K_A - O K_B) rho]

    which is manifestly nonnegative (refinement can only raise R^O).
    """
    group = part.groups[group_idx]
    sub_a = tuple(sorted(int(i) for i in subset_a))
    if not sub_a or not set(sub_a) < set(group):
        raise ValueError(f"subset {sub_a} is not a proper nonempty subset of group {group}")
    sub_b = tuple(i for i in group if i not in sub_a)

    rho = qcore.density(state)
    o = obs.matrix if isinstance(obs, qcore.Observable) else qcore.require_hermitian(obs, what="observable")

    def weight_and_op(idx):
        q = float(sum(dec.probs[i] for i in idx))
        k = sum((dec.probs[i] / q) * dec.terms[i].unitary for i in idx)
        return q, k

    q_a, k_a = weight_and_op(sub_a)
    q_b, k_b = weight_and_op(sub_b)
    diff = o @ k_a - o @ k_b
    val = (q_a * q_b / (q_a + q_b)) * float(np.trace(diff.conj().T @ diff @ rho).real)
    return val


def fragment_bound(weights, group_idx: int, obs) -> float:
    """Lemma bound ``|O^2| q_G`` on the R^O cost of fully fragmenting a group."""
    o_norm = obs.spectral_norm if isinstance(obs, qcore.Observable) else qcore.Observable(obs).spectral_norm
    return o_norm**2 * float(weights[group_idx])


def harmonic_mean(a: float, b: float) -> float:
    if a < 0 or b < 0:
        raise ValueError("harmonic mean takes nonnegative arguments")
    if a + b == 0:
        return 0.0
    return 2.0 * a * b / (a + b)


def tail_bound_R(q_a: float, q_b: float, p: float) -> float:
    """Upper bound ``P + q_B + 2 H(q_A, q_B)`` on R for {S_A} + fragmented S_B."""
    return p + q_b + 2.0 * harmonic_mean(q_a, q_b)


def enumerate_partitions(m: int) -> list[Partition]:
    """All set partitions of ``range(m)`` (count = Bell number B(m))."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > MAX_ENUM_M:
        raise ValueError(f"enumeration capped at m = {MAX_ENUM_M}")
    out: list[Partition] = []

    def extend(i: int, groups: list[list[int]]):
        if i == m:
            out.append(Partition([tuple(g) for g in groups], m))
            return
        for g in groups:
            g.append(i)
            extend(i + 1, groups)
            g.pop()
        groups.append([i])
        extend(i + 1, groups)
        groups.pop()

    extend(0, [])
    return out
