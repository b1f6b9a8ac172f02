"""The interpolating channel between coherent and randomized LCU.

Given a decomposition and a partition of its term indices, each group
``S_k`` gets a block encoding ``L_k`` of its normalized operator ``K_k``;
cross-group interference is recovered virtually by a controlled pair of
encodings and an X-basis measurement on a one-qubit register B. A single
shot samples a pair ``(k, k')`` with probability ``q_k q_k'``, runs the
pair circuit, and reports

    g = (-1)^b * [z == 0] * o_j

whose mean over shots is ``tr[O K_lcu rho K_lcu^dag]`` and whose second
moment is ``sum_k q_k tr[O^2 K_k rho K_k^dag]``.

Two independent evaluation routes are kept deliberately separate: the
analytic backend works with the group operators directly, the circuit
backend multiplies out the explicit block-encoding unitaries. They must
agree to 1e-9; the exhaustive outcome distribution is the oracle for the
sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lcu, partition as partition_mod, prng, qcore
from .qcore import TOL

__all__ = [
    "BlockEncoding",
    "HybridChannel",
    "OutcomeRecord",
    "DegenerateRoundError",
    "build_block_encoding",
    "build_controlled_pair",
    "exact_expectation",
    "second_moment",
    "outcome_distribution",
    "Sampler",
    "SampleArrays",
    "sample_g",
    "sample_shots",
    "compose_rounds",
    "expectation_rounds",
    "write_shot_csv",
]


class DegenerateRoundError(ValueError):
    """A multi-round composition hit an intermediate state of vanishing trace."""


@dataclass(frozen=True)
class BlockEncoding:
    """Unitary ``L`` on (ancilla x system) whose zero-ancilla block is ``K``."""

    ancilla_qubits: int
    unitary: np.ndarray
    operator: np.ndarray
    members: tuple[int, ...]


def _householder_prepare(column: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix whose first column is the given unit vector."""
    dim = column.size
    v = column.astype(float).copy()
    v[0] -= 1.0
    nrm2 = float(v @ v)
    if nrm2 < 1e-28:
        return np.eye(dim)
    return np.eye(dim) - (2.0 / nrm2) * np.outer(v, v)


def build_block_encoding(group: partition_mod.GroupOperator, dec: lcu.LcuDecomposition) -> BlockEncoding:
    """PREPARE/SELECT block encoding of one group operator.

    PREPARE may be completed from its first column ``sqrt(p_i/q_k)`` by any
    unitary; a Householder reflection is used here. SELECT applies ``U_i``
    on member indices and the identity on padding indices. A singleton
    group needs no ancilla at all: ``L_k = U_i``.
    """
    members = group.members
    d = dec.dimension
    if len(members) == 1:
        u = dec.terms[members[0]].unitary
        return BlockEncoding(0, u, group.operator, members)
    a = math.ceil(math.log2(len(members)))
    na = 2**a
    column = np.zeros(na)
    for slot, i in enumerate(members):
        column[slot] = math.sqrt(dec.probs[i] / group.weight)
    prepare = _householder_prepare(column)
    select = np.zeros((na * d, na * d), dtype=complex)
    eye = np.eye(d)
    for slot in range(na):
        block = dec.terms[members[slot]].unitary if slot < len(members) else eye
        select[slot * d : (slot + 1) * d, slot * d : (slot + 1) * d] = block
    big_pre = np.kron(prepare, eye)
    l_mat = big_pre.conj().T @ select @ big_pre
    enc = BlockEncoding(a, l_mat, group.operator, members)
    top = l_mat[:d, :d]
    if np.linalg.norm(top - group.operator) > TOL.unitarity:
        raise AssertionError("block-encoding invariant violated")
    return enc


def _pad_encoding(enc: BlockEncoding, a_star: int) -> np.ndarray:
    """Tensor identity ancillas on the left so all encodings share width a*."""
    extra = a_star - enc.ancilla_qubits
    if extra == 0:
        return enc.unitary
    return np.kron(np.eye(2**extra), enc.unitary)


def build_controlled_pair(l_k: np.ndarray, l_kprime: np.ndarray) -> np.ndarray:
    """``|0><0|_B (x) L_k' + |1><1|_B (x) L_k`` on (B x ancilla x system).

    The primed encoding sits on the zero branch. Both inputs must already
    be padded to the common ancilla width.
    """
    if l_k.shape != l_kprime.shape:
        raise ValueError("encodings must be padded to a common shape first")
    n = l_k.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[:n, :n] = l_kprime
    out[n:, n:] = l_k
    return out


class HybridChannel:
    """Decomposition + partition with group operators and block encodings."""

    def __init__(self, dec: lcu.LcuDecomposition, part: partition_mod.Partition):
        self.decomposition = dec
        self.partition = part
        self.group_ops = partition_mod.group_operators(dec, part)
        self.weights = np.array([g.weight for g in self.group_ops])
        self.weights.setflags(write=False)
        self.G = len(self.group_ops)
        self.a_star = max(math.ceil(math.log2(len(g.members))) if len(g.members) > 1 else 0 for g in self.group_ops)
        self.dimension = dec.dimension
        self._encodings: list[BlockEncoding] | None = None
        self._padded: list[np.ndarray] | None = None
        pair_sum = float((self.weights[:, None] * self.weights[None, :]).sum())
        if abs(pair_sum - 1.0) > TOL.prob_norm:
            raise ValueError(f"pair weights sum to {pair_sum}, expected 1")

    @property
    def encodings(self) -> list[BlockEncoding]:
        if self._encodings is None:
            self._encodings = [build_block_encoding(g, self.decomposition) for g in self.group_ops]
        return self._encodings

    @property
    def padded_encodings(self) -> list[np.ndarray]:
        if self._padded is None:
            self._padded = [_pad_encoding(e, self.a_star) for e in self.encodings]
        return self._padded

    def klcu(self) -> np.ndarray:
        return lcu.assemble_klcu(self.decomposition)


def _as_observable(obs) -> qcore.Observable:
    return obs if isinstance(obs, qcore.Observable) else qcore.Observable(obs)


def exact_expectation(channel: HybridChannel, state, obs, backend: str = "analytic") -> float:
    """``tr[O Lambda(rho)]`` through either backend.

    analytic: symmetrized sum over group pairs of
    ``q_k q_k' Re tr[O K_k rho K_k'^dag]``. circuit: Born-rule value of the
    pair circuits with explicit block-encoding matrices.
    """
    rho = qcore.density(state)
    o = _as_observable(obs)
    if backend == "analytic":
        total = 0.0
        for gk in channel.group_ops:
            left = gk.operator @ rho
            for gkp in channel.group_ops:
                term = complex(np.trace(o.matrix @ left @ gkp.operator.conj().T))
                total += gk.weight * gkp.weight * term.real
        return total
    if backend == "circuit":
        return _circuit_expectation(channel, rho, o)
    raise ValueError(f"unknown backend {backend!r}")


def _circuit_expectation(channel: HybridChannel, rho: np.ndarray, o: qcore.Observable) -> float:
    na = 2**channel.a_star
    d = channel.dimension
    proj0 = np.zeros((na, na))
    proj0[0, 0] = 1.0
    pauli_x = np.array([[0.0, 1.0], [1.0, 0.0]])
    plus = np.full((2, 2), 0.5)
    init_as = np.kron(proj0, rho)
    meas_as = np.kron(proj0, o.matrix)
    total = 0.0
    padded = channel.padded_encodings
    for k, gk in enumerate(channel.group_ops):
        for kp, gkp in enumerate(channel.group_ops):
            w = gk.weight * gkp.weight
            if k == kp:
                # the B register never entangles here, so it is dropped
                l_mat = padded[k]
                val = np.trace(meas_as @ l_mat @ init_as @ l_mat.conj().T).real
            else:
                l_c = build_controlled_pair(padded[k], padded[kp])
                init = np.kron(plus, init_as)
                meas = np.kron(pauli_x, meas_as)
                val = np.trace(meas @ l_c @ init @ l_c.conj().T).real
            total += w * float(val)
    return total


def second_moment(channel: HybridChannel, state, obs) -> float:
    """``E[g^2] = sum_k q_k tr[O^2 K_k rho K_k^dag]``.

    The X_B cross term of the projected state carries a factor (-1)^b and
    cancels in g^2, leaving twice the I_B/2 term evaluated on O^2.
    """
    rho = qcore.density(state)
    o = _as_observable(obs)
    o2 = o.matrix @ o.matrix
    total = 0.0
    for g in channel.group_ops:
        total += g.weight * float(np.trace(o2 @ g.operator @ rho @ g.operator.conj().T).real)
    return total


def outcome_distribution(channel: HybridChannel, state, obs, k: int, kprime: int) -> np.ndarray:
    """Born probabilities over (z, b, j) for the fixed pair circuit.

    Returned array has shape ``(2, 2, d)`` indexed by the ancilla-projector
    bit z (0 = all-zero outcome), the X-basis bit b and the observable
    eigenindex j. For k = k' the B register is skipped and the whole b = 1
    plane is zero.
    """
    rho = qcore.density(state)
    o = _as_observable(obs)
    na = 2**channel.a_star
    d = channel.dimension
    padded = channel.padded_encodings
    proj0 = np.zeros((na, na))
    proj0[0, 0] = 1.0
    init_as = np.kron(proj0, rho)
    probs = np.zeros((2, 2, d))
    if k == kprime:
        l_mat = padded[k]
        final = l_mat @ init_as @ l_mat.conj().T
        basis = np.kron(np.eye(na), o.eigenvectors)
        diag = np.einsum("ij,jk,ki->i", basis.conj().T, final, basis).real
        diag = diag.reshape(na, d)
        probs[0, 0, :] = diag[0]
        probs[1, 0, :] = diag[1:].sum(axis=0) if na > 1 else 0.0
    else:
        l_c = build_controlled_pair(padded[k], padded[kprime])
        plus = np.full((2, 2), 0.5)
        final = l_c @ np.kron(plus, init_as) @ l_c.conj().T
        hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
        basis = np.kron(hadamard, np.kron(np.eye(na), o.eigenvectors))
        diag = np.einsum("ij,jk,ki->i", basis.conj().T, final, basis).real
        diag = diag.reshape(2, na, d)
        probs[0, :, :] = diag[:, 0, :]
        probs[1, :, :] = diag[:, 1:, :].sum(axis=1) if na > 1 else 0.0
    np.clip(probs, 0.0, None, out=probs)
    return probs


@dataclass(frozen=True)
class OutcomeRecord:
    k: int
    kprime: int
    z: int
    b: int
    j: int
    g: float


class SampleArrays:
    """Column arrays of sampled shots plus the provenance needed for CSV."""

    def __init__(self, shot, k, kprime, z, b, j, g, seed: int, stream: int):
        self.shot = shot
        self.k = k
        self.kprime = kprime
        self.z = z
        self.b = b
        self.j = j
        self.g = g
        self.seed = seed
        self.stream = stream
        self.n = len(g)

    @classmethod
    def concat(cls, parts: list["SampleArrays"]) -> "SampleArrays":
        if not parts:
            raise ValueError("nothing to concatenate")
        return cls(
            *(np.concatenate([getattr(p, f) for p in parts]) for f in ("shot", "k", "kprime", "z", "b", "j", "g")),
            seed=parts[0].seed,
            stream=parts[0].stream,
        )


class Sampler:
    """Precomputed outcome tables for fast, reproducible shot sampling."""

    def __init__(self, channel: HybridChannel, state, obs):
        self.channel = channel
        rho = qcore.density(state)
        o = _as_observable(obs)
        g_count = channel.G
        self.pair_cum = np.cumsum((channel.weights[:, None] * channel.weights[None, :]).reshape(-1))
        self.pair_cum /= self.pair_cum[-1]
        d = channel.dimension
        tables = np.empty((g_count * g_count, 2 * 2 * d))
        for k in range(g_count):
            for kp in range(g_count):
                tables[k * g_count + kp] = outcome_distribution(channel, rho, o, k, kp).reshape(-1)
        sums = tables.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-10):
            raise AssertionError("outcome table not normalized")
        self.table_cum = np.cumsum(tables, axis=1)
        self.table_cum /= self.table_cum[:, -1:]
        # g value for flattened outcome (z, b, j)
        zz, bb, jj = np.unravel_index(np.arange(2 * 2 * d), (2, 2, d))
        self.out_z = zz
        self.out_b = bb
        self.out_j = jj
        self.g_flat = np.where(zz == 0, 1.0, 0.0) * np.where(bb == 0, 1.0, -1.0) * o.eigenvalues[jj]
        self.exact_mean = exact_expectation(channel, rho, o, backend="analytic")
        self.exact_second = second_moment(channel, rho, o)

    def _decode(self, pair_idx: np.ndarray, out_idx: np.ndarray):
        g_count = self.channel.G
        return (
            pair_idx // g_count,
            pair_idx % g_count,
            self.out_z[out_idx],
            self.out_b[out_idx],
            self.out_j[out_idx],
            self.g_flat[out_idx],
        )

    def sample(self, rng: np.random.Generator) -> OutcomeRecord:
        """One shot from an arbitrary numpy Generator."""
        u = rng.random(2)
        pair = int(np.searchsorted(self.pair_cum, u[0], side="right"))
        pair = min(pair, len(self.pair_cum) - 1)
        out = int(np.searchsorted(self.table_cum[pair], u[1], side="right"))
        out = min(out, self.table_cum.shape[1] - 1)
        k, kp, z, b, j, g = self._decode(np.array([pair]), np.array([out]))
        return OutcomeRecord(int(k[0]), int(kp[0]), int(z[0]), int(b[0]), int(j[0]), float(g[0]))

    def sample_shots(self, seed: int, count: int, start: int = 0, stream: int = 0) -> SampleArrays:
        """Shots ``start .. start+count`` from per-shot Philox substreams.

        The result depends only on (seed, stream, shot index), so any
        partition of the shot range across workers reassembles to the
        identical arrays.
        """
        shots = np.arange(start, start + count, dtype=np.uint64)
        u = prng.uniforms(seed, shots, 2, stream=stream)
        pair = np.searchsorted(self.pair_cum, u[:, 0], side="right")
        np.clip(pair, 0, len(self.pair_cum) - 1, out=pair)
        rows = self.table_cum[pair]
        out = (u[:, 1:2] >= rows).sum(axis=1)
        np.clip(out, 0, self.table_cum.shape[1] - 1, out=out)
        k, kp, z, b, j, g = self._decode(pair, out)
        return SampleArrays(shots.astype(np.int64), k, kp, z, b, j, g, seed=seed, stream=stream)


def sample_g(channel: HybridChannel, state, obs, rng: np.random.Generator) -> OutcomeRecord:
    """Single-shot draw; build a :class:`Sampler` once for batches."""
    return Sampler(channel, state, obs).sample(rng)


def sample_shots(channel: HybridChannel, state, obs, seed: int, count: int, stream: int = 0) -> SampleArrays:
    return Sampler(channel, state, obs).sample_shots(seed, count, stream=stream)


def compose_rounds(channels: list[HybridChannel], state) -> tuple[list[np.ndarray], float]:
    """Multi-round composition: intermediate states and the R product.

    Round ``mu`` maps ``rho`` to the normalized mixture
    ``sum_k q_k K_k rho K_k^dag / tr[...]``; the generalized reduction
    factor is the product of per-round factors
    ``sum_k q_k tr[K_k^dag K_k rho_mu]``.
    """
    rho = qcore.density(state)
    intermediates = []
    r_total = 1.0
    for ch in channels:
        sigma = np.zeros_like(rho)
        for g in ch.group_ops:
            sigma += g.weight * (g.operator @ rho @ g.operator.conj().T)
        t = float(np.trace(sigma).real)
        if t < 1e-14:
            raise DegenerateRoundError(f"intermediate trace {t:.3e} vanishes")
        r_total *= t
        rho = sigma / t
        intermediates.append(rho)
    return intermediates, r_total


def expectation_rounds(channels: list[HybridChannel], state, obs) -> float:
    """``tr[O K^(r) ... K^(1) rho K^(1)dag ... K^(r)dag]`` for chained maps."""
    rho = qcore.density(state)
    o = _as_observable(obs)
    for ch in channels:
        k = ch.klcu()
        rho = k @ rho @ k.conj().T
    return float(np.trace(o.matrix @ rho).real)


def write_shot_csv(path, batch: SampleArrays, version: str) -> None:
    with open(path, "w") as fh:
        fh.write("shot,k,kprime,z,b,j,g\n")
        for i in range(batch.n):
            fh.write(
                f"{int(batch.shot[i])},{int(batch.k[i])},{int(batch.kprime[i])},"
                f"{int(batch.z[i])},{int(batch.b[i])},{int(batch.j[i])},{batch.g[i]:.17g}\n"
            )
        fh.write(f"# seed={batch.seed} version={version}\n")
