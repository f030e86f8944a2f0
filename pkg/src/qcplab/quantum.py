"""Exact simulation of small qubit registers.

States are dense complex vectors (pure) or density matrices (mixed) over
at most 14 qubits.  Basis index convention follows the rest of the
package: a vector's packed integer value *is* its basis index, so qubit 0
is the most significant index bit and kets read left to right.

Everything returns new register values; nothing mutates shared state.
The measurement toolbox covers binary projective measurements, projective
partitions of the computational basis (used to run classical programs
coherently and rewind), and the measure/undo/trace-out composition whose
disturbance the square-root bound controls.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DimensionMismatchError,
    ImpossibleCollapseError,
    ParameterError,
    UndefinedConditioningError,
)
from .gf2 import Gf2Subspace, Gf2Vector

MAX_QUBITS = 14
TOL = 1e-9


@dataclass(frozen=True)
class QuantumRegister:
    """A register of ``num_qubits`` qubits, pure (vector) or mixed (matrix)."""

    num_qubits: int
    amplitudes: np.ndarray  # shape (2^n,) when pure, (2^n, 2^n) when mixed
    pure: bool = True

    def __post_init__(self) -> None:
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise CapacityError(f"{self.num_qubits} qubits outside 1..{MAX_QUBITS}")
        dim = 1 << self.num_qubits
        a = self.amplitudes
        if self.pure:
            if a.shape != (dim,):
                raise DimensionMismatchError(f"state shape {a.shape}, expected ({dim},)")
            if abs(np.vdot(a, a).real - 1.0) > TOL:
                raise ParameterError(f"state norm {np.vdot(a, a).real} != 1")
        else:
            if a.shape != (dim, dim):
                raise DimensionMismatchError(f"density shape {a.shape}")
            if abs(np.trace(a).real - 1.0) > TOL:
                raise ParameterError(f"density trace {np.trace(a)} != 1")
            if np.max(np.abs(a - a.conj().T)) > TOL:
                raise ParameterError("density matrix not Hermitian")
            if np.linalg.eigvalsh(a)[0] < -TOL:
                raise ParameterError("density matrix not PSD")
        a.setflags(write=False)

    @classmethod
    def from_vector(cls, vec: Sequence[complex]) -> "QuantumRegister":
        arr = np.asarray(vec, dtype=complex)
        n = int(round(math.log2(arr.size)))
        return cls(n, arr)

    @classmethod
    def basis_state(cls, num_qubits: int, index: int) -> "QuantumRegister":
        vec = np.zeros(1 << num_qubits, dtype=complex)
        vec[index] = 1.0
        return cls(num_qubits, vec)

    @classmethod
    def from_density(cls, rho: np.ndarray) -> "QuantumRegister":
        arr = np.asarray(rho, dtype=complex)
        n = int(round(math.log2(arr.shape[0])))
        return cls(n, arr, pure=False)

    @property
    def dim(self) -> int:
        return 1 << self.num_qubits

    def density(self) -> np.ndarray:
        if self.pure:
            return np.outer(self.amplitudes, self.amplitudes.conj())
        return self.amplitudes

    def to_json_amplitudes(self) -> list[list[float]]:
        """Debug dump: (basis index, re, im) triples of the nonzero amplitudes."""
        if not self.pure:
            raise ParameterError("amplitude dump is defined for pure states")
        out = []
        for i, amp in enumerate(self.amplitudes):
            if abs(amp) > 1e-12:
                out.append([i, float(amp.real), float(amp.imag)])
        return out


@dataclass(frozen=True)
class BinaryProjector:
    """A Hermitian idempotent acceptance operator, diagonal or dense."""

    dim: int
    diag: np.ndarray | None = None
    matrix: np.ndarray | None = None
    trusted: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if (self.diag is None) == (self.matrix is None):
            raise ParameterError("exactly one of diag/matrix must be given")
        if self.trusted:
            (self.diag if self.diag is not None else self.matrix).setflags(write=False)
            return
        if self.diag is not None:
            if self.diag.shape != (self.dim,):
                raise DimensionMismatchError("diagonal length mismatch")
            if not np.all((np.abs(self.diag) < TOL) | (np.abs(self.diag - 1) < TOL)):
                raise ParameterError("diagonal projector entries must be 0/1")
            self.diag.setflags(write=False)
        else:
            m = self.matrix
            if m.shape != (self.dim, self.dim):
                raise DimensionMismatchError("matrix shape mismatch")
            if np.max(np.abs(m - m.conj().T)) > TOL:
                raise ParameterError("projector not Hermitian")
            if np.max(np.abs(m @ m - m)) > TOL:
                raise ParameterError("projector not idempotent")
            m.setflags(write=False)

    @classmethod
    def from_predicate(cls, num_qubits: int, pred: Callable[[int], bool]) -> "BinaryProjector":
        dim = 1 << num_qubits
        diag = np.array([1.0 if pred(i) else 0.0 for i in range(dim)])
        return cls(dim, diag=diag)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "BinaryProjector":
        return cls(matrix.shape[0], matrix=np.asarray(matrix, dtype=complex))

    @classmethod
    def coset_membership(cls, space: Gf2Subspace, shift: Gf2Vector) -> "BinaryProjector":
        from .gf2 import Gf2Coset, coset_contains  # local to avoid cycle at import

        coset = Gf2Coset(space, shift)
        d = space.ambient_dim
        return cls.from_predicate(d, lambda i: coset_contains(coset, Gf2Vector(i, d)))

    def materialize(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.diag(self.diag.astype(complex))

    def apply(self, vec: np.ndarray) -> np.ndarray:
        if self.diag is not None:
            return self.diag * vec
        return self.matrix @ vec

    def expectation(self, reg: QuantumRegister) -> float:
        if reg.pure:
            return float(np.vdot(reg.amplitudes, self.apply(reg.amplitudes)).real)
        return float(np.trace(self.materialize() @ reg.amplitudes).real)


def prepare_coset_state(space: Gf2Subspace, a1: Gf2Vector, a2: Gf2Vector) -> QuantumRegister:
    """The hidden-phase coset state: amplitude (-1)^<v, a2> / sqrt(|A|) at v + a1."""
    d = space.ambient_dim
    if d > MAX_QUBITS:
        raise CapacityError(f"{d} qubits above the {MAX_QUBITS}-qubit simulator cap")
    if a1.dim != d or a2.dim != d:
        raise DimensionMismatchError("shift dimensions must match the subspace")
    vec = np.zeros(1 << d, dtype=complex)
    scale = 1.0 / math.sqrt(1 << space.dim)
    for v in space.elements():
        sign = -1.0 if v.dot(a2) else 1.0
        vec[v.value ^ a1.value] = sign * scale
    return QuantumRegister(d, vec)


def _walsh_hadamard(vec: np.ndarray) -> np.ndarray:
    """Normalized Walsh transform along the first axis (vectors or matrix columns)."""
    v = vec.copy()
    n = v.shape[0]
    rest = v.shape[1:]
    h = 1
    while h < n:
        v = v.reshape(-1, 2, h, *rest)
        top = v[:, 0] + v[:, 1]
        bottom = v[:, 0] - v[:, 1]
        v = np.stack((top, bottom), axis=1).reshape(n, *rest)
        h *= 2
    return v / math.sqrt(n)


def hadamard_all(reg: QuantumRegister) -> QuantumRegister:
    """Hadamard on every qubit (fast Walsh transform); an involution."""
    if not reg.pure:
        raise ParameterError("hadamard_all expects a pure state")
    return QuantumRegister(reg.num_qubits, _walsh_hadamard(reg.amplitudes))


def apply_unitary(reg: QuantumRegister, u: np.ndarray) -> QuantumRegister:
    if u.shape != (reg.dim, reg.dim):
        raise DimensionMismatchError("unitary shape mismatch")
    if reg.pure:
        return QuantumRegister(reg.num_qubits, u @ reg.amplitudes)
    return QuantumRegister(reg.num_qubits, u @ reg.amplitudes @ u.conj().T, pure=False)


def project(reg: QuantumRegister, proj: BinaryProjector, outcome: int) -> QuantumRegister:
    """Collapse onto the outcome branch; rejects numerically impossible branches."""
    if proj.dim != reg.dim:
        raise DimensionMismatchError("projector dimension mismatch")
    if reg.pure:
        branch = proj.apply(reg.amplitudes)
        if outcome == 0:
            branch = reg.amplitudes - branch
        norm_sq = float(np.vdot(branch, branch).real)
        if norm_sq < 1e-12:
            raise ImpossibleCollapseError(f"outcome {outcome} has probability ~0")
        return QuantumRegister(reg.num_qubits, branch / math.sqrt(norm_sq))
    p = proj.materialize()
    if outcome == 0:
        p = np.eye(reg.dim) - p
    sigma = p @ reg.amplitudes @ p
    tr = float(np.trace(sigma).real)
    if tr < 1e-12:
        raise ImpossibleCollapseError(f"outcome {outcome} has probability ~0")
    return QuantumRegister(reg.num_qubits, sigma / tr, pure=False)


def measure_binary(
    reg: QuantumRegister, proj: BinaryProjector, rng: random.Random
) -> tuple[int, QuantumRegister, float]:
    """Sample the binary measurement (I - P, P); returns (outcome, collapsed, P's probability)."""
    p1 = proj.expectation(reg)
    outcome = 1 if rng.random() < p1 else 0
    return outcome, project(reg, proj, outcome), p1


def measure_partition(
    reg: QuantumRegister, label_fn: Callable[[int], Hashable], rng: random.Random
) -> tuple[Hashable, QuantumRegister, float]:
    """Projective measurement onto the basis classes of ``label_fn``.

    This is exactly what running a classical program coherently on the
    register, reading the output, and uncomputing does to the state: the
    register collapses onto the preimage of the observed output.
    """
    if not reg.pure:
        raise ParameterError("partition measurement expects a pure state")
    weights: dict[Hashable, float] = {}
    amps = reg.amplitudes
    nz = np.nonzero(np.abs(amps) > 1e-15)[0]
    labels = {int(i): label_fn(int(i)) for i in nz}
    for i in nz:
        w = float(abs(amps[i]) ** 2)
        lab = labels[int(i)]
        weights[lab] = weights.get(lab, 0.0) + w
    items = sorted(weights.items(), key=lambda kv: repr(kv[0]))
    u = rng.random() * sum(w for _, w in items)
    acc = 0.0
    chosen = items[-1][0]
    for lab, w in items:
        acc += w
        if u <= acc:
            chosen = lab
            break
    mask = np.zeros(reg.dim, dtype=bool)
    for i in nz:
        if labels[int(i)] == chosen:
            mask[i] = True
    branch = np.where(mask, amps, 0.0)
    norm = math.sqrt(float(np.vdot(branch, branch).real))
    return chosen, QuantumRegister(reg.num_qubits, branch / norm), weights[chosen]


def measure_computational(
    reg: QuantumRegister, rng: random.Random
) -> tuple[int, QuantumRegister]:
    """Full computational-basis measurement; returns (basis index, collapsed)."""
    index, collapsed, _ = measure_partition(reg, lambda i: i, rng)
    return index, collapsed


def partial_trace(rho: np.ndarray, dims: tuple[int, int], keep: int) -> np.ndarray:
    """Trace out one side of a bipartite density matrix; keep is 0 or 1."""
    d1, d2 = dims
    t = rho.reshape(d1, d2, d1, d2)
    if keep == 0:
        return np.einsum("ikjk->ij", t)
    return np.einsum("kikj->ij", t)


def measure_and_rewind(
    reg: QuantumRegister,
    unitary: np.ndarray,
    expected: BinaryProjector,
) -> tuple[int, QuantumRegister, float]:
    """Append a zeroed ancilla, apply the unitary, measure, undo, trace out.

    ``expected`` is the projector for the anticipated branch (reported as
    outcome 0); its complement carries probability eps.  The reported
    outcome is the dominant branch, the returned register is the
    non-selective post-measurement state mapped back through the inverse
    unitary with the ancilla discarded, and the third value is sqrt(eps):
    the promised ceiling on the trace distance to the input state.

    ``unitary`` may be a dense matrix or a 1-d permutation array sigma with
    U|i> = |sigma[i]> (enough for reversible classical computation).
    """
    total_dim = expected.dim
    if total_dim % reg.dim != 0:
        raise DimensionMismatchError("projector dimension must extend the register")
    anc_dim = total_dim // reg.dim

    if unitary.ndim == 1:
        perm = unitary.astype(np.int64)
        if perm.size != total_dim:
            raise DimensionMismatchError("permutation length mismatch")
        u_apply = None
    else:
        if unitary.shape != (total_dim, total_dim):
            raise DimensionMismatchError("unitary shape mismatch")
        perm = None
        u_apply = unitary

    def forward_vec(vec: np.ndarray) -> np.ndarray:
        if perm is not None:
            out = np.zeros_like(vec)
            out[perm] = vec
            return out
        return u_apply @ vec

    def backward_vec(vec: np.ndarray) -> np.ndarray:
        if perm is not None:
            return vec[perm]
        return u_apply.conj().T @ vec

    if reg.pure:
        joint = np.kron(reg.amplitudes, _ancilla_zero(anc_dim))
        evolved = forward_vec(joint)
        kept = expected.apply(evolved)
        p0 = float(np.vdot(kept, kept).real)
        rest = evolved - kept
        rho_red = np.zeros((reg.dim, reg.dim), dtype=complex)
        for branch in (kept, rest):
            back = backward_vec(branch).reshape(reg.dim, anc_dim)
            rho_red += back @ back.conj().T
    else:
        joint = np.kron(reg.amplitudes, np.outer(_ancilla_zero(anc_dim), _ancilla_zero(anc_dim)))
        if perm is not None:
            u_mat = np.zeros((total_dim, total_dim))
            u_mat[perm, np.arange(total_dim)] = 1.0
        else:
            u_mat = u_apply
        evolved = u_mat @ joint @ u_mat.conj().T
        p_mat = expected.materialize()
        q_mat = np.eye(total_dim) - p_mat
        p0 = float(np.trace(p_mat @ evolved).real)
        pinched = p_mat @ evolved @ p_mat + q_mat @ evolved @ q_mat
        back = u_mat.conj().T @ pinched @ u_mat
        rho_red = partial_trace(back, (reg.dim, anc_dim), keep=0)

    eps = min(max(1.0 - p0, 0.0), 1.0)
    outcome = 0 if p0 >= 0.5 else 1
    rewound = QuantumRegister(reg.num_qubits, rho_red, pure=False)
    return outcome, rewound, math.sqrt(eps)


def _ancilla_zero(dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=complex)
    vec[0] = 1.0
    return vec


def fidelity(a: QuantumRegister, b: QuantumRegister) -> float:
    """Global-phase-insensitive overlap; supports pure/pure and pure/mixed."""
    if a.num_qubits != b.num_qubits:
        raise DimensionMismatchError("register sizes differ")
    if a.pure and b.pure:
        return abs(np.vdot(a.amplitudes, b.amplitudes))
    if a.pure != b.pure:
        pure, mixed = (a, b) if a.pure else (b, a)
        val = np.vdot(pure.amplitudes, mixed.amplitudes @ pure.amplitudes).real
        return math.sqrt(max(float(val), 0.0))
    s = _sqrtm_psd(a.amplitudes)
    inner = s @ b.amplitudes @ s
    eig = np.linalg.eigvalsh(inner)
    return float(np.sum(np.sqrt(np.clip(eig, 0.0, None))))


def _sqrtm_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def trace_distance(a: QuantumRegister | np.ndarray, b: QuantumRegister | np.ndarray) -> float:
    """Half the trace norm of the difference of the two density matrices."""
    rho1 = a.density() if isinstance(a, QuantumRegister) else a
    rho2 = b.density() if isinstance(b, QuantumRegister) else b
    if rho1.shape != rho2.shape:
        raise DimensionMismatchError("density shapes differ")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho1 - rho2))))


@dataclass(frozen=True)
class SecondRegisterReport:
    """Numeric check that measuring one side barely moves the other side's conformance."""

    epsilon: float
    outcome_probability: float
    conformance: float  # Tr[proj2 tau] for the conditioned second register
    bound: float  # 1 - 3 sqrt(eps) / (2 p)
    passed: bool
    tau: np.ndarray


def conditional_second_state(
    rho: np.ndarray, dims: tuple[int, int], kraus_op: np.ndarray
) -> tuple[float, np.ndarray]:
    """Apply a Kraus operator on side 1; return (outcome probability, side-2 state)."""
    d1, d2 = dims
    big = np.kron(kraus_op, np.eye(d2))
    sigma = big @ rho @ big.conj().T
    p = float(np.trace(sigma).real)
    if p < 1e-12:
        raise UndefinedConditioningError("conditioning on a zero-probability outcome")
    return p, partial_trace(sigma / p, dims, keep=1)


def verify_second_register_bound(
    rho: np.ndarray,
    dims: tuple[int, int],
    proj1: np.ndarray,
    proj2: np.ndarray,
    kraus: Sequence[np.ndarray],
    outcome: int,
) -> SecondRegisterReport:
    """Check the conditioned second register against its disturbance floor.

    Given a bipartite state that passes proj1 x proj2 except with
    probability eps, any measurement on the first side, conditioned on any
    outcome of probability p, leaves the second side passing proj2 with
    probability at least 1 - 3 sqrt(eps) / (2 p).
    """
    d1, d2 = dims
    joint = np.kron(proj1, proj2)
    eps = 1.0 - float(np.trace(joint @ rho).real)
    eps = min(max(eps, 0.0), 1.0)
    p, tau = conditional_second_state(rho, dims, kraus[outcome])
    conformance = float(np.trace(proj2 @ tau).real)
    bound = 1.0 - 3.0 * math.sqrt(eps) / (2.0 * p)
    return SecondRegisterReport(
        epsilon=eps,
        outcome_probability=p,
        conformance=conformance,
        bound=bound,
        passed=conformance >= bound - TOL,
        tau=tau,
    )


# randomized construction helpers (seeded via random.Random for reproducibility)


def _gauss_array(shape: tuple[int, ...], rng: random.Random) -> np.ndarray:
    flat = np.array([complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(int(np.prod(shape)))])
    return flat.reshape(shape)


def random_pure_state(dim: int, rng: random.Random) -> np.ndarray:
    v = _gauss_array((dim,), rng)
    return v / np.linalg.norm(v)


def random_density(dim: int, rng: random.Random, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    g = _gauss_array((dim, rank), rng)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: random.Random) -> np.ndarray:
    q, r = np.linalg.qr(_gauss_array((dim, dim), rng))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_projector(dim: int, rank: int, rng: random.Random) -> np.ndarray:
    u = random_unitary(dim, rng)
    cols = u[:, :rank]
    return cols @ cols.conj().T


def random_kraus_measurement(dim: int, outcomes: int, rng: random.Random) -> list[np.ndarray]:
    """A random general measurement: Kraus operators with sum M†M = I."""
    blocks = _gauss_array((outcomes * dim, dim), rng)
    q, _ = np.linalg.qr(blocks)  # isometry: q†q = I
    return [q[i * dim : (i + 1) * dim, :] for i in range(outcomes)]
