"""Threshold implementations over mixtures of binary measurements.

The threshold measurement for a challenge family is the projector onto
the high eigenspaces of the challenge-averaged acceptance operator
E = sum_i Pr[i] * P_i: it accepts exactly the states that would pass a
randomly drawn challenge with probability at least eta.  At this scale
the eigendecomposition is exact, so the "approximate" variant is the
exact measurement with its declared slack parameters carried along,
and every inequality it must satisfy holds with slack to spare.

The simulated variant thresholds the *empirical* average of the
projectors for an explicitly provided list of challenge samples, using
no other access to the challenge distribution.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Hashable, Sequence

import numpy as np

from .errors import CapacityError, DimensionMismatchError, ParameterError
from .quantum import BinaryProjector, QuantumRegister, measure_binary
from .resample import FiniteDistribution

MAX_TI_DIM = 1 << 8
EIGEN_TIE_TOL = 1e-12
SIM_ATI_SAMPLE_CAP = 10_000


def _as_effect(op, dim: int) -> np.ndarray:
    if isinstance(op, BinaryProjector):
        mat = op.materialize()
    else:
        mat = np.asarray(op, dtype=complex)
    if mat.shape != (dim, dim):
        raise DimensionMismatchError(f"effect shape {mat.shape}, expected {(dim, dim)}")
    return mat


@dataclass(frozen=True)
class ProjectiveFamily:
    """A finite family of acceptance operators with a challenge distribution.

    Effects are binary projectors by default; ``allow_effects`` admits
    general Hermitian operators with spectrum in [0, 1] (the acceptance
    POVM elements of composite strategies), which is all the threshold
    construction actually needs.
    """

    dim: int
    effects: dict[Hashable, np.ndarray] = field(repr=False)
    challenge_dist: FiniteDistribution = None
    allow_effects: bool = False

    def __post_init__(self) -> None:
        if self.dim > MAX_TI_DIM:
            raise CapacityError(f"dimension {self.dim} above {MAX_TI_DIM}")
        if self.challenge_dist is None:
            object.__setattr__(
                self, "challenge_dist", FiniteDistribution.uniform(tuple(self.effects))
            )
        for idx in self.challenge_dist.support:
            if idx not in self.effects:
                raise ParameterError(f"challenge index {idx!r} has no effect")
        validated: set[int] = set()  # indices may share one operator object
        for idx, raw in list(self.effects.items()):
            mat = _as_effect(raw, self.dim)
            self.effects[idx] = mat
            if id(mat) in validated:
                continue
            validated.add(id(mat))
            if np.max(np.abs(mat - mat.conj().T)) > 1e-9:
                raise ParameterError(f"effect {idx!r} is not Hermitian")
            if self.allow_effects:
                support = np.nonzero(np.abs(mat).sum(axis=0) > 1e-14)[0]
                eig = (
                    np.linalg.eigvalsh(mat[np.ix_(support, support)])
                    if len(support)
                    else np.zeros(1)
                )
                if eig[0] < -1e-9 or eig[-1] > 1 + 1e-9:
                    raise ParameterError(f"effect {idx!r} spectrum outside [0, 1]")
            elif np.max(np.abs(mat @ mat - mat)) > 1e-9:
                raise ParameterError(f"effect {idx!r} is not a projector")

    @classmethod
    def from_projectors(
        cls,
        projectors: dict[Hashable, np.ndarray | BinaryProjector],
        challenge_dist: FiniteDistribution | None = None,
        allow_effects: bool = False,
    ) -> "ProjectiveFamily":
        first = next(iter(projectors.values()))
        dim = first.dim if isinstance(first, BinaryProjector) else first.shape[0]
        effects = {k: _as_effect(v, dim) for k, v in projectors.items()}
        return cls(dim, effects, challenge_dist, allow_effects)

    def mixture(self) -> np.ndarray:
        weights: dict[int, float] = {}  # total probability per distinct operator object
        mats: dict[int, np.ndarray] = {}
        for idx, p in zip(self.challenge_dist.support, self.challenge_dist.probs):
            mat = self.effects[idx]
            weights[id(mat)] = weights.get(id(mat), 0.0) + p
            mats[id(mat)] = mat
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for key, w in weights.items():
            if w:
                out += w * mats[key]
        return out


@dataclass(frozen=True)
class ThresholdMeasurement:
    """Projector onto the eigenspaces of the challenge mixture with eigenvalue >= eta."""

    family: ProjectiveFamily
    eta: float
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    projector: BinaryProjector = field(repr=False)


def build_ti(family: ProjectiveFamily, eta: float) -> ThresholdMeasurement:
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta {eta} outside [0, 1]")
    mix = family.mixture()
    dim = mix.shape[0]
    # the mixture often lives on a small coordinate block (low-rank acceptance
    # operators); eigendecompose that block and pad the complement with zeros
    support = np.nonzero(np.abs(mix).sum(axis=0) > 1e-14)[0]
    if len(support) < dim:
        sub_vals, sub_vecs = np.linalg.eigh(mix[np.ix_(support, support)])
        vals = np.zeros(dim)
        vecs = np.eye(dim, dtype=complex)
        complement = np.setdiff1d(np.arange(dim), support)
        vals[len(complement) :] = sub_vals
        vecs[:, len(complement) :] = 0
        vecs[np.ix_(support, np.arange(len(complement), dim))] = sub_vecs
        vecs = vecs[:, np.argsort(vals, kind="stable")]
        vals = np.sort(vals, kind="stable")
        selected_sub = sub_vecs[:, sub_vals >= eta - EIGEN_TIE_TOL]
        proj = np.zeros((dim, dim), dtype=complex)
        proj[np.ix_(support, support)] = selected_sub @ selected_sub.conj().T
        if eta <= EIGEN_TIE_TOL and len(complement):
            proj[complement, complement] = 1.0  # zero eigenvalues clear a zero bar
    else:
        vals, vecs = np.linalg.eigh(mix)
        selected = vecs[:, vals >= eta - EIGEN_TIE_TOL]
        proj = selected @ selected.conj().T
    # built from an orthonormal eigenbasis, so idempotency holds by construction
    return ThresholdMeasurement(
        family=family,
        eta=eta,
        eigenvalues=vals,
        eigenvectors=vecs,
        projector=BinaryProjector(dim, matrix=proj, trusted=True),
    )


def apply_ti(
    ti: ThresholdMeasurement, reg: QuantumRegister, rng: random.Random
) -> tuple[int, QuantumRegister]:
    outcome, collapsed, _ = measure_binary(reg, ti.projector, rng)
    return outcome, collapsed


def ti_accept_prob(family: ProjectiveFamily, eta: float, rho: np.ndarray) -> float:
    ti = build_ti(family, eta)
    return float(np.trace(ti.projector.materialize() @ rho).real)


def apply_ati(
    family: ProjectiveFamily,
    eta: float,
    epsilon: float,
    delta: float,
    reg: QuantumRegister,
    rng: random.Random,
) -> tuple[int, QuantumRegister]:
    """Approximate threshold measurement: exact at this scale, slack recorded.

    The declared (epsilon, delta) pair is the tolerance the caller is
    entitled to; the exact implementation satisfies every such contract.
    """
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ParameterError("epsilon and delta must lie in (0, 1)")
    return apply_ti(build_ti(family, eta), reg, rng)


def ati_accept_prob(
    family: ProjectiveFamily, eta: float, epsilon: float, delta: float, rho: np.ndarray
) -> float:
    return ti_accept_prob(family, eta, rho)


def joint_accept_prob(tis: Sequence[ThresholdMeasurement], rho: np.ndarray) -> float:
    """Probability that the tensor product of the measurements accepts everywhere."""
    big = tis[0].projector.materialize()
    for ti in tis[1:]:
        big = np.kron(big, ti.projector.materialize())
    return float(np.trace(big @ rho).real)


def joint_collapse(
    tis: Sequence[ThresholdMeasurement], rho: np.ndarray
) -> tuple[float, np.ndarray]:
    """Collapse a multipartite state on the all-ones outcome of the product measurement."""
    big = tis[0].projector.materialize()
    for ti in tis[1:]:
        big = np.kron(big, ti.projector.materialize())
    sigma = big @ rho @ big
    p = float(np.trace(sigma).real)
    if p < 1e-15:
        raise ParameterError("all-ones outcome has probability ~0")
    return p, sigma / p


def sim_ati_sample_count(epsilon: float, delta: float) -> int:
    """Default challenge-list length; a matrix-concentration placeholder bound."""
    if not 0 < epsilon < 1 or not 0 < delta < 1:
        raise ParameterError("epsilon and delta must lie in (0, 1)")
    return min(math.ceil((1.0 / epsilon**2) * math.log(2.0 / delta)), SIM_ATI_SAMPLE_CAP)


def empirical_family(
    family_builder: Callable[[Hashable], np.ndarray | BinaryProjector],
    samples: Sequence[Hashable],
) -> ProjectiveFamily:
    """Family weighted by sample multiplicity; uses nothing but the explicit list."""
    if not samples:
        raise ParameterError("at least one challenge sample is required")
    counts: dict[Hashable, int] = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    effects = {s: family_builder(s) for s in counts}
    dim = next(iter(effects.values()))
    dim = dim.dim if isinstance(dim, BinaryProjector) else dim.shape[0]
    dist = FiniteDistribution(
        tuple(counts), tuple(c / len(samples) for c in counts.values())
    )
    return ProjectiveFamily.from_projectors(effects, dist, allow_effects=True)


def sim_ati(
    family_builder: Callable[[Hashable], np.ndarray | BinaryProjector],
    explicit_samples: Sequence[Hashable],
    eta: float,
    epsilon: float,
    delta: float,
    alpha: float,
    reg: QuantumRegister,
    rng: random.Random,
) -> int:
    """Threshold the empirical challenge mixture built from the explicit samples."""
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    fam = empirical_family(family_builder, explicit_samples)
    outcome, _ = apply_ati(fam, eta, epsilon, delta, reg, rng)
    return outcome


def sim_ati_accept_prob(
    family_builder: Callable[[Hashable], np.ndarray | BinaryProjector],
    samples: Sequence[Hashable],
    eta: float,
    rho: np.ndarray,
) -> float:
    fam = empirical_family(family_builder, samples)
    return ti_accept_prob(fam, eta, rho)
