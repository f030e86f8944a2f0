import math
import random

import numpy as np
import pytest

from qcplab.errors import ParameterError
from qcplab.quantum import (
    BinaryProjector,
    QuantumRegister,
    random_density,
    random_projector,
    random_pure_state,
)
from qcplab.resample import FiniteDistribution
from qcplab.threshold import (
    ProjectiveFamily,
    apply_ati,
    apply_ti,
    ati_accept_prob,
    build_ti,
    empirical_family,
    joint_accept_prob,
    joint_collapse,
    sim_ati,
    sim_ati_accept_prob,
    sim_ati_sample_count,
    ti_accept_prob,
)


def random_family(rng, dim=8, count=4):
    effects = {
        i: random_projector(dim, rng.randrange(1, dim), rng) for i in range(count)
    }
    weights = [(i, rng.random() + 0.1) for i in range(count)]
    return ProjectiveFamily.from_projectors(
        effects, FiniteDistribution.from_weights(weights)
    )


def test_single_projector_family_is_projector_itself():
    rng = random.Random(0)
    p = random_projector(8, 3, rng)
    fam = ProjectiveFamily.from_projectors({0: p})
    ti = build_ti(fam, 0.5)
    assert np.allclose(ti.projector.materialize(), p, atol=1e-9)


def test_half_identity_mixture():
    rng = random.Random(1)
    p = random_projector(4, 2, rng)
    fam = ProjectiveFamily.from_projectors(
        {0: p, 1: np.eye(4, dtype=complex)},
        FiniteDistribution.uniform([0, 1]),
    )
    # mixture (P + I)/2 has eigenvalues 1/2 and 1; thresholding at 0.75 leaves P
    ti = build_ti(fam, 0.75)
    assert np.allclose(ti.projector.materialize(), p, atol=1e-9)


def test_eigenvector_accepted_iff_eigenvalue_reaches_threshold():
    rng = random.Random(2)
    fam = random_family(rng, dim=8)
    mix = fam.mixture()
    vals, vecs = np.linalg.eigh(mix)
    for j in (0, len(vals) // 2, len(vals) - 1):
        state = QuantumRegister(3, vecs[:, j].astype(complex))
        for eta in (0.2, 0.5, 0.9):
            ti = build_ti(fam, eta)
            outcome, _ = apply_ti(ti, state, random.Random(3))
            assert outcome == (1 if vals[j] >= eta - 1e-12 else 0)


def test_ti_is_a_projection_repeat_agrees():
    rng = random.Random(4)
    fam = random_family(rng)
    ti = build_ti(fam, 0.5)
    for trial in range(20):
        reg = QuantumRegister(3, random_pure_state(8, rng))
        outcome, collapsed = apply_ti(ti, reg, rng)
        again, collapsed2 = apply_ti(ti, collapsed, rng)
        assert again == outcome


def test_collapsed_state_lives_in_high_eigenspace():
    rng = random.Random(5)
    fam = random_family(rng)
    eta = 0.5
    ti = build_ti(fam, eta)
    reg = QuantumRegister(3, random_pure_state(8, rng))
    outcome, collapsed = apply_ti(ti, reg, rng)
    if outcome == 1:
        residual = collapsed.amplitudes - ti.projector.apply(collapsed.amplitudes)
        assert np.linalg.norm(residual) < 1e-9


def test_eta_validation():
    fam = random_family(random.Random(6))
    with pytest.raises(ParameterError):
        build_ti(fam, 1.5)


def test_maximally_mixed_acceptance_is_eigen_mass():
    rng = random.Random(30)
    dim = 8
    effects = {i: random_projector(dim, 1, rng) for i in range(5)}
    fam = ProjectiveFamily.from_projectors(effects)
    rho = np.eye(dim) / dim
    eta = 0.08
    vals = np.linalg.eigvalsh(fam.mixture())
    expected = np.sum(vals >= eta - 1e-12) / dim
    assert ti_accept_prob(fam, eta, rho) == pytest.approx(expected, abs=1e-9)


def test_eta_zero_always_accepts():
    rng = random.Random(7)
    fam = random_family(rng)
    ti = build_ti(fam, 0.0)
    reg = QuantumRegister(3, random_pure_state(8, rng))
    outcome, _ = apply_ti(ti, reg, rng)
    assert outcome == 1


def test_monotone_in_eta():
    rng = random.Random(8)
    fam = random_family(rng)
    rho = random_density(8, rng)
    probs = [ti_accept_prob(fam, eta, rho) for eta in (0.9, 0.7, 0.5, 0.3, 0.0)]
    assert all(b >= a - 1e-12 for a, b in zip(probs, probs[1:]))


def test_single_measurement_inequalities_random_instances():
    # first and second displayed inequalities, exact variant, slack 1e-7
    rng = random.Random(9)
    eps, delta = 0.1, 0.05
    for _ in range(30):
        fam = random_family(rng, dim=8, count=3)
        rho = random_density(8, rng)
        eta = 0.2 + 0.6 * rng.random()
        lhs1 = ati_accept_prob(fam, eta - eps, eps, delta, rho)
        rhs1 = ti_accept_prob(fam, eta, rho) - delta
        assert lhs1 >= rhs1 - 1e-7
        lhs2 = ti_accept_prob(fam, eta - eps, rho)
        rhs2 = ati_accept_prob(fam, eta, eps, delta, rho) - delta
        assert lhs2 >= rhs2 - 1e-7


def test_product_measurement_inequalities_two_registers():
    rng = random.Random(10)
    eps, delta, k = 0.1, 0.05, 2
    for _ in range(15):
        fams = [random_family(rng, dim=4, count=3) for _ in range(k)]
        rho = random_density(16, rng)
        eta = 0.3 + 0.4 * rng.random()
        tis_eta = [build_ti(f, eta) for f in fams]
        tis_lo = [build_ti(f, eta - eps) for f in fams]
        # product form of the first/fourth inequalities
        assert joint_accept_prob(tis_lo, rho) >= joint_accept_prob(tis_eta, rho) - k * delta - 1e-7
        # collapsed-state clauses: after accepting at eta, lower thresholds accept surely
        try:
            _, rho_post = joint_collapse(tis_eta, rho)
        except ParameterError:
            continue  # zero-probability branch: nothing to check
        tis_2lo = [build_ti(f, eta - 2 * eps) for f in fams]
        tis_3lo = [build_ti(f, eta - 3 * eps) for f in fams]
        assert joint_accept_prob(tis_2lo, rho_post) >= 1 - 2 * k * delta - 1e-7
        assert joint_accept_prob(tis_3lo, rho_post) >= 1 - 3 * k * delta - 1e-7


def test_sim_ati_sample_count_default():
    assert sim_ati_sample_count(0.05, 0.05) == math.ceil((1 / 0.05**2) * math.log(40))
    assert sim_ati_sample_count(0.001, 0.5) == 10_000  # capped


def test_sim_ati_point_mass_equals_single_ti():
    rng = random.Random(11)
    p = random_projector(8, 3, rng)
    builder = lambda s: p  # noqa: E731
    rho_vec = random_pure_state(8, rng)
    reg = QuantumRegister(3, rho_vec)
    fam = ProjectiveFamily.from_projectors({"only": p})
    ti = build_ti(fam, 0.5)
    for seed in range(10):
        a = sim_ati(builder, ["only"], 0.5, 0.1, 0.1, 0.1, reg, random.Random(seed))
        b, _ = apply_ti(ti, reg, random.Random(seed))
        assert a == b


def test_sim_ati_inequalities_with_default_sample_count():
    rng = random.Random(12)
    eps, delta, alpha = 0.05, 0.05, 0.1
    slack = alpha + 4 * delta
    ell = sim_ati_sample_count(eps, delta)
    for _ in range(5):
        fam = random_family(rng, dim=8, count=4)
        builder = fam.effects.__getitem__
        rho = random_density(8, rng)
        eta = 0.35 + 0.3 * rng.random()
        draws = 12
        acc_lo = acc_eta = 0.0
        for _ in range(draws):
            samples = [fam.challenge_dist.sample(rng) for _ in range(ell)]
            acc_lo += sim_ati_accept_prob(builder, samples, eta - 5 * eps, rho)
            acc_eta += sim_ati_accept_prob(builder, samples, eta, rho)
        acc_lo /= draws
        acc_eta /= draws
        ti_eta = ti_accept_prob(fam, eta, rho)
        ti_lo = ti_accept_prob(fam, eta - 5 * eps, rho)
        assert acc_lo >= ti_eta - slack - 1e-7  # vs the approximate variant (== exact here)
        assert ti_lo >= acc_eta - slack - 1e-7
        assert acc_lo >= ti_eta - slack - 1e-7  # vs the exact threshold measurement
        assert ti_lo >= acc_eta - slack - 1e-7


def test_empirical_mixture_converges():
    rng = random.Random(13)
    # disjoint diagonal projectors: operator deviation is the worst single-class deviation
    dim, count = 16, 16
    effects = {}
    for i in range(count):
        diag = np.zeros(dim)
        diag[i] = 1.0
        effects[i] = np.diag(diag).astype(complex)
    fam = ProjectiveFamily.from_projectors(effects)
    samples = [fam.challenge_dist.sample(rng) for _ in range(200)]
    emp = empirical_family(effects.__getitem__, samples)
    dev = np.linalg.norm(
        np.linalg.eigvalsh(emp.mixture() - fam.mixture()), ord=np.inf
    )
    assert dev <= 0.05


def test_empirical_family_requires_samples():
    with pytest.raises(ParameterError):
        empirical_family(lambda s: np.eye(2), [])


def test_non_hermitian_effect_rejected():
    bad = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ParameterError):
        ProjectiveFamily.from_projectors({0: bad}, allow_effects=True)
