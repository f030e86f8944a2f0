"""Coset-state copy protection and its security-game harnesses.

The construction: the issuer samples a hidden coset (A, a1, a2), hands out
the coset state plus an opaque membership checker, and wraps the protected
functionality in a program that answers only when the caller exhibits a
primal coset element (computational basis) or a dual one (Hadamard basis).
An honest evaluator runs the program coherently on each basis in turn and
rewinds, recovering the output as the XOR of the two branches while
preserving its state exactly.

Harnesses implement the single-evaluator security game, the
malleable-puncturing game, the two-pirate copy-protection game, its
threshold-measurement variant, and the coset monogamy game, each over
pluggable adversaries and a seeded RNG.  Built-in adversaries come with
brute-force analytic win rates so the Monte-Carlo estimates can be
calibrated against exact values.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import pprf
from .errors import EvaluationFailedError, ParameterError
from .gf2 import (
    CosetInstance,
    Gf2Coset,
    Gf2Subspace,
    Gf2Vector,
    canonical_rep,
    dual,
    random_subspace,
    random_vector,
    rref,
    sample_coset_instance,
)
from .obf import ObfHandle, ObfuscationRegistry, default_registry
from .quantum import (
    QuantumRegister,
    _walsh_hadamard,
    hadamard_all,
    measure_computational,
    measure_partition,
    prepare_coset_state,
)
from .resample import FiniteDistribution
from .threshold import EIGEN_TIE_TOL, ProjectiveFamily, apply_ti, build_ti

MAX_GAME_DIM = 12


# --- schemes --------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeKey:
    """Key of a malleable-puncturable scheme: a circuit, side data, and the
    relation mapping scheme inputs to the challenge point they depend on."""

    circuit: Callable[[int], int] = field(repr=False)
    aux: object
    relation: Callable[[int], int] = field(repr=False)


@dataclass(frozen=True)
class MalleablePuncturableScheme:
    """A cryptographic scheme with its security game, in sampled form.

    ``chal`` plays the (collapsed, one-shot) setup interaction and returns
    the key together with the challenger state; the challenge sampler is
    split into the input draw and the per-input challenge construction so
    the puncturing game can fix the input.
    """

    name: str
    input_bits: int
    output_bits: int
    p_triv: float
    chal: Callable[[random.Random], tuple[SchemeKey, object]] = field(repr=False)
    d_inp: Callable[[object, random.Random], int] = field(repr=False)
    samp_ch_from_inp: Callable[[object, int, random.Random], tuple[object, object]] = field(
        repr=False
    )
    ver: Callable[[object, object], bool] = field(repr=False)
    mall_punc: Callable[[object, int, random.Random], Callable[[int], int | None]] = field(
        repr=False
    )
    min_entropy_bound: float = 0.0
    resample_challenge: Callable | None = field(default=None, repr=False)

    def samp_ch(self, state: object, rng: random.Random) -> tuple[object, object]:
        x = self.d_inp(state, rng)
        return self.samp_ch_from_inp(state, x, rng)

    def enumerate_challenges(self, state: object) -> Iterator[tuple[float, object, object]]:
        """Exact challenge law as (probability, answer key, challenge) triples.

        Assumes the input draw is uniform over the input space, which holds
        for every scheme this package ships.
        """
        count = 1 << self.input_bits
        fixed = random.Random(0)
        for x in range(count):
            ak, ch = self.samp_ch_from_inp(state, x, fixed)
            yield 1.0 / count, ak, ch


def example_prf_scheme(
    n_in: int, n_out: int, security_bits: int = 128
) -> MalleablePuncturableScheme:
    """PRF evaluation under an equality challenge: the simplest instantiation.

    The key circuit is a fresh PRF; challenges are uniform inputs, the
    answer key is the evaluation there, verification is equality, and
    malleable puncturing is key puncturing at the challenge input.
    """
    if n_in > 12:
        raise ParameterError("example scheme caps the input space at 12 bits")

    def chal(rng: random.Random) -> tuple[SchemeKey, object]:
        key = pprf.setup(security_bits, n_in, n_out, rng)
        table = pprf.full_table(key)
        k = SchemeKey(circuit=table.__getitem__, aux=None, relation=lambda x: x)
        return k, {"key": key, "table": table}

    def d_inp(state, rng: random.Random) -> int:
        return rng.getrandbits(n_in)

    def samp_ch_from_inp(state, x: int, rng: random.Random):
        return state["table"][x], x

    def ver(ak, ans) -> bool:
        return ans == ak

    def mall_punc(state, x: int, rng: random.Random):
        pk = pprf.puncture(state["key"], {x})
        return lambda z: pprf.punctured_eval(pk, z)

    return MalleablePuncturableScheme(
        name=f"prf-eval-{n_in}-{n_out}",
        input_bits=n_in,
        output_bits=n_out,
        p_triv=2.0**-n_out,
        chal=chal,
        d_inp=d_inp,
        samp_ch_from_inp=samp_ch_from_inp,
        ver=ver,
        mall_punc=mall_punc,
        min_entropy_bound=float(n_in),
    )


# --- the protection construction -------------------------------------------------


@dataclass(frozen=True)
class GenStateResult:
    pp: ObfHandle
    register: QuantumRegister
    a_space: Gf2Subspace
    a1: Gf2Vector
    a2: Gf2Vector


def gen_state(
    d: int, rng: random.Random, registry: ObfuscationRegistry | None = None
) -> GenStateResult:
    """Sample a hidden coset, prepare its state, and register the membership program."""
    if d % 4 != 0 or d > MAX_GAME_DIM:
        raise ParameterError(f"d={d} must be a multiple of 4, at most {MAX_GAME_DIM}")
    registry = registry or default_registry()
    a_space = random_subspace(d // 2, d, rng)
    a1 = random_vector(d, rng)
    a2 = random_vector(d, rng)
    register = prepare_coset_state(a_space, a1, a2)
    primal = Gf2Coset(a_space, a1)
    dual_coset = Gf2Coset(dual(a_space), a2)

    def membership(b: int, v: int) -> bool:
        vec = Gf2Vector(v, d)
        coset = primal if b == 0 else dual_coset
        return coset.subspace.contains(vec ^ coset.shift)

    handle = registry.obfuscate(membership, (1, d), "membership", rng)
    return GenStateResult(handle, register, a_space, a1, a2)


@dataclass(frozen=True)
class ProtectResult:
    handle: ObfHandle
    aux: object
    prf_key: pprf.PrfKey  # challenger-side secret; not part of the public view


def protect(
    pp: ObfHandle,
    key: SchemeKey,
    rng: random.Random,
    *,
    x_bits: int,
    y_bits: int,
    registry: ObfuscationRegistry | None = None,
    security_bits: int = 128,
) -> ProtectResult:
    """Wrap the key circuit behind the coset check with a fresh one-time-pad PRF."""
    registry = registry or default_registry()
    prf_key = pprf.setup(security_bits, x_bits, y_bits, rng)
    pad = pprf.full_table(prf_key) if x_bits <= 16 else None
    circuit = key.circuit

    def mask(x: int) -> int:
        return pad[x] if pad is not None else pprf.eval(prf_key, x)

    def program(x: int, b: int, v: int) -> int | None:
        if not pp(b, v):
            return None
        if b == 0:
            return circuit(x) ^ mask(x)
        return mask(x)

    d = pp.input_spec[1]
    handle = registry.obfuscate(program, (x_bits, 1, d), "protected", rng)
    return ProtectResult(handle, key.aux, prf_key)


@dataclass(frozen=True)
class ProtectedProgram:
    """Everything issued for one protected copy, plus the challenger's secrets."""

    pp: ObfHandle
    obf_p: ObfHandle
    aux: object
    register: QuantumRegister
    a_space: Gf2Subspace
    a1: Gf2Vector
    a2: Gf2Vector

    def public_view(self) -> "PirateView":
        return PirateView(self.pp, self.obf_p, self.aux, self.register)


@dataclass(frozen=True)
class PirateView:
    """What an adversary receives: handles, side data, and the quantum register."""

    pp: ObfHandle
    obf_p: ObfHandle
    aux: object
    register: QuantumRegister


def protected_eval(
    obf_p: ObfHandle, register: QuantumRegister, x: int, rng: random.Random
) -> tuple[int, QuantumRegister]:
    """Evaluate the protected program at x, preserving the register.

    Queries the program coherently on the computational basis, rewinds,
    transports to the dual basis, queries again, transports back, and
    returns the XOR of the two branch outputs.  Measuring the reject
    branch raises: the register did not certify either coset.
    """
    y0, register, _ = measure_partition(register, lambda v: obf_p(x, 0, v), rng)
    if y0 is None:
        raise EvaluationFailedError(f"primal branch rejected at input {x:#x}")
    register = hadamard_all(register)
    y1, register, _ = measure_partition(register, lambda v: obf_p(x, 1, v), rng)
    register = hadamard_all(register)
    if y1 is None:
        raise EvaluationFailedError(f"dual branch rejected at input {x:#x}")
    return y0 ^ y1, register


def issue_protected_program(
    scheme: MalleablePuncturableScheme,
    d: int,
    rng: random.Random,
    registry: ObfuscationRegistry | None = None,
) -> tuple[ProtectedProgram, object]:
    """One full issuance: state generation, key setup, protection."""
    registry = registry or default_registry()
    gen = gen_state(d, rng, registry)
    key, state = scheme.chal(rng)
    prot = protect(
        gen.pp,
        key,
        rng,
        x_bits=scheme.input_bits,
        y_bits=scheme.output_bits,
        registry=registry,
    )
    protected = ProtectedProgram(
        pp=gen.pp,
        obf_p=prot.handle,
        aux=prot.aux,
        register=gen.register,
        a_space=gen.a_space,
        a1=gen.a1,
        a2=gen.a2,
    )
    return protected, state


# --- single-evaluator games ------------------------------------------------------


def run_security_game(
    scheme: MalleablePuncturableScheme,
    adversary: Callable[[SchemeKey, object, random.Random], object],
    trials: int,
    rng: random.Random,
) -> float:
    """Monte-Carlo estimate of the base security game's success probability."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    wins = 0
    for _ in range(trials):
        key, state = scheme.chal(rng)
        ak, ch = scheme.samp_ch(state, rng)
        wins += int(scheme.ver(ak, adversary(key, ch, rng)))
    return wins / trials


def honest_adversary(key: SchemeKey, ch: object, rng: random.Random) -> object:
    return key.circuit(ch)


def blind_guess_adversary(output_bits: int):
    def adversary(key, ch, rng: random.Random):
        return rng.getrandbits(output_bits)

    return adversary


def run_malleable_puncturing_game(
    scheme: MalleablePuncturableScheme,
    adversary: Callable,
    trials: int,
    rng: random.Random,
) -> float:
    """The puncturing game: the adversary answers from the punctured circuit.

    Adversary signature: (c_punc, relation, aux, ch, x, rng) -> answer.
    """
    if trials <= 0:
        raise ParameterError("trials must be positive")
    wins = 0
    for _ in range(trials):
        key, state = scheme.chal(rng)
        x = scheme.d_inp(state, rng)
        ak, ch = scheme.samp_ch_from_inp(state, x, rng)
        c_punc = scheme.mall_punc(state, x, rng)
        ans = adversary(c_punc, key.relation, key.aux, ch, x, rng)
        wins += int(scheme.ver(ak, ans))
    return wins / trials


def punctured_circuit_adversary(output_bits: int):
    """Evaluates the punctured circuit on the challenge input, guessing on failure."""

    def adversary(c_punc, relation, aux, ch, x, rng: random.Random):
        y = c_punc(x)
        return y if y is not None else rng.getrandbits(output_bits)

    return adversary


@dataclass(frozen=True)
class PuncturingReport:
    """Exhaustive comparison of the punctured circuit against both candidate contracts."""

    unrelated_points: int
    matches_value_at_point: int  # c_punc(x') == C(x')
    matches_value_at_challenge: int  # c_punc(x') == C(x)


def check_puncturing_correctness(
    scheme: MalleablePuncturableScheme, rng: random.Random
) -> PuncturingReport:
    """Check the puncturing contract over the whole input space.

    Counts agreement under both readings of the contract; the pointwise
    one (c_punc reproduces the circuit at every unrelated point) is the
    one the construction relies on and the one enforced by assertion.
    """
    key, state = scheme.chal(rng)
    x = scheme.d_inp(state, rng)
    c_punc = scheme.mall_punc(state, x, rng)
    unrelated = at_point = at_challenge = 0
    for z in range(1 << scheme.input_bits):
        if key.relation(z) == x:
            continue
        unrelated += 1
        got = c_punc(z)
        if got == key.circuit(z):
            at_point += 1
        if got == key.circuit(x):
            at_challenge += 1
    assert at_point == unrelated, "punctured circuit broke at an unrelated point"
    return PuncturingReport(unrelated, at_point, at_challenge)


# --- pirate adversaries -----------------------------------------------------------


def _hadamard_conjugate(mat: np.ndarray) -> np.ndarray:
    return _walsh_hadamard(_walsh_hadamard(mat).conj().T).conj().T


class HonestSide:
    """Keeps the register and evaluates honestly; its acceptance operator is the
    coset-check sandwich pulled back from its own evaluation procedure."""

    def __init__(self, view: PirateView, output_bits: int) -> None:
        self.view = view
        self.register = view.register
        self.output_bits = output_bits
        self._effect: np.ndarray | None = None

    def answer(self, ch: int, rng: random.Random) -> int:
        try:
            y, self.register = protected_eval(self.view.obf_p, self.register, ch, rng)
            return y
        except EvaluationFailedError:
            return rng.getrandbits(self.output_bits)

    def acceptance_effect(self, ak: object, ch: int) -> np.ndarray:
        if self._effect is None:
            dim = self.register.dim
            d0 = np.array([1.0 if self.view.pp(0, v) else 0.0 for v in range(dim)])
            d1 = np.array([1.0 if self.view.pp(1, v) else 0.0 for v in range(dim)])
            inner = _hadamard_conjugate(np.diag(d1.astype(complex)))
            eff = d0[:, None] * inner * d0[None, :]
            self._effect = eff
        return self._effect

    def quantum_state(self) -> QuantumRegister:
        return self.register


class GuessSide:
    """No register at all: uniformly random answers."""

    def __init__(self, output_bits: int) -> None:
        self.output_bits = output_bits

    def answer(self, ch: int, rng: random.Random) -> int:
        return rng.getrandbits(self.output_bits)

    def acceptance_effect(self, ak: object, ch: int) -> float:
        return 2.0**-self.output_bits

    def quantum_state(self) -> None:
        return None


class ClonerSide:
    """Holds a classical basis-measurement result; pads its one branch with a guess."""

    def __init__(self, view: PirateView, measured: int, output_bits: int) -> None:
        self.view = view
        self.measured = measured
        self.output_bits = output_bits

    def answer(self, ch: int, rng: random.Random) -> int:
        guess = rng.getrandbits(self.output_bits)
        y0 = self.view.obf_p(ch, 0, self.measured)
        return guess if y0 is None else y0 ^ guess

    def acceptance_effect(self, ak: object, ch: int) -> float:
        return 2.0**-self.output_bits

    def quantum_state(self) -> None:
        return None


class ForwardingPirate:
    """Sends the genuine copy to side 1 and junk to side 2."""

    name = "forwarding"

    def __init__(self, output_bits: int) -> None:
        self.output_bits = output_bits

    def split(self, view: PirateView, rng: random.Random):
        return HonestSide(view, self.output_bits), GuessSide(self.output_bits)


class BasisCloningPirate:
    """Measures the register computationally and forwards the outcome to both sides."""

    name = "basis-cloner"

    def __init__(self, output_bits: int) -> None:
        self.output_bits = output_bits

    def split(self, view: PirateView, rng: random.Random):
        v0, _ = measure_computational(view.register, rng)
        return (
            ClonerSide(view, v0, self.output_bits),
            ClonerSide(view, v0, self.output_bits),
        )


# --- two-pirate games --------------------------------------------------------------


@dataclass(frozen=True)
class CopyProtectionReport:
    trials: int
    side1_rate: float
    side2_rate: float
    joint_rate: float


def run_copy_protection_game(
    scheme: MalleablePuncturableScheme,
    pirate,
    trials: int,
    rng: random.Random,
    d: int = 8,
    registry: ObfuscationRegistry | None = None,
) -> CopyProtectionReport:
    """Split one copy, challenge both halves independently, score the AND."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    registry = registry or default_registry()
    s1 = s2 = joint = 0
    for _ in range(trials):
        protected, state = issue_protected_program(scheme, d, rng, registry)
        side1, side2 = pirate.split(protected.public_view(), rng)
        ak1, ch1 = scheme.samp_ch(state, rng)
        ak2, ch2 = scheme.samp_ch(state, rng)
        b1 = scheme.ver(ak1, side1.answer(ch1, rng))
        b2 = scheme.ver(ak2, side2.answer(ch2, rng))
        s1 += b1
        s2 += b2
        joint += b1 and b2
    return CopyProtectionReport(trials, s1 / trials, s2 / trials, joint / trials)


@dataclass(frozen=True)
class StrongAntiPiracyReport:
    trials: int
    side1_rate: float
    side2_rate: float
    joint_rate: float
    threshold: float
    degenerate_threshold: bool


def _threshold_outcome(
    side,
    scheme: MalleablePuncturableScheme,
    state: object,
    eta: float,
    rng: random.Random,
) -> int:
    """Apply the challenge-mixture threshold measurement to one pirate side."""
    challenges = list(scheme.enumerate_challenges(state))
    reg = side.quantum_state()
    if reg is None:
        mean = sum(p * side.acceptance_effect(ak, ch) for p, ak, ch in challenges)
        return int(mean >= eta - EIGEN_TIE_TOL)
    effects = {}
    dist_pairs = []
    for idx, (p, ak, ch) in enumerate(challenges):
        effects[idx] = side.acceptance_effect(ak, ch)
        dist_pairs.append((idx, p))
    family = ProjectiveFamily.from_projectors(
        effects, FiniteDistribution.from_weights(dist_pairs), allow_effects=True
    )
    outcome, collapsed = apply_ti(build_ti(family, eta), reg, rng)
    side.register = collapsed
    return outcome


def run_strong_antipiracy_game(
    scheme: MalleablePuncturableScheme,
    pirate,
    gamma: float,
    trials: int,
    rng: random.Random,
    d: int = 8,
    registry: ObfuscationRegistry | None = None,
) -> StrongAntiPiracyReport:
    """Score both halves with the threshold measurement at p_triv + gamma."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    registry = registry or default_registry()
    eta = scheme.p_triv + gamma
    if eta > 1.0:
        raise ParameterError(f"threshold {eta} above 1")
    s1 = s2 = joint = 0
    for _ in range(trials):
        protected, state = issue_protected_program(scheme, d, rng, registry)
        side1, side2 = pirate.split(protected.public_view(), rng)
        b1 = _threshold_outcome(side1, scheme, state, eta, rng)
        b2 = _threshold_outcome(side2, scheme, state, eta, rng)
        s1 += b1
        s2 += b2
        joint += b1 and b2
    return StrongAntiPiracyReport(
        trials=trials,
        side1_rate=s1 / trials,
        side2_rate=s2 / trials,
        joint_rate=joint / trials,
        threshold=eta,
        degenerate_threshold=gamma <= 0.0,
    )


# --- the coset monogamy game --------------------------------------------------------


@dataclass(frozen=True)
class MoeAdversary:
    """A splitting adversary triple for the coset monogamy game.

    ``split`` receives the register and the public relaxations; the two
    answerers receive the revealed subspace and their own side only.
    """

    name: str
    split: Callable = field(repr=False)
    answer_primal: Callable = field(repr=False)
    answer_dual: Callable = field(repr=False)


@dataclass(frozen=True)
class MoeReport:
    trials: int
    primal_rate: float
    dual_rate: float
    joint_rate: float


def run_moe_trial(
    d: int, adversary: MoeAdversary, rng: random.Random
) -> tuple[bool, bool, CosetInstance]:
    """One round: sample, split, reveal the subspace, check both representatives."""
    inst = sample_coset_instance(d, rng)
    register = prepare_coset_state(inst.a_space, inst.a1, inst.a2)
    side1, side2 = adversary.split(
        register, inst.b1_space, inst.b2_space, inst.t, inst.t_prime, rng
    )
    v = adversary.answer_primal(inst.a_space, side1, rng)
    w = adversary.answer_dual(inst.a_space, side2, rng)
    win1 = v == canonical_rep(Gf2Coset(inst.a_space, inst.a1))
    win2 = w == canonical_rep(Gf2Coset(dual(inst.a_space), inst.a2))
    return win1, win2, inst


def run_moe_game(
    d: int, adversary: MoeAdversary, trials: int, rng: random.Random
) -> MoeReport:
    """Both isolated parties must name their coset's canonical representative."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    p = q = joint = 0
    for _ in range(trials):
        win1, win2, _ = run_moe_trial(d, adversary, rng)
        p += win1
        q += win2
        joint += win1 and win2
    return MoeReport(trials, p / trials, q / trials, joint / trials)


def _split_basis_adversary() -> MoeAdversary:
    def split(register, b1, b2, t, t_prime, rng):
        v0, _ = measure_computational(register, rng)
        return v0, None

    def answer_primal(a_space, side, rng):
        return canonical_rep(Gf2Coset(a_space, Gf2Vector(side, a_space.ambient_dim)))

    def answer_dual(a_space, side, rng):
        return canonical_rep(
            Gf2Coset(dual(a_space), random_vector(a_space.ambient_dim, rng))
        )

    return MoeAdversary("split-basis", split, answer_primal, answer_dual)


def _split_hadamard_adversary() -> MoeAdversary:
    def split(register, b1, b2, t, t_prime, rng):
        w0, _ = measure_computational(hadamard_all(register), rng)
        return None, w0

    def answer_primal(a_space, side, rng):
        return canonical_rep(Gf2Coset(a_space, random_vector(a_space.ambient_dim, rng)))

    def answer_dual(a_space, side, rng):
        return canonical_rep(
            Gf2Coset(dual(a_space), Gf2Vector(side, a_space.ambient_dim))
        )

    return MoeAdversary("split-hadamard", split, answer_primal, answer_dual)


def _split_informed_adversary() -> MoeAdversary:
    """Register to the primal side; the dual side guesses inside its revealed coset."""

    def split(register, b1, b2, t, t_prime, rng):
        return register, (b2, t_prime)

    def answer_primal(a_space, side, rng):
        v0, _ = measure_computational(side, rng)
        return canonical_rep(Gf2Coset(a_space, Gf2Vector(v0, a_space.ambient_dim)))

    def answer_dual(a_space, side, rng):
        b2, t_prime = side
        z = dual(b2).random_element(rng)
        return canonical_rep(Gf2Coset(dual(a_space), t_prime ^ z))

    return MoeAdversary("split-informed", split, answer_primal, answer_dual)


BUILTIN_MOE_ADVERSARIES: dict[str, Callable[[], MoeAdversary]] = {
    "split-basis": _split_basis_adversary,
    "split-hadamard": _split_hadamard_adversary,
    "split-informed": _split_informed_adversary,
}


def analytic_moe_rate(name: str, d: int) -> float:
    """Exact joint win rate of a built-in adversary, by counting cosets.

    The winning side is deterministic; the guessing side hits one coset
    representative among 2^(d/2) (uninformed) or, knowing its coset's
    public relaxation, among the 2^(d/4) candidate cosets inside it.
    """
    if name in ("split-basis", "split-hadamard"):
        return 2.0 ** -(d // 2)
    if name == "split-informed":
        return 2.0 ** -(d // 4)
    raise ParameterError(f"unknown adversary {name!r}")


def make_pirate(name: str, output_bits: int):
    if name == "forwarding":
        return ForwardingPirate(output_bits)
    if name == "basis-cloner":
        return BasisCloningPirate(output_bits)
    raise ParameterError(f"unknown pirate {name!r}")


# --- rewrite-step program pairs ------------------------------------------------------


def membership_programs(
    inst, rng: random.Random, registry: ObfuscationRegistry | None = None
) -> tuple[ObfHandle, ObfHandle]:
    """The strict/relaxed membership pair for a sampled coset instance.

    The relaxed program checks the public superspace cosets instead of the
    hidden ones; since those strictly contain the hidden cosets, the two
    programs differ and the equivalence checker must find a witness.
    """
    registry = registry or default_registry()
    d = inst.a_space.ambient_dim
    strict_primal = Gf2Coset(inst.a_space, inst.a1)
    strict_dual = Gf2Coset(dual(inst.a_space), inst.a2)
    relaxed_primal = Gf2Coset(inst.b1_space, inst.t)
    relaxed_dual = Gf2Coset(dual(inst.b2_space), inst.t_prime)

    def strict(b: int, v: int) -> bool:
        coset = strict_primal if b == 0 else strict_dual
        return coset.subspace.contains(Gf2Vector(v, d) ^ coset.shift)

    def relaxed(b: int, v: int) -> bool:
        coset = relaxed_primal if b == 0 else relaxed_dual
        return coset.subspace.contains(Gf2Vector(v, d) ^ coset.shift)

    return (
        registry.obfuscate(strict, (1, d), "membership", rng),
        registry.obfuscate(relaxed, (1, d), "membership", rng),
    )


def _prg_bits(seed: int, out_bits: int) -> int:
    """Hash-chain expander used for the mask strings inside rewrite-step programs."""
    seed_bytes = seed.to_bytes(max((seed.bit_length() + 7) // 8, 1), "big")
    blocks = []
    counter = 0
    while 256 * len(blocks) < out_bits:
        blocks.append(
            hashlib.sha256(b"prg" + seed_bytes + counter.to_bytes(4, "big")).digest()
        )
        counter += 1
    raw = int.from_bytes(b"".join(blocks), "big")
    return raw >> (256 * len(blocks) - out_bits)


def _decode_payload(pl: int, n_bits: int, d: int) -> tuple[int, Gf2Subspace, int, int]:
    """Total fixed-layout parse of a decapsulated payload.

    Layout: direction bit, then packed subspace rows, then seed and mask
    material; at toy message widths the trailing fields overlap, which is
    harmless because every caller's decapsulation key rejects the inputs
    that could reach this parse.
    """
    t = (pl >> (n_bits - 1)) & 1 if n_bits > 0 else 0
    body = pl & ((1 << max(n_bits - 1, 0)) - 1)
    rows = [Gf2Vector((body >> (i * d)) & ((1 << d) - 1), d) for i in range(d // 2)]
    return t, rref(rows, ambient_dim=d), body, body


def protect_with_payload_branch(
    pp: ObfHandle,
    key: SchemeKey,
    prf_key: pprf.PrfKey,
    decap,
    circuit_mask: int,
    prf_key_mask: int,
    rng: random.Random,
    *,
    x_bits: int,
    y_bits: int,
    registry: ObfuscationRegistry | None = None,
) -> ObfHandle:
    """The protected program extended with an embedded-payload path.

    Inputs whose related point decapsulates under the carried key are
    obeyed: the payload names a coset family, a digest of the exhibited
    witness unmasks one of the two carried strings, and the program
    answers from the unmasked circuit (primal direction) or PRF key (dual
    direction) instead of its own.  With a decapsulation key that rejects
    everything the path is unreachable, making this program functionally
    identical to the plain protected program built from the same parts;
    the equivalence checker certifies exactly that.
    """
    from .ace import ace_dec, toeplitz_extract

    registry = registry or default_registry()
    pad = pprf.full_table(prf_key) if x_bits <= 16 else None

    def mask(x: int) -> int:
        return pad[x] if pad is not None else pprf.eval(prf_key, x)

    circuit = key.circuit
    relation = key.relation
    d = pp.input_spec[1]
    table_bits = (1 << x_bits) * y_bits
    y_mask = (1 << y_bits) - 1
    key_bits = 8 * len(prf_key.root_seed)

    def program(x: int, b: int, v: int) -> int | None:
        if not pp(b, v):
            return None
        related = relation(x)
        payload = ace_dec(decap, related)
        if payload is not None:
            t, space, se_bits, z = _decode_payload(payload, decap.n, d)
            if (b == 0 and t == 0) or (b == 1 and t == 1):
                target = space if t == 0 else dual(space)
                witness = canonical_rep(Gf2Coset(target, Gf2Vector(v, d)))
                digest = toeplitz_extract(
                    se_bits, max(se_bits.bit_length(), 2 * d - 1) + 1, witness.value, d, d
                )
                unmask = digest ^ z
                if t == 0:
                    table = circuit_mask ^ _prg_bits(unmask, table_bits)
                    shift = table_bits - (x + 1) * y_bits
                    return ((table >> shift) & y_mask) ^ mask(x)
                seed_int = prf_key_mask ^ _prg_bits(unmask, key_bits)
                inner = pprf.PrfKey(
                    seed_int.to_bytes(key_bits // 8, "big"), x_bits, y_bits
                )
                return pprf.eval(inner, x)
        if b == 0:
            return circuit(x) ^ mask(x)
        return mask(x)

    return registry.obfuscate(program, (x_bits, 1, d), "protected", rng)
