"""Asymmetrically constrained encapsulation with a steganographic encoder.

A secret key is two inner PRF keys plus an extractor seed.  Encapsulation
of an n-bit message m is deterministic: alpha = PRF1(m) (3n bits, so the
image is sparse), beta = PRF2(alpha) xor m, ciphertext alpha || beta of
width 4n.  Key generation bakes a puncturing predicate into the programs
and registers them with the obfuscation registry, so holders of the
resulting handles can evaluate but not inspect them.

The steganographic encoder embeds the inner ciphertext into a sample of a
caller-chosen high-entropy distribution by rejection: draw until the
Toeplitz extractor of the draw equals the inner ciphertext, giving up
after the truncated-resampling try budget.  For the bit-uniform sources
used at full width the loop is realized in its exact closed form (a
Bernoulli for the success event plus a uniform draw from the matching
affine solution space), which has identical law and desk-scale cost.

``None`` is the bottom output of plain Enc/Dec; the steganographic
encoder distinguishes its two bottom reasons with the ``Bottom`` enum.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from . import pprf
from .errors import CapacityError, DimensionMismatchError, ParameterError
from .gf2 import solve_linear_system
from .obf import ObfHandle, ObfuscationRegistry, default_registry
from .resample import FiniteDistribution, UniformBitsDistribution, truncated_limit

MAX_MESSAGE_BITS = 16
MAX_PREDICATE_SIZE = 64
MAX_SAMPLE_BITS = 64
LITERAL_LOOP_CAP = 1_000_000


class Bottom(enum.Enum):
    """Why the steganographic encoder produced no sample."""

    PUNCTURED = "punctured"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class PuncturingPredicate:
    """A total boolean circuit over messages; TRUE marks punctured-out messages."""

    fn: Callable[[int], bool] = field(repr=False)
    description: str = "?"
    size: int = 1

    def __post_init__(self) -> None:
        if self.size > MAX_PREDICATE_SIZE:
            raise CapacityError(f"predicate size {self.size} above {MAX_PREDICATE_SIZE}")

    def __call__(self, m: int) -> bool:
        return bool(self.fn(m))


def false_predicate() -> PuncturingPredicate:
    return PuncturingPredicate(lambda m: False, "false")


def true_predicate() -> PuncturingPredicate:
    return PuncturingPredicate(lambda m: True, "true")


def point_predicate(m_star: int) -> PuncturingPredicate:
    return PuncturingPredicate(lambda m: m == m_star, f"point:{m_star:x}")


def prefix_predicate(first_bit: int, n: int) -> PuncturingPredicate:
    """Punctures every message whose leading bit differs from ``first_bit``."""
    return PuncturingPredicate(
        lambda m: ((m >> (n - 1)) & 1) != first_bit, f"prefix:{first_bit}"
    )


@dataclass(frozen=True)
class AceSecretKey:
    k1: pprf.PrfKey  # n -> 3n
    k2: pprf.PrfKey  # 3n -> n
    seed: int
    seed_bits: int
    n: int
    max_sample_bits: int

    @property
    def ciphertext_bits(self) -> int:
        return 4 * self.n


@dataclass(frozen=True)
class AceEncapKey:
    program: ObfHandle
    seed: int
    seed_bits: int
    n: int
    max_sample_bits: int


@dataclass(frozen=True)
class AceDecapKey:
    program: ObfHandle
    seed: int
    seed_bits: int
    n: int
    max_sample_bits: int


def ace_setup(
    n: int,
    rng: random.Random,
    security_bits: int = 128,
    max_sample_bits: int = MAX_SAMPLE_BITS,
) -> AceSecretKey:
    """Fresh independent inner keys and extractor seed for n-bit messages."""
    if not 1 <= n <= MAX_MESSAGE_BITS:
        raise ParameterError(f"message bits {n} outside 1..{MAX_MESSAGE_BITS}")
    if max_sample_bits > MAX_SAMPLE_BITS or max_sample_bits < 4 * n:
        raise ParameterError(
            f"max_sample_bits {max_sample_bits} outside {4 * n}..{MAX_SAMPLE_BITS}"
        )
    k1 = pprf.setup(security_bits, n, 3 * n, rng)
    k2 = pprf.setup(security_bits, 3 * n, n, rng)
    seed_bits = 4 * n + max_sample_bits - 1
    seed = rng.getrandbits(seed_bits)
    return AceSecretKey(k1, k2, seed, seed_bits, n, max_sample_bits)


def _memoized_eval(key: pprf.PrfKey) -> Callable[[int], int]:
    return lru_cache(maxsize=None)(lambda x: pprf.eval(key, x))


def gen_ek(
    sk: AceSecretKey,
    predicate: PuncturingPredicate,
    rng: random.Random,
    registry: ObfuscationRegistry | None = None,
) -> AceEncapKey:
    """Registered encapsulation program with the predicate baked in."""
    registry = registry or default_registry()
    n = sk.n
    prf1 = _memoized_eval(sk.k1)
    prf2 = _memoized_eval(sk.k2)

    def enc_program(m: int) -> int | None:
        if predicate(m):
            return None
        alpha = prf1(m)
        beta = prf2(alpha) ^ m
        return (alpha << n) | beta

    handle = registry.obfuscate(enc_program, (n,), "ace-enc", rng)
    return AceEncapKey(handle, sk.seed, sk.seed_bits, n, sk.max_sample_bits)


def gen_dk(
    sk: AceSecretKey,
    predicate: PuncturingPredicate,
    rng: random.Random,
    registry: ObfuscationRegistry | None = None,
) -> AceDecapKey:
    """Registered decapsulation program; the predicate vets the recovered message."""
    registry = registry or default_registry()
    n = sk.n
    prf1 = _memoized_eval(sk.k1)
    prf2 = _memoized_eval(sk.k2)
    mask = (1 << n) - 1

    def dec_program(ct: int) -> int | None:
        alpha = ct >> n
        beta = ct & mask
        m = prf2(alpha) ^ beta
        if prf1(m) != alpha:
            return None
        if predicate(m):
            return None
        return m

    handle = registry.obfuscate(dec_program, (4 * n,), "ace-dec", rng)
    return AceDecapKey(handle, sk.seed, sk.seed_bits, n, sk.max_sample_bits)


def punctured_encap_program(
    sk: AceSecretKey,
    predicate: PuncturingPredicate,
    punctured_message: int,
    rng: random.Random,
    registry: ObfuscationRegistry | None = None,
) -> AceEncapKey:
    """Encapsulation key rebuilt from an inner PRF key punctured at one message.

    Functionally interchangeable with the ordinary key whenever the
    predicate already rejects the punctured message (the first of the
    ciphertext-hiding rewrite steps, verified by the equivalence checker).
    """
    registry = registry or default_registry()
    n = sk.n
    pk1 = pprf.puncture(sk.k1, {punctured_message})
    prf2 = _memoized_eval(sk.k2)

    def enc_program(m: int) -> int | None:
        if predicate(m):
            return None
        alpha = pprf.punctured_eval(pk1, m)
        if alpha is None:
            return None
        beta = prf2(alpha) ^ m
        return (alpha << n) | beta

    handle = registry.obfuscate(enc_program, (n,), "ace-enc", rng)
    return AceEncapKey(handle, sk.seed, sk.seed_bits, n, sk.max_sample_bits)


def punctured_decap_program(
    sk: AceSecretKey,
    predicate: PuncturingPredicate,
    punctured_message: int,
    rng: random.Random,
    registry: ObfuscationRegistry | None = None,
) -> AceDecapKey:
    """Decapsulation key whose consistency check runs on a punctured inner key."""
    registry = registry or default_registry()
    n = sk.n
    pk1 = pprf.puncture(sk.k1, {punctured_message})
    prf2 = _memoized_eval(sk.k2)
    mask = (1 << n) - 1

    def dec_program(ct: int) -> int | None:
        alpha = ct >> n
        beta = ct & mask
        m = prf2(alpha) ^ beta
        if pprf.punctured_eval(pk1, m) != alpha:
            return None
        if predicate(m):
            return None
        return m

    handle = registry.obfuscate(dec_program, (4 * n,), "ace-dec", rng)
    return AceDecapKey(handle, sk.seed, sk.seed_bits, n, sk.max_sample_bits)


def ace_enc(ek: AceEncapKey, m: int) -> int | None:
    if not 0 <= m < (1 << ek.n):
        raise DimensionMismatchError(f"message {m} does not fit in {ek.n} bits")
    return ek.program(m)


def ace_dec(dk: AceDecapKey, ct: int) -> int | None:
    if not 0 <= ct < (1 << (4 * dk.n)):
        raise DimensionMismatchError(f"ciphertext {ct} does not fit in {4 * dk.n} bits")
    return dk.program(ct)


def _seed_bit(seed: int, seed_bits: int, index: int) -> int:
    return (seed >> (seed_bits - 1 - index)) & 1


def toeplitz_rows(seed: int, seed_bits: int, sample_bits: int, out_bits: int) -> list[int]:
    """Packed rows of the Toeplitz matrix T[i][j] = seed_bit[j - i + out_bits - 1]."""
    if seed_bits < out_bits + sample_bits - 1:
        raise ParameterError(
            f"seed of {seed_bits} bits too short for {out_bits}x{sample_bits}"
        )
    rows = []
    for i in range(out_bits):
        row = 0
        for j in range(sample_bits):
            if _seed_bit(seed, seed_bits, j - i + out_bits - 1):
                row |= 1 << (sample_bits - 1 - j)
        rows.append(row)
    return rows


def toeplitz_extract(
    seed: int, seed_bits: int, sample: int, sample_bits: int, out_bits: int
) -> int:
    """Universal-hash extractor: multiply the sample by the seeded Toeplitz matrix."""
    if not 0 <= sample < (1 << sample_bits):
        raise DimensionMismatchError(f"sample does not fit in {sample_bits} bits")
    if sample_bits < out_bits:
        raise ParameterError(f"sample width {sample_bits} below output width {out_bits}")
    out = 0
    for i, row in enumerate(toeplitz_rows(seed, seed_bits, sample_bits, out_bits)):
        if (row & sample).bit_count() & 1:
            out |= 1 << (out_bits - 1 - i)
    return out


def extract(key: AceEncapKey | AceDecapKey | AceSecretKey, sample: int, sample_bits: int) -> int:
    """The scheme's extractor: sample -> ciphertext-width digest under the key's seed."""
    return toeplitz_extract(key.seed, key.seed_bits, sample, sample_bits, 4 * key.n)


def _check_admissible(dist, n: int, sample_bits: int, max_sample_bits: int) -> None:
    if sample_bits < 4 * n:
        raise ParameterError(f"sample width {sample_bits} below ciphertext width {4 * n}")
    if sample_bits > max_sample_bits:
        raise CapacityError(f"sample width {sample_bits} above seed coverage {max_sample_bits}")
    if dist.min_entropy < 4 * n:
        raise ParameterError(
            f"distribution min-entropy {dist.min_entropy:.2f} below {4 * n}"
        )


def steg_enc(
    ek: AceEncapKey,
    m: int,
    dist: FiniteDistribution | UniformBitsDistribution,
    epsilon: float,
    rng: random.Random,
    sample_bits: int | None = None,
) -> int | Bottom:
    """Embed the encapsulation of m into a sample of the admissible distribution.

    Rejection-samples until the extractor of the draw equals the inner
    ciphertext, giving up after the truncated-resampling try budget.
    Returns Bottom.PUNCTURED immediately when the key refuses m, and
    Bottom.EXHAUSTED when the budget runs out.
    """
    if sample_bits is None:
        if not isinstance(dist, UniformBitsDistribution):
            raise ParameterError("sample_bits is required for explicit distributions")
        sample_bits = dist.bits
    _check_admissible(dist, ek.n, sample_bits, ek.max_sample_bits)
    ict = ace_enc(ek, m)
    if ict is None:
        return Bottom.PUNCTURED
    t_limit = truncated_limit(epsilon, dist.support_size)
    out_bits = 4 * ek.n

    if isinstance(dist, UniformBitsDistribution):
        # exact law of the counted loop: the per-draw hit probability is
        # 2^-rank(T) when the linear system T s = ict is solvable, else 0
        rows = toeplitz_rows(ek.seed, ek.seed_bits, sample_bits, out_bits)
        rhs = [(ict >> (out_bits - 1 - i)) & 1 for i in range(out_bits)]
        solution = solve_linear_system(rows, sample_bits, rhs)
        if solution is None:
            return Bottom.EXHAUSTED
        particular, kernel = solution
        rank = sample_bits - len(kernel)
        fail_prob = math.exp(t_limit * math.log1p(-(2.0**-rank))) if rank else 0.0
        if rng.random() < fail_prob:
            return Bottom.EXHAUSTED
        s = particular
        picks = rng.getrandbits(len(kernel)) if kernel else 0
        for idx, vec in enumerate(kernel):
            if (picks >> idx) & 1:
                s ^= vec
        return s

    if t_limit <= LITERAL_LOOP_CAP:
        for _ in range(t_limit):
            probe = dist.sample(rng)
            if toeplitz_extract(ek.seed, ek.seed_bits, probe, sample_bits, out_bits) == ict:
                return probe
        return Bottom.EXHAUSTED

    # large explicit support: same law, computed from the class mass
    q = sum(
        p
        for v, p in zip(dist.support, dist.probs)
        if toeplitz_extract(ek.seed, ek.seed_bits, v, sample_bits, out_bits) == ict
    )
    if q == 0.0:
        return Bottom.EXHAUSTED
    if rng.random() < math.exp(t_limit * math.log1p(-q)):
        return Bottom.EXHAUSTED
    members = [
        (v, p)
        for v, p in zip(dist.support, dist.probs)
        if toeplitz_extract(ek.seed, ek.seed_bits, v, sample_bits, out_bits) == ict
    ]
    u = rng.random() * q
    acc = 0.0
    for v, p in members:
        acc += p
        if u <= acc:
            return v
    return members[-1][0]


def steg_dec(dk: AceDecapKey, sample: int, sample_bits: int) -> int | None:
    """Extractor followed by decapsulation."""
    if not 0 <= sample < (1 << sample_bits):
        raise DimensionMismatchError(f"sample does not fit in {sample_bits} bits")
    if sample_bits < 4 * dk.n or sample_bits > dk.max_sample_bits:
        raise DimensionMismatchError(f"sample width {sample_bits} out of range")
    return ace_dec(dk, extract(dk, sample, sample_bits))


# --- correctness property suite ------------------------------------------------

STANDARD_PREDICATES = ("false", "point", "prefix0", "prefix1")


def standard_predicate_family(n: int, point: int) -> dict[str, PuncturingPredicate]:
    return {
        "false": false_predicate(),
        "point": point_predicate(point),
        "prefix0": prefix_predicate(0, n),
        "prefix1": prefix_predicate(1, n),
    }


def check_correctness_properties(
    n: int,
    rng: random.Random,
    message_probes: list[int] | None = None,
    ciphertext_probes: list[int] | None = None,
    registry: ObfuscationRegistry | None = None,
) -> dict[str, int]:
    """Verify the five encapsulation contracts over a predicate family.

    Returns the number of checks performed per property; raises
    AssertionError with a description on the first violation.  Probe lists
    default to the full message and ciphertext spaces.
    """
    registry = registry or ObfuscationRegistry()
    sk = ace_setup(n, rng)
    messages = message_probes if message_probes is not None else list(range(1 << n))
    strings = (
        ciphertext_probes if ciphertext_probes is not None else list(range(1 << (4 * n)))
    )
    preds = standard_predicate_family(n, point=messages[0])
    eks = {name: gen_ek(sk, p, rng, registry) for name, p in preds.items()}
    dks = {name: gen_dk(sk, p, rng, registry) for name, p in preds.items()}
    ek_free = eks["false"]
    dk_free = dks["false"]
    counts = dict.fromkeys(
        ("decapsulation", "enc_equivalence", "dec_safety", "dec_equivalence", "unique"), 0
    )

    for name_e, pred_e in preds.items():
        for name_d, pred_d in preds.items():
            for m in messages:
                if pred_e(m) or pred_d(m):
                    continue
                ct = ace_enc(eks[name_e], m)
                got = ace_dec(dks[name_d], ct)
                assert got == m, f"decapsulation broke: {name_e}/{name_d} m={m:x}"
                counts["decapsulation"] += 1

    for name, pred in preds.items():
        for m in messages:
            if pred(m):
                assert ace_enc(eks[name], m) is None
                continue
            assert ace_enc(eks[name], m) == ace_enc(ek_free, m), f"enc differs: {name}"
            counts["enc_equivalence"] += 1

    for name, pred in preds.items():
        for ct in strings:
            m1 = ace_dec(dks[name], ct)
            assert m1 is None or not pred(m1), f"safety broke: {name} ct={ct:x}"
            counts["dec_safety"] += 1
            m2 = ace_dec(dk_free, ct)
            agree = m1 == m2
            constrained_away = m1 is None and m2 is not None and pred(m2)
            assert agree or constrained_away, f"dec equivalence broke: {name} ct={ct:x}"
            counts["dec_equivalence"] += 1

    canonical: dict[int, int] = {}
    for m in dict.fromkeys(messages):
        ct = ace_enc(ek_free, m)
        assert ace_dec(dk_free, ct) == m
        assert ct not in canonical, f"messages {canonical[ct]:x} and {m:x} collide"
        canonical[ct] = m
        counts["unique"] += 1
    for ct in strings:
        m = ace_dec(dk_free, ct)
        if m is None:
            continue
        expected_ct = ace_enc(ek_free, m)
        assert ct == expected_ct, f"two encapsulations decode to {m:x}"
        counts["unique"] += 1
    return counts


# --- security-game harnesses (runnable; no security is claimed) ----------------


def coin_distinguisher(rng: random.Random, *_args) -> int:
    return rng.getrandbits(1)


def run_puncture_hiding_game(
    n: int,
    pred_enc: PuncturingPredicate,
    pred0: PuncturingPredicate,
    pred1: PuncturingPredicate,
    distinguisher: Callable,
    trials: int,
    rng: random.Random,
) -> float:
    """Distinguish decap keys punctured at pred0 vs pred1; returns win frequency."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    registry = ObfuscationRegistry()
    wins = 0
    for _ in range(trials):
        sk = ace_setup(n, rng)
        ek = gen_ek(sk, pred_enc, rng, registry)
        b = rng.getrandbits(1)
        dk = gen_dk(sk, pred1 if b else pred0, rng, registry)
        wins += int(distinguisher(rng, ek, dk) == b)
    return wins / trials


def run_pseudorandom_ciphertext_game(
    n: int,
    messages: list[int],
    distinguisher: Callable,
    trials: int,
    rng: random.Random,
) -> float:
    """Real encapsulations of punctured messages vs uniform strings."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    registry = ObfuscationRegistry()
    wins = 0
    for _ in range(trials):
        sk = ace_setup(n, rng)
        ek = gen_ek(sk, false_predicate(), rng, registry)
        b = rng.getrandbits(1)
        if b:
            challenge = [rng.getrandbits(4 * n) for _ in messages]
        else:
            challenge = [ace_enc(ek, m) for m in messages]
        wins += int(distinguisher(rng, challenge) == b)
    return wins / trials


def run_steg_ciphertext_game(
    n: int,
    messages: list[int],
    dist: UniformBitsDistribution,
    epsilon: float,
    distinguisher: Callable,
    trials: int,
    rng: random.Random,
) -> float:
    """Steganographic embeddings vs fresh samples of the cover distribution."""
    if trials <= 0:
        raise ParameterError("trials must be positive")
    registry = ObfuscationRegistry()
    wins = 0
    for _ in range(trials):
        sk = ace_setup(n, rng)
        ek = gen_ek(sk, false_predicate(), rng, registry)
        b = rng.getrandbits(1)
        if b:
            challenge = [dist.sample(rng) for _ in messages]
        else:
            challenge = [steg_enc(ek, m, dist, epsilon, rng) for m in messages]
        wins += int(distinguisher(rng, challenge) == b)
    return wins / trials
