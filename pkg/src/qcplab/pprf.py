"""GGM-tree puncturable PRF: setup, eval, set-puncturing, punctured eval.

The length-doubling PRG is a SHA-256 based expander: a node seed maps to
its two child seeds via domain-separated hashing, and a leaf seed expands
to the n-bit output through a hashed counter chain.  Only correctness is
asserted anywhere in this package; the distinguishing games are not a
testable surface at desk scale.

Inputs and outputs are ints carrying a declared bit width (most
significant bit first, matching the rest of the package).  Punctured
evaluation signals a punctured point by returning ``None``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

from .errors import ParameterError

MAX_INPUT_BITS = 32
MAX_OUTPUT_BITS = 1024


def _child_seed(seed: bytes, bit: int) -> bytes:
    return hashlib.sha256(b"node" + seed + bytes([bit])).digest()[: len(seed)]


def _expand_output(seed: bytes, output_bits: int) -> int:
    blocks = []
    counter = 0
    while 8 * 32 * len(blocks) < output_bits:
        blocks.append(
            hashlib.sha256(b"leaf" + seed + counter.to_bytes(4, "big")).digest()
        )
        counter += 1
    raw = int.from_bytes(b"".join(blocks), "big")
    excess = 8 * 32 * len(blocks) - output_bits
    return raw >> excess


def _check_input(x: int, input_bits: int) -> None:
    if not 0 <= x < (1 << input_bits):
        raise ParameterError(f"input {x} does not fit in {input_bits} bits")


@dataclass(frozen=True)
class PrfKey:
    """Root of a GGM tree over inputs of ``input_bits`` bits."""

    root_seed: bytes
    input_bits: int
    output_bits: int

    def to_hex(self) -> str:
        return f"{self.input_bits}/{self.output_bits}/{self.root_seed.hex()}"

    @classmethod
    def from_hex(cls, text: str) -> "PrfKey":
        m, n, seed = text.split("/")
        return cls(bytes.fromhex(seed), int(m), int(n))


@dataclass(frozen=True)
class PuncturedPrfKey:
    """Co-path form of a GGM key: seeds covering every leaf outside the punctured set.

    ``copath_nodes`` maps (depth, prefix) to the node seed, where ``prefix``
    holds the top ``depth`` input bits.
    """

    punctured_set: frozenset[int]
    copath_nodes: dict[tuple[int, int], bytes] = field(repr=False)
    input_bits: int = 0
    output_bits: int = 0


def setup(security_bits: int, input_bits: int, output_bits: int, rng: random.Random) -> PrfKey:
    """Sample a fresh key with a uniformly random root seed."""
    if input_bits < 1 or input_bits > MAX_INPUT_BITS:
        raise ParameterError(f"input_bits {input_bits} outside 1..{MAX_INPUT_BITS}")
    if output_bits < 1 or output_bits > MAX_OUTPUT_BITS:
        raise ParameterError(f"output_bits {output_bits} outside 1..{MAX_OUTPUT_BITS}")
    if security_bits % 8 != 0 or security_bits < 64:
        raise ParameterError("security_bits must be a multiple of 8, at least 64")
    seed = rng.getrandbits(security_bits).to_bytes(security_bits // 8, "big")
    return PrfKey(seed, input_bits, output_bits)


def eval(key: PrfKey, x: int) -> int:
    """Deterministic GGM leaf value: walk x's bits from the root, then expand."""
    _check_input(x, key.input_bits)
    seed = key.root_seed
    for i in range(key.input_bits - 1, -1, -1):
        seed = _child_seed(seed, (x >> i) & 1)
    return _expand_output(seed, key.output_bits)


def full_table(key: PrfKey) -> list[int]:
    """All 2^m outputs, computed level by level (much faster than 2^m root walks)."""
    if key.input_bits > 20:
        raise ParameterError(f"full table at m={key.input_bits} is too large")
    level = [key.root_seed]
    for _ in range(key.input_bits):
        level = [c for s in level for c in (_child_seed(s, 0), _child_seed(s, 1))]
    return [_expand_output(s, key.output_bits) for s in level]


def puncture(key: PrfKey, punctured: set[int] | frozenset[int]) -> PuncturedPrfKey:
    """Produce the co-path key deriving every input outside ``punctured``.

    An empty set is allowed and yields a key equivalent to the full key
    (the root seed is the single cover node).
    """
    for x in punctured:
        _check_input(x, key.input_bits)
    s = frozenset(punctured)
    copath: dict[tuple[int, int], bytes] = {}

    def cover(depth: int, prefix: int, seed: bytes, hits: list[int]) -> None:
        if not hits:
            copath[(depth, prefix)] = seed
            return
        if depth == key.input_bits:
            return  # a punctured leaf: contribute nothing
        shift = key.input_bits - depth - 1
        left = [x for x in hits if not (x >> shift) & 1]
        right = [x for x in hits if (x >> shift) & 1]
        cover(depth + 1, prefix << 1, _child_seed(seed, 0), left)
        cover(depth + 1, (prefix << 1) | 1, _child_seed(seed, 1), right)

    cover(0, 0, key.root_seed, sorted(s))
    return PuncturedPrfKey(s, copath, key.input_bits, key.output_bits)


def punctured_eval(pk: PuncturedPrfKey, x: int) -> int | None:
    """Value at x derived from the co-path, or None when x was punctured."""
    _check_input(x, pk.input_bits)
    for depth in range(pk.input_bits + 1):
        prefix = x >> (pk.input_bits - depth)
        seed = pk.copath_nodes.get((depth, prefix))
        if seed is not None:
            for i in range(pk.input_bits - depth - 1, -1, -1):
                seed = _child_seed(seed, (x >> i) & 1)
            return _expand_output(seed, pk.output_bits)
    return None


def reachable_inputs(pk: PuncturedPrfKey) -> set[int]:
    """All inputs the punctured key can still derive."""
    out: set[int] = set()
    for (depth, prefix), _ in pk.copath_nodes.items():
        width = pk.input_bits - depth
        base = prefix << width
        out.update(range(base, base + (1 << width)))
    return out
