"""Opaque-handle stand-in for an obfuscation oracle.

Programs are registered with a trusted in-process registry that hands back
evaluable handles.  Game code only ever sees handles: a handle exposes its
id, input spec and declared size class, and can be called, but the wrapped
function is reachable only through the registry's private table.  The
testable content of every "same functionality" step is made first-class by
a brute-force equivalence checker over enumerable domains.
"""

from __future__ import annotations

import itertools
import random
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

from .errors import CapacityError, DimensionMismatchError

MAX_DOMAIN_POINTS = 1 << 22

# input spec: bit width per argument; each argument ranges over 0..2^w - 1
InputSpec = tuple[int, ...]


def domain_size(spec: InputSpec) -> int:
    size = 1
    for w in spec:
        size <<= w
    return size


def enumerate_domain(spec: InputSpec) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(1 << w) for w in spec))


class ObfHandle:
    """An evaluable, otherwise opaque, registered program."""

    __slots__ = ("program_id", "input_spec", "size_pad", "_registry")

    def __init__(self, program_id: str, input_spec: InputSpec, size_pad: str, registry):
        self.program_id = program_id
        self.input_spec = input_spec
        self.size_pad = size_pad
        self._registry = registry

    def __call__(self, *args):
        return self._registry._evaluate(self.program_id, args)

    def __repr__(self) -> str:
        return (
            f"ObfHandle(program_id={self.program_id!r}, "
            f"input_spec={self.input_spec!r}, size_pad={self.size_pad!r})"
        )


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    counterexample: tuple | None
    points_checked: int

    def __bool__(self) -> bool:
        return self.equivalent


class ObfuscationRegistry:
    """Append-only table of registered programs, keyed by opaque tokens."""

    def __init__(self) -> None:
        self._fns: dict[str, Callable] = {}

    def obfuscate(
        self,
        fn: Callable,
        input_spec: InputSpec,
        size_pad: str,
        rng: random.Random,
    ) -> ObfHandle:
        """Register a pure total function, returning a fresh opaque handle."""
        while True:
            program_id = f"obf-{rng.getrandbits(64):016x}"
            if program_id not in self._fns:
                break
        self._fns[program_id] = fn
        return ObfHandle(program_id, tuple(input_spec), size_pad, self)

    def _evaluate(self, program_id: str, args: tuple):
        return self._fns[program_id](*args)

    def check_equivalence(
        self,
        h1: ObfHandle,
        h2: ObfHandle,
        domain_enumerator: Iterable[tuple] | None = None,
    ) -> EquivalenceResult:
        """Exhaustively compare two handles; first counterexample wins.

        When no enumerator is supplied the full domain from the shared
        input spec is used.  Comparing across size classes is suspicious
        but allowed with a warning.
        """
        if h1.input_spec != h2.input_spec:
            raise DimensionMismatchError(
                f"input specs differ: {h1.input_spec} vs {h2.input_spec}"
            )
        if h1.size_pad != h2.size_pad:
            warnings.warn(
                f"comparing programs with different size classes "
                f"({h1.size_pad!r} vs {h2.size_pad!r})",
                stacklevel=2,
            )
        if domain_enumerator is None:
            if domain_size(h1.input_spec) > MAX_DOMAIN_POINTS:
                raise CapacityError(
                    f"domain of {h1.input_spec} exceeds {MAX_DOMAIN_POINTS} points"
                )
            domain_enumerator = enumerate_domain(h1.input_spec)
        f1 = self._fns[h1.program_id]
        f2 = self._fns[h2.program_id]
        checked = 0
        for point in domain_enumerator:
            checked += 1
            if checked > MAX_DOMAIN_POINTS:
                raise CapacityError(f"enumerator exceeded {MAX_DOMAIN_POINTS} points")
            if f1(*point) != f2(*point):
                return EquivalenceResult(False, tuple(point), checked)
        return EquivalenceResult(True, None, checked)


_default_registry = ObfuscationRegistry()


def default_registry() -> ObfuscationRegistry:
    return _default_registry


def obfuscate(
    fn: Callable, input_spec: InputSpec, size_pad: str, rng: random.Random
) -> ObfHandle:
    """Register with the process-wide default registry."""
    return _default_registry.obfuscate(fn, input_spec, size_pad, rng)


def check_equivalence(
    h1: ObfHandle, h2: ObfHandle, domain_enumerator: Iterable[tuple] | None = None
) -> EquivalenceResult:
    if h1._registry is not h2._registry:
        raise DimensionMismatchError("handles belong to different registries")
    return h1._registry.check_equivalence(h1, h2, domain_enumerator)
