"""Command-line front end: run games and property suites, emit JSON lines.

Every run is fully determined by its flags plus the seed (flag, else the
QCPLAB_SEED environment variable, else 0): trial i uses the child RNG
seeded with "<seed>/<i>", so output bytes are reproducible regardless of
how trials are scheduled.  One JSON object per trial, then a summary
object tagged "type": "summary" carrying the rate and a 95% Wilson score
interval.

Exit codes: 0 success, 2 usage error, 3 capacity violation, 4 property
check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from typing import TextIO

from . import ace, games, pprf
from .errors import CapacityError, ParameterError, QcpLabError
from .obf import ObfuscationRegistry
from .quantum import random_density, random_projector
from .resample import (
    FiniteDistribution,
    UniformBitsDistribution,
    exact_tv_distance,
    infinite_resample_law,
    load_distribution,
    truncated_law,
    truncated_limit,
)
from .threshold import ProjectiveFamily, ati_accept_prob, ti_accept_prob

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CAPACITY = 3
EXIT_PROPERTY = 4

Z_95 = 1.96


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval: center (p + z^2/2n) / (1 + z^2/n), half-width
    z * sqrt(p(1-p)/n + z^2/4n^2) / (1 + z^2/n)."""
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    z2 = Z_95 * Z_95
    denom = 1 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = Z_95 * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return center - half, center + half


def child_rng(seed: int, trial: int) -> random.Random:
    return random.Random(f"{seed}/{trial}")


class _Emitter:
    def __init__(self, stream: TextIO) -> None:
        self.stream = stream

    def emit(self, obj: dict) -> None:
        self.stream.write(json.dumps(obj, sort_keys=True) + "\n")


def _summary(emitter: _Emitter, successes: int, trials: int, params: dict) -> float:
    rate = successes / trials if trials else 0.0
    lo, hi = wilson_interval(successes, trials)
    emitter.emit(
        {"type": "summary", "rate": rate, "ci_low": lo, "ci_high": hi, "params": params}
    )
    return rate


def _cmd_moe(args, emitter: _Emitter) -> int:
    adversary = games.BUILTIN_MOE_ADVERSARIES[args.adversary]()
    wins = 0
    for i in range(args.trials):
        rng = child_rng(args.seed, i)
        win1, win2, inst = games.run_moe_trial(args.d, adversary, rng)
        outcome = int(win1 and win2)
        wins += outcome
        emitter.emit(
            {
                "type": "trial",
                "game": "moe",
                "trial": i,
                "outcome": outcome,
                "side_outcomes": [int(win1), int(win2)],
                "revealed_subspace": inst.a_space.to_hex(),
            }
        )
    params = {
        "d": args.d,
        "adversary": args.adversary,
        "trials": args.trials,
        "seed": args.seed,
        "analytic_rate": games.analytic_moe_rate(args.adversary, args.d),
    }
    _summary(emitter, wins, args.trials, params)
    return EXIT_OK


def _cmd_cp_game(args, emitter: _Emitter) -> int:
    scheme = games.example_prf_scheme(args.n_in, args.n_out)
    pirate = games.make_pirate(args.pirate, args.n_out)
    registry = ObfuscationRegistry()
    joint = 0
    for i in range(args.trials):
        rng = child_rng(args.seed, i)
        report = games.run_copy_protection_game(
            scheme, pirate, 1, rng, d=args.d, registry=registry
        )
        outcome = int(report.joint_rate)
        joint += outcome
        emitter.emit(
            {
                "type": "trial",
                "game": "cp-game",
                "trial": i,
                "outcome": outcome,
                "side_outcomes": [int(report.side1_rate), int(report.side2_rate)],
            }
        )
    params = {
        "d": args.d,
        "pirate": args.pirate,
        "n_in": args.n_in,
        "n_out": args.n_out,
        "trials": args.trials,
        "seed": args.seed,
        "p_triv": scheme.p_triv,
    }
    _summary(emitter, joint, args.trials, params)
    return EXIT_OK


def _cmd_strong_ap(args, emitter: _Emitter) -> int:
    scheme = games.example_prf_scheme(args.n_in, args.n_out)
    pirate = games.make_pirate(args.pirate, args.n_out)
    registry = ObfuscationRegistry()
    joint = 0
    degenerate = False
    for i in range(args.trials):
        rng = child_rng(args.seed, i)
        report = games.run_strong_antipiracy_game(
            scheme, pirate, args.gamma, 1, rng, d=args.d, registry=registry
        )
        outcome = int(report.joint_rate)
        joint += outcome
        degenerate = report.degenerate_threshold
        emitter.emit(
            {
                "type": "trial",
                "game": "strong-ap",
                "trial": i,
                "outcome": outcome,
                "side_outcomes": [int(report.side1_rate), int(report.side2_rate)],
            }
        )
    params = {
        "d": args.d,
        "gamma": args.gamma,
        "pirate": args.pirate,
        "n_in": args.n_in,
        "n_out": args.n_out,
        "trials": args.trials,
        "seed": args.seed,
        "threshold": scheme.p_triv + args.gamma,
        "degenerate_threshold": degenerate,
    }
    _summary(emitter, joint, args.trials, params)
    return EXIT_OK


def _parse_distribution(spec: str):
    kind, _, value = spec.partition(":")
    if kind == "uniform":
        return UniformBitsDistribution(int(value)), int(value)
    if kind == "file":
        with open(value) as fh:
            dist = load_distribution(fh)
        width = max(int(v).bit_length() for v in dist.support) or 1
        return dist, width
    raise ParameterError(f"unknown distribution spec {spec!r} (use uniform:K or file:PATH)")


def _cmd_ace_demo(args, emitter: _Emitter) -> int:
    dist, sample_bits = _parse_distribution(args.dist)
    message = int(args.msg, 16)
    registry = ObfuscationRegistry()
    setup_rng = child_rng(args.seed, -1)
    sk = ace.ace_setup(args.n, setup_rng)
    ek = ace.gen_ek(sk, ace.false_predicate(), setup_rng, registry)
    dk = ace.gen_dk(sk, ace.false_predicate(), setup_rng, registry)
    ok = 0
    for i in range(args.trials):
        rng = child_rng(args.seed, i)
        sample = ace.steg_enc(ek, message, dist, args.epsilon, rng, sample_bits=sample_bits)
        if isinstance(sample, ace.Bottom):
            emitter.emit(
                {"type": "trial", "game": "ace-demo", "trial": i, "outcome": 0,
                 "bottom": sample.value}
            )
            continue
        recovered = ace.steg_dec(dk, sample, sample_bits)
        success = int(recovered == message)
        ok += success
        emitter.emit(
            {
                "type": "trial",
                "game": "ace-demo",
                "trial": i,
                "outcome": success,
                "sample_hex": f"{sample:x}",
                "recovered_hex": None if recovered is None else f"{recovered:x}",
            }
        )
    params = {
        "n": args.n,
        "dist": args.dist,
        "epsilon": args.epsilon,
        "msg": args.msg,
        "trials": args.trials,
        "seed": args.seed,
    }
    _summary(emitter, ok, args.trials, params)
    return EXIT_OK


def _cmd_resample_check(args, emitter: _Emitter) -> int:
    failures = 0
    worst_inf = 0.0
    worst_trunc = 0.0
    for i in range(args.instances):
        rng = child_rng(args.seed, i)
        size = rng.randrange(2, args.support + 1)
        dist = FiniteDistribution.from_weights(
            [(v, rng.random() + 1e-3) for v in range(size)]
        )
        table = {v: rng.randrange(1, size + 1) for v in dist.support}
        f = table.__getitem__
        tv_inf = exact_tv_distance(dist, infinite_resample_law(dist, f))
        t_limit = truncated_limit(args.epsilon, size)
        law = truncated_law(dist, f, t_limit)
        tv_trunc = exact_tv_distance(dist, law)
        bottom = law.prob(None)
        ok = tv_inf < 1e-12 and tv_trunc <= args.epsilon and bottom <= args.epsilon
        failures += not ok
        worst_inf = max(worst_inf, tv_inf)
        worst_trunc = max(worst_trunc, tv_trunc)
        emitter.emit(
            {
                "type": "trial",
                "game": "resample-check",
                "trial": i,
                "outcome": int(ok),
                "tv_infinite": tv_inf,
                "tv_truncated": tv_trunc,
                "bottom_rate": bottom,
                "t_limit": t_limit,
            }
        )
    params = {
        "support": args.support,
        "epsilon": args.epsilon,
        "instances": args.instances,
        "seed": args.seed,
        "worst_tv_infinite": worst_inf,
        "worst_tv_truncated": worst_trunc,
    }
    _summary(emitter, args.instances - failures, args.instances, params)
    return EXIT_OK if failures == 0 else EXIT_PROPERTY


def _cmd_ti_check(args, emitter: _Emitter) -> int:
    if args.dim > 16:
        raise CapacityError("ti-check caps the Hilbert dimension at 16 (threshold-measurements)")
    eps, delta = 0.1, 0.05
    failures = 0
    for i in range(args.instances):
        rng = child_rng(args.seed, i)
        effects = {
            j: random_projector(args.dim, rng.randrange(1, args.dim), rng)
            for j in range(4)
        }
        fam = ProjectiveFamily.from_projectors(effects)
        rho = random_density(args.dim, rng)
        eta = 0.2 + 0.6 * rng.random()
        ok = (
            ati_accept_prob(fam, eta - eps, eps, delta, rho)
            >= ti_accept_prob(fam, eta, rho) - delta - 1e-7
            and ti_accept_prob(fam, eta - eps, rho)
            >= ati_accept_prob(fam, eta, eps, delta, rho) - delta - 1e-7
        )
        failures += not ok
        emitter.emit(
            {"type": "trial", "game": "ti-check", "trial": i, "outcome": int(ok), "eta": eta}
        )
    params = {"dim": args.dim, "instances": args.instances, "seed": args.seed}
    _summary(emitter, args.instances - failures, args.instances, params)
    return EXIT_OK if failures == 0 else EXIT_PROPERTY


def _cmd_prf_check(args, emitter: _Emitter) -> int:
    if args.input_bits > 12:
        raise CapacityError("prf-check caps input_bits at 12 (puncturable-prf exhaustive sweep)")
    failures = 0
    for i in range(args.sets):
        rng = child_rng(args.seed, i)
        key = pprf.setup(128, args.input_bits, args.output_bits, rng)
        size = rng.randrange(1, args.max_set_size + 1)
        punctured = {rng.getrandbits(args.input_bits) for _ in range(size)}
        pk = pprf.puncture(key, punctured)
        table = pprf.full_table(key)
        ok = True
        for x in range(1 << args.input_bits):
            got = pprf.punctured_eval(pk, x)
            expected = None if x in punctured else table[x]
            if got != expected:
                ok = False
                break
        failures += not ok
        emitter.emit(
            {
                "type": "trial",
                "game": "prf-check",
                "trial": i,
                "outcome": int(ok),
                "set_size": len(punctured),
            }
        )
    params = {
        "input_bits": args.input_bits,
        "output_bits": args.output_bits,
        "sets": args.sets,
        "seed": args.seed,
    }
    _summary(emitter, args.sets - failures, args.sets, params)
    return EXIT_OK if failures == 0 else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcplab", description=__doc__)
    default_seed = int(os.environ.get("QCPLAB_SEED", "0"))
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=default_seed)
        p.add_argument("--output", type=str, default=None)

    p = sub.add_parser("moe", help="coset monogamy game")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--adversary", choices=sorted(games.BUILTIN_MOE_ADVERSARIES), default="split-basis")
    p.add_argument("--trials", type=int, default=1024)
    common(p)
    p.set_defaults(fn=_cmd_moe)

    p = sub.add_parser("cp-game", help="two-pirate copy-protection game")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--pirate", choices=["forwarding", "basis-cloner"], default="forwarding")
    p.add_argument("--n-in", type=int, default=6)
    p.add_argument("--n-out", type=int, default=8)
    p.add_argument("--trials", type=int, default=256)
    common(p)
    p.set_defaults(fn=_cmd_cp_game)

    p = sub.add_parser("strong-ap", help="threshold-measurement anti-piracy game")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--pirate", choices=["forwarding", "basis-cloner"], default="forwarding")
    p.add_argument("--n-in", type=int, default=6)
    p.add_argument("--n-out", type=int, default=8)
    p.add_argument("--trials", type=int, default=64)
    common(p)
    p.set_defaults(fn=_cmd_strong_ap)

    p = sub.add_parser("ace-demo", help="steganographic encapsulation roundtrip")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--dist", type=str, default="uniform:48")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--msg", type=str, default="a7")
    p.add_argument("--trials", type=int, default=1)
    common(p)
    p.set_defaults(fn=_cmd_ace_demo)

    p = sub.add_parser("resample-check", help="reverse-resampling exactness and truncation bound")
    p.add_argument("--support", type=int, default=64)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--instances", type=int, default=50)
    common(p)
    p.set_defaults(fn=_cmd_resample_check)

    p = sub.add_parser("ti-check", help="threshold-implementation inequality spot check")
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--instances", type=int, default=25)
    common(p)
    p.set_defaults(fn=_cmd_ti_check)

    p = sub.add_parser("prf-check", help="exhaustive punctured-correctness sweep")
    p.add_argument("--input-bits", type=int, default=10)
    p.add_argument("--output-bits", type=int, default=16)
    p.add_argument("--sets", type=int, default=10)
    p.add_argument("--max-set-size", type=int, default=8)
    common(p)
    p.set_defaults(fn=_cmd_prf_check)

    return parser


def run(argv: list[str] | None = None, stream: TextIO | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    out = stream or sys.stdout
    close_after = False
    if args.output:
        out = open(args.output, "w")
        close_after = True
    try:
        return args.fn(args, _Emitter(out))
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ParameterError, QcpLabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if close_after:
            out.close()


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
