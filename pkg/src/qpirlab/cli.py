"""Command-line front end: run protocols, analyze them, verify the bounds.

Reports are machine-first: results go to stdout as JSON or CSV, the
human-readable summary goes to stderr.  Every subcommand requires a seed;
nothing reads the wall clock, so equal invocations are byte-identical.
Exit codes: 0 ok, 1 bound violation, 2 invalid config, 3 protocol abort.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import aqpir, chsh, heqpir, metrics, multiserver, runtime
from .errors import ConfigError, InsufficientRoundsError, QpirError

PROTOCOLS = ("aqpir", "heqpir", "two_server", "cube", "baseline", "cleartext")
ADVERSARIES = {
    "honest": runtime.honest,
    "intercept_resend": runtime.intercept_resend,
    "phase_tamper": runtime.phase_tamper,
}
FLAG_ADVERSARIES = ("z_tamper", "x_tamper", "substitute_t", "mixed_ancilla",
                    "skip_uncompute", "flip_answer", "flip_answer_bit")


def _emit(data, out_path: str | None):
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _adversary(name: str) -> runtime.AdversaryModel:
    if name in ADVERSARIES:
        return ADVERSARIES[name]()
    if name in FLAG_ADVERSARIES:
        return runtime.AdversaryModel(name, {name: True})
    raise ConfigError(f"unknown adversary {name!r}")


def _seeded_database(n: int, seed: int, width: int = 1) -> list[int]:
    rng = np.random.default_rng([999, seed])
    return [int(v) for v in rng.integers(0, 2**width, n)]


def _build_protocol(args):
    if args.protocol == "baseline":
        return runtime.BaselineSendAll()
    if args.protocol == "cleartext":
        return runtime.CleartextIndex()
    if args.protocol == "two_server":
        return multiserver.TwoServerProtocol(block_bits=args.m or 1,
                                             variant=args.variant)
    if args.protocol == "cube":
        if args.d is None or args.ell is None:
            raise ConfigError("cube needs --d and --ell")
        return multiserver.CubeProtocol(args.ell, args.d)
    if args.protocol == "heqpir":
        if args.n is None:
            raise ConfigError("heqpir needs --n")
        return heqpir.HeqpirProtocol(args.n, classical_mode=args.n > 64)
    if args.protocol == "aqpir":
        ell = args.ell or (math.isqrt(args.n) if args.n else None)
        r = args.r or ell
        if ell is None:
            raise ConfigError("aqpir needs --ell (or --n for square packing)")
        return aqpir.AqpirProtocol(aqpir.AqpirParams(
            ell=ell, r=r, epsilon_bell=args.epsilon, delta=args.delta,
            stage4_rounds=args.stage4_rounds))
    raise ConfigError(f"unknown protocol {args.protocol!r}")


def _parse_index(args):
    if args.index is None:
        raise ConfigError("--index is required for run")
    if args.protocol == "cube":
        return tuple(int(p) for p in str(args.index).split(","))
    return int(args.index)


def _database_for(args):
    if args.protocol == "cube":
        n = args.ell**args.d
        bits = _seeded_database(n, args.seed)
        return multiserver.CubeDatabase(args.ell, args.d, bits)
    if args.protocol == "heqpir":
        return _seeded_database(args.n, args.seed)
    if args.protocol == "aqpir":
        ell = args.ell or math.isqrt(args.n)
        r = args.r or ell
        return _seeded_database(ell, args.seed, width=r)
    n = args.n or (args.ell if args.ell else None)
    if n is None:
        raise ConfigError("need --n (database size)")
    return _seeded_database(n, args.seed)


def cmd_run(args) -> int:
    if args.database is not None:
        bits = [int(ch) for ch in args.database]
        database = (multiserver.CubeDatabase(args.ell, args.d, bits)
                    if args.protocol == "cube" else bits)
    else:
        database = _database_for(args)
    protocol = _build_protocol(args)
    index = _parse_index(args)
    adversary = _adversary(args.adversary)
    result = runtime.run_protocol(protocol, database, index, adversary, args.seed)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(result.transcript.to_jsonl())
    summary = result.transcript.outcome
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    print(
        f"{args.protocol}: result={summary['result']} qubits={summary['qubit_cost']}"
        f" bits={summary['classical_cost']} aborted_at={summary['aborted_at']}",
        file=sys.stderr,
    )
    return 3 if result.aborted else 0


def cmd_analyze(args) -> int:
    report: dict = {"protocol": args.protocol, "seed": args.seed}
    if args.protocol == "cube":
        if args.d is None or args.ell is None:
            raise ConfigError("cube analyze needs --d and --ell")
        if args.d > 2 or args.ell > 3:
            raise ConfigError("analyze enumerates exhaustively; need d <= 2, ell <= 3")
        report["privacy"] = _cube_privacy(args.ell, args.d)
        report["correctness"] = _cube_correctness(args.ell, args.d, args.seed)
        if args.d >= 2:
            coalition = ["0" * args.d, "1" + "0" * (args.d - 1)]
            col = runtime.collusion_report(args.ell, args.d, coalition,
                                           trials=2000, rng=args.seed)
            report["collusion"] = col.__dict__
    elif args.protocol == "heqpir":
        if args.n is None or args.n > 64:
            raise ConfigError("heqpir analyze needs --n at most 64")
        report["privacy"] = _heqpir_privacy(args.n)
        report["correctness"] = _heqpir_correctness(args.n, args.seed)
    elif args.protocol == "two_server":
        if args.n is None or args.n > 4:
            raise ConfigError("two_server analyze needs --n at most 4")
        report["privacy"] = _two_server_privacy(args.n)
        report["correctness"] = _two_server_correctness(args.n)
    elif args.protocol == "cleartext":
        report["privacy"] = _cleartext_privacy(args.n or 4)
    else:
        raise ConfigError(f"analyze does not support {args.protocol!r}")
    _emit(report, args.out)
    ok = all(v.get("passed", True) for v in report.values() if isinstance(v, dict))
    print(f"analyze {args.protocol}: {'pass' if ok else 'FAIL'}", file=sys.stderr)
    return 0


def _cube_privacy(ell: int, d: int) -> dict:
    worst = 0.0
    index_space = [tuple(t) for t in np.ndindex(*([ell] * d))]
    sigma = "0" * d
    base = None
    for index in index_space:
        views = multiserver.enumerate_cube_views(ell, d, index, sigma)
        dist = {}
        for v in views:
            dist[v] = dist.get(v, 0) + 1
        if base is None:
            base = dist
        else:
            keys = set(base) | set(dist)
            tv = sum(abs(base.get(k, 0) - dist.get(k, 0)) for k in keys) / (2 * len(views))
            worst = max(worst, tv)
    return {"max_trace_distance": worst, "passed": worst <= 1e-12}


def _cube_correctness(ell: int, d: int, seed: int) -> dict:
    protocol = multiserver.CubeProtocol(ell, d)
    rng = np.random.default_rng(seed)
    worst = 1.0
    cases = 0
    for trial in range(20):
        bits = [int(b) for b in rng.integers(0, 2, ell**d)]
        db = multiserver.CubeDatabase(ell, d, bits)
        for index in [tuple(t) for t in np.ndindex(*([ell] * d))]:
            result = runtime.run_protocol(protocol, db, index, runtime.honest(),
                                          int(rng.integers(0, 2**32)))
            worst = min(worst, float(result.value == db.entry(index)))
            cases += 1
    return {"min_success": worst, "passed": worst >= 1.0, "cases": cases}


def _heqpir_privacy(n: int) -> dict:
    trials = heqpir.heqpir_randomness_space(n)
    rep = runtime.privacy_report(
        lambda k, t: heqpir.heqpir_query_view(n, k, t),
        indices=list(range(n)), epsilon=0.0, trials=trials,
    )
    return {"max_trace_distance": rep.max_distance, "passed": rep.max_distance <= 1e-9}


def _heqpir_correctness(n: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst = 1.0
    cases = 0
    for trial in range(10):
        db = [int(b) for b in rng.integers(0, 2, n)]
        for k in range(n):
            res = heqpir.run_heqpir(n, db, k, rng=int(rng.integers(0, 2**32)))
            worst = min(worst, float(res.value == db[k]))
            cases += 1
    return {"min_success": worst, "passed": worst >= 1.0, "cases": cases}


def _two_server_privacy(n: int) -> dict:
    worst = 0.0
    for server in (1, 2):
        base = None
        for i in range(n):
            views = multiserver.enumerate_two_server_views(n, i, server)
            dist = {}
            for v in views:
                dist[v] = dist.get(v, 0) + 1
            if base is None:
                base = dist
            else:
                keys = set(base) | set(dist)
                tv = sum(abs(base.get(k, 0) - dist.get(k, 0)) for k in keys) / (2 * len(views))
                worst = max(worst, tv)
    return {"max_trace_distance": worst, "passed": worst <= 1e-12}


def _two_server_correctness(n: int) -> dict:
    worst = 1.0
    cases = 0
    for value in range(2**n):
        db = [(value >> p) & 1 for p in range(n)]
        for i in range(n):
            worst = min(worst, multiserver.two_server_success_probability(db, i, seed=cases))
            cases += 1
    return {"min_success": worst, "passed": worst >= 1.0, "cases": cases}


def _cleartext_privacy(n: int) -> dict:
    # the server sees the index itself: distributions are disjoint
    views = {i: {i: 1.0} for i in range(n)}
    worst = 1.0 if n > 1 else 0.0
    return {"max_trace_distance": worst, "passed": worst <= 1e-12}


def cmd_verify_bounds(args) -> int:
    rng = np.random.default_rng(args.seed)
    report = {"samples": args.samples, "dims": args.dims, "violations": 0}
    violations = 0
    for _ in range(args.samples):
        dim = int(rng.integers(2, args.dims + 1))
        d1 = metrics.random_distribution(dim, rng)
        d2 = metrics.random_distribution(dim, rng)
        if not metrics.pinsker_check(d1, d2)[2]:
            violations += 1
        r = metrics.random_density_matrix(dim, rng)
        s = metrics.random_density_matrix(dim, rng)
        if not metrics.quantum_pinsker_check(r, s)[2]:
            violations += 1
        rel = metrics.quantum_relative_entropy(r, s)
        psi = metrics_purify(r)
        phi = metrics_purify(s)
        _, overlap_sq = metrics.uhlmann_unitary(psi, phi)
        fid = metrics.fidelity(r, s)
        if abs(overlap_sq - fid**2) > 1e-6:
            violations += 1
        if rel <= 0.5 and overlap_sq < 1.0 - math.sqrt(math.log(2.0) * rel / 2.0) - 1e-6:
            violations += 1
    # degenerate support: the +inf sentinel must clamp, not crash
    singular = np.diag([1.0, 0.0]).astype(complex)
    mixed = np.eye(2, dtype=complex) / 2.0
    if metrics.quantum_relative_entropy(mixed, singular) != float("inf"):
        violations += 1
    for n in (2, 4, 8):
        bound = runtime.baseline_bound_check(n, seed=args.seed)
        if not bound.satisfied or abs(bound.bound_value - n) > 1e-9:
            violations += 1
    report["violations"] = violations
    report["passed"] = violations == 0
    _emit(report, args.out)
    print(f"verify-bounds: {violations} violation(s)", file=sys.stderr)
    return 0 if violations == 0 else 1


def metrics_purify(mat: np.ndarray) -> np.ndarray:
    """Canonical purification vec(sqrt(rho)) used by the bound sweeps."""
    vals, vecs = np.linalg.eigh(mat)
    vals = np.clip(vals, 0.0, None)
    root = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return root.reshape(-1)


def _bench_rows(protocol: str, sizes: list[int], seed: int) -> list[tuple]:
    rows = []
    for n in sizes:
        if protocol == "baseline":
            db = _seeded_database(n, seed)
            res = runtime.run_protocol(runtime.BaselineSendAll(), db, 0,
                                       runtime.honest(), seed)
            q, b = res.transcript.qubit_cost, res.transcript.classical_cost
        elif protocol == "heqpir":
            db = _seeded_database(n, seed)
            res = heqpir.run_heqpir(n, db, 0, rng=seed, classical_mode=n > 64)
            q, b = res.transcript.qubit_cost, res.transcript.classical_cost
        elif protocol == "two_server":
            db = _seeded_database(n, seed)
            res = runtime.run_protocol(multiserver.TwoServerProtocol(), db, 0,
                                       runtime.honest(), seed)
            q, b = res.transcript.qubit_cost, res.transcript.classical_cost
        elif protocol == "cube":
            up, down = multiserver.cube_cost(n, 1)
            q, b = 0, up + down
        elif protocol == "aqpir":
            side = math.isqrt(n)
            if side * side != n:
                raise ConfigError("aqpir bench sizes must be perfect squares")
            params = aqpir.AqpirParams(ell=side, r=side, stage4_rounds=16,
                                       qubit_cap=10**6)
            q, b = aqpir.aqpir_wire_cost(params, seed)
        else:
            raise ConfigError(f"unknown bench protocol {protocol!r}")
        rows.append((protocol, n, q, b, seed))
    return rows


def power_law_exponent(ns: list[int], costs: list[int]) -> float:
    xs = np.log(np.asarray(ns, dtype=float))
    ys = np.log(np.asarray(costs, dtype=float))
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def cmd_bench(args) -> int:
    protocols = [p.strip() for p in args.protocols.split(",") if p.strip()]
    sizes = [int(s) for s in args.sizes.split(",")]
    lines = ["protocol,n,qubit_cost,bit_cost,seed"]
    fits = {}
    for protocol in protocols:
        rows = _bench_rows(protocol, sizes, args.seed)
        for row in rows:
            lines.append(",".join(str(v) for v in row))
        costs = [q if q > 0 else b for _, _, q, b, _ in rows]
        if len(sizes) >= 2 and all(c > 0 for c in costs):
            fits[protocol] = power_law_exponent(sizes, costs)
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for protocol, slope in fits.items():
        print(f"fit {protocol}: cost ~ n^{slope:.3f}", file=sys.stderr)
    return 0


def cmd_chsh(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.strategy == "quantum":
        stats = chsh.play_quantum(args.rounds, rng)
    elif args.strategy == "classical":
        stats = chsh.play_classical(args.rounds, rng)
    else:
        raise ConfigError(f"unknown strategy {args.strategy!r}")
    out = {
        "strategy": stats.strategy,
        "rounds": stats.rounds,
        "wins": stats.wins,
        "win_rate": stats.win_rate,
    }
    try:
        decision = chsh.threshold_test(stats)
        out["threshold_verdict"] = {
            "accept": decision.accept,
            "threshold": decision.threshold,
            "min_rounds": decision.min_rounds,
        }
    except InsufficientRoundsError as exc:
        out["threshold_verdict"] = {"error": str(exc)}
    _emit(out, args.out)
    print(f"chsh {stats.strategy}: win_rate={stats.win_rate:.4f}", file=sys.stderr)
    return 0


def _load_config(path: str | None, section: str) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    merged = {k: v for k, v in data.items() if not isinstance(v, dict)}
    merged.update(data.get(section, {}))
    return merged


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpirlab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="TOML config file")
        p.add_argument("--seed", type=int, default=None, help="rng seed (required)")
        p.add_argument("--out", default=None, help="output file path")

    p_run = sub.add_parser("run", help="execute one protocol run")
    common(p_run)
    p_run.add_argument("--protocol", choices=PROTOCOLS, default=None)
    p_run.add_argument("--n", type=int, default=None)
    p_run.add_argument("--ell", type=int, default=None)
    p_run.add_argument("--d", type=int, default=None)
    p_run.add_argument("--m", type=int, default=None)
    p_run.add_argument("--r", type=int, default=None)
    p_run.add_argument("--index", default=None,
                       help="0-based target index; comma components for cube")
    p_run.add_argument("--variant", default="per_bit_z",
                       choices=("per_bit_z", "qft_modN"))
    p_run.add_argument("--adversary", default="honest")
    p_run.add_argument("--epsilon", type=float, default=0.05)
    p_run.add_argument("--delta", type=float, default=0.05)
    p_run.add_argument("--stage4-rounds", dest="stage4_rounds", type=int, default=16)
    p_run.add_argument("--database", default=None, help="explicit bitstring")

    p_an = sub.add_parser("analyze", help="privacy/correctness/collusion reports")
    common(p_an)
    p_an.add_argument("--protocol", choices=PROTOCOLS, default=None)
    p_an.add_argument("--n", type=int, default=None)
    p_an.add_argument("--ell", type=int, default=None)
    p_an.add_argument("--d", type=int, default=None)

    p_vb = sub.add_parser("verify-bounds", help="property sweeps for the bounds")
    common(p_vb)
    p_vb.add_argument("--samples", type=int, default=1000)
    p_vb.add_argument("--dims", type=int, default=4)

    p_bench = sub.add_parser("bench", help="communication cost table")
    common(p_bench)
    p_bench.add_argument("--protocols", default="heqpir,cube,baseline")
    p_bench.add_argument("--sizes", default="4,16,64")

    p_chsh = sub.add_parser("chsh", help="CHSH game statistics")
    common(p_chsh)
    p_chsh.add_argument("--rounds", type=int, default=None)
    p_chsh.add_argument("--strategy", default="quantum")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config, args.command.replace("-", "_"))
        for key, value in config.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and getattr(args, attr) is None:
                setattr(args, attr, value)
        if args.seed is None:
            raise ConfigError("--seed is required (reproducibility contract)")
        if args.command == "run":
            if args.protocol is None:
                raise ConfigError("--protocol is required")
            return cmd_run(args)
        if args.command == "analyze":
            if args.protocol is None:
                raise ConfigError("--protocol is required")
            return cmd_analyze(args)
        if args.command == "verify-bounds":
            return cmd_verify_bounds(args)
        if args.command == "bench":
            return cmd_bench(args)
        if args.command == "chsh":
            if args.rounds is None or args.rounds < 1:
                raise ConfigError("--rounds must be a positive integer")
            return cmd_chsh(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QpirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
