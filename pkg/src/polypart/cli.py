"""Batch front-end: instances in, reproducible reports and verify suites out.

Instance files are JSON with top-level n, varieties[], points[], labels[].
Partition commands write report.json, counts.csv, and trace.csv into --out;
verify commands print one PASS/FAIL line per property and exit nonzero on
any failure. All randomness flows from the single --seed through named
substreams, and outputs are byte-identical for identical inputs and flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import equivariant as eq
from .cells import CellCounts, SamplingConfig, cells_entered_line, index_w
from .mollifier import schedule
from .polyalg import MonomialBasis, Polynomial, degree_schedule, grad_bound
from .solver import PartitionReport, SolveConfig, partition_points, partition_varieties
from .spectrum import is_equidistributed, lemma_identity_check, wht_table
from .varieties import VarietySpec, build, line


class InstanceError(ValueError):
    """Instance file problem, carrying a field-level diagnostic."""


@dataclass
class Instance:
    n: int
    varieties: list[VarietySpec]
    points: np.ndarray | None
    labels: list[str] | None


def load_instance(path: str) -> Instance:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InstanceError(f"instance file not found: {path}")
    except json.JSONDecodeError as err:
        raise InstanceError(f"invalid JSON at line {err.lineno}, column {err.colno}: {err.msg}")
    if not isinstance(raw, dict):
        raise InstanceError("top level must be a JSON object")
    if "n" not in raw:
        raise InstanceError("missing field 'n'")
    n = raw["n"]
    if not isinstance(n, int) or n < 1:
        raise InstanceError(f"field 'n' must be a positive integer, got {n!r}")
    varieties = []
    for i, entry in enumerate(raw.get("varieties", [])):
        where = f"varieties[{i}]"
        if not isinstance(entry, dict) or "kind" not in entry:
            raise InstanceError(f"{where}: each variety needs a 'kind'")
        kind = entry["kind"]
        params = {k: v for k, v in entry.items() if k != "kind"}
        if kind == "implicit":
            params.setdefault("n", n)
        try:
            spec = build(kind, params)
        except KeyError as err:
            raise InstanceError(f"{where}.{err.args[0]}: required parameter missing")
        except ValueError as err:
            raise InstanceError(f"{where}: {err}")
        if spec.n != n:
            raise InstanceError(f"{where}: ambient dimension {spec.n} does not match n = {n}")
        varieties.append(spec)
    points = None
    if raw.get("points"):
        try:
            points = np.asarray(raw["points"], dtype=np.float64)
        except (TypeError, ValueError):
            raise InstanceError("field 'points' must be an array of coordinate rows")
        if points.ndim != 2 or points.shape[1] != n:
            raise InstanceError(
                f"field 'points' must have shape (N, {n}), got {points.shape}"
            )
    return Instance(n=n, varieties=varieties, points=points, labels=raw.get("labels"))


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _bits(idx: int, s: int) -> str:
    return "".join(str(b) for b in index_w(idx, s))


def write_report(out_dir: str, rep: PartitionReport, command: str, extra: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s = rep.counts.s
    payload = {
        "command": command,
        "max_count": rep.max_count,
        "bound_ratio": rep.bound_ratio,
        "objective": rep.objective,
        "counts": {_bits(i, s): int(rep.counts.table[i]) for i in range(2**s)},
        "spectrum": {_bits(i, s): rep.spectrum.values[i].item() for i in range(2**s)},
        "pvec": [
            {"degree": p.basis.D, "coeffs": p.coeffs.tolist()} for p in rep.pvec
        ],
        "meta": _json_ready(rep.meta),
    }
    payload.update(_json_ready(extra))
    (out / "report.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    with (out / "counts.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["w_bits", "count"])
        for i in range(2**s):
            w.writerow([_bits(i, s), int(rep.counts.table[i])])
    with (out / "trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        if rep.trace and isinstance(rep.trace[0], dict):
            w.writerow(["step", "part", "size", "imbalance"])
            for row in rep.trace:
                w.writerow([row["step"], row["part"], row["size"], row["imbalance"]])
        else:
            w.writerow(["iteration", "objective"])
            for it, obj in rep.trace:
                w.writerow([it, obj])


def load_pvec(report_path: str) -> tuple[list[Polynomial], dict]:
    """Rebuild the polynomial tuple from a serialized report."""
    payload = json.loads(Path(report_path).read_text())
    n = payload["meta"]["n"]
    pvec = []
    for entry in payload["pvec"]:
        basis = MonomialBasis(n, entry["degree"])
        pvec.append(Polynomial(basis, np.array(entry["coeffs"])))
    return pvec, payload


# ---------------------------------------------------------------------------
# verify suites


def _suite_result(checks) -> int:
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return 0 if ok else 1


def verify_borsuk(s: int):
    checks = []
    zeros = eq.g_zeros(s)
    checks.append(
        ("zero-count", len(zeros) == 2**s, f"{len(zeros)} model zeros, expected {2**s}")
    )
    res = max(float(np.abs(eq.model_g(z)).max()) for z in zeros)
    checks.append(("zero-residual", res == 0.0, f"max residual {res}"))
    diag_ok, fd_ok = True, True
    fd_worst = 0.0
    h = 1e-6
    for z in zeros:
        J = eq.jacobian_g(z)
        d = np.diag(J)
        diag_ok &= bool(np.all(np.isin(d, (-1.0, 1.0)))) and np.all(J == np.diag(d))
        for col, v in enumerate(range(1, 2**s)):
            j, slot = eq.slot_of_v(v)
            bp = [b.copy() for b in z.blocks]
            bm = [b.copy() for b in z.blocks]
            bp[j - 1][slot] += h
            bm[j - 1][slot] -= h
            xp = eq.XsPoint.__new__(eq.XsPoint)
            xp.blocks = tuple(bp)
            xm = eq.XsPoint.__new__(eq.XsPoint)
            xm.blocks = tuple(bm)
            fd = (eq.model_g(xp) - eq.model_g(xm)) / (2 * h)
            fd_worst = max(fd_worst, float(np.abs(J[:, col] - fd).max()))
    fd_ok = fd_worst < 1e-6
    checks.append(("jacobian-diagonal", diag_ok, "entries in {-1, +1}"))
    checks.append(("jacobian-fd", fd_ok, f"max deviation {fd_worst:.3e}"))
    viol = eq.check_equivariance(eq.model_map(s), trials=100, seed=0)
    checks.append(("equivariance", viol < 1e-14, f"max violation {viol:.3e}"))
    return checks


def verify_spectrum(s: int):
    rng = np.random.default_rng(0)
    checks = []
    ok = True
    for _ in range(50):
        table = rng.integers(0, 1000, size=2**s).astype(np.int64)
        ok &= bool(np.array_equal(wht_table(wht_table(table)), (2**s) * table))
    checks.append(("wht-involution", ok, f"50 random tables at s = {s}"))
    ok = True
    for _ in range(200):
        table = rng.integers(0, 4, size=2**s)
        ok &= is_equidistributed(CellCounts(s, table)) == bool(np.all(table == table[0]))
    const = np.full(2**s, 7)
    ok &= is_equidistributed(CellCounts(s, const))
    checks.append(("equidistribution-iff-constant", ok, "200 random + constant tables"))
    ok = True
    for _ in range(100):
        table = rng.integers(0, 100, size=2**s)
        u = index_w(int(rng.integers(1, 2**s)), s)
        lhs, rhs = lemma_identity_check(CellCounts(s, table), u)
        ok &= lhs == rhs
    checks.append(("lemma-identity", ok, "lhs = rhs on 100 random tables"))
    return checks


def _random_line_poly_pair(rng, n, D):
    degs = []
    left = D
    while left > 0:
        d = int(rng.integers(1, min(3, left) + 1))
        degs.append(d)
        left -= d
    pvec = []
    for d in degs:
        basis = MonomialBasis(n, d)
        c = rng.normal(size=len(basis))
        pvec.append(Polynomial(basis, c / np.linalg.norm(c)))
    a = rng.normal(size=n)
    u = rng.normal(size=n)
    u /= np.linalg.norm(u)
    return line(a, u), pvec


def bench_line_cells(D: int, trials: int):
    rng = np.random.default_rng(1)
    violations = 0
    worst = 0
    for t in range(trials):
        n = 2 if t % 2 == 0 else 3
        g, pvec = _random_line_poly_pair(rng, n, D)
        ws = cells_entered_line(g, pvec)
        worst = max(worst, len(ws))
        if len(ws) > D + 1:
            violations += 1
    return [
        (
            "line-cell-bound",
            violations == 0,
            f"{trials} trials at product degree {D}: max cells {worst} <= {D + 1}, "
            f"{violations} violations",
        )
    ]


def verify_mollifier(delta_grid):
    checks = []
    bases = [MonomialBasis(2, D) for D in degree_schedule(2, 4)]
    cert_ok, mono_ok = True, True
    prev_eps, prev_R = math.inf, 0.0
    for delta in delta_grid:
        cfg = schedule(delta, bases)
        B = max(grad_bound(b, cfg.radius + 1.0) for b in bases)
        cert_ok &= B * delta < cfg.eps
        mono_ok &= cfg.eps < prev_eps and cfg.radius > prev_R
        prev_eps, prev_R = cfg.eps, cfg.radius
    checks.append(
        ("schedule-certificate", cert_ok, f"B*delta < eps on {len(list(delta_grid))} levels")
    )
    checks.append(("schedule-monotone", mono_ok, "eps decreasing, R increasing"))

    from .mollifier import i_delta
    from .polyalg import from_terms

    def unit_linear(cx, cy, c0):
        c = np.array([c0, cx, cy])
        return Polynomial(MonomialBasis(2, 1), c / np.linalg.norm(c))

    P = unit_linear(0.0, 1.0, 0.0)
    sep_ok = True
    for delta in [d for d in delta_grid if d <= 0.125]:
        g = line((0.0, -4.0 * delta), (1.0, 0.0))
        cfg = schedule(delta, [P.basis], mc_count=1024, seed=2)
        sep_ok &= i_delta(g, [P], (0,), cfg) == 0.0
    checks.append(("separated-cell-zero", sep_ok, "2-delta-separated tubes stay at 0"))

    Pw = unit_linear(0.0, 1.0, 2.0)
    g = line((0.0, 0.0), (1.0, 0.0))
    c = 2.0 / math.sqrt(5.0)
    wit_ok = True
    tested = 0
    for delta in delta_grid:
        cfg = schedule(delta, [Pw.basis], mc_count=4096, seed=3)
        B = grad_bound(Pw.basis, cfg.radius + 1.0)
        if delta <= c / (2.0 * B):
            tested += 1
            wit_ok &= i_delta(g, [Pw], (0,), cfg) == 1.0
    checks.append(
        ("witness-one", wit_ok and tested > 0, f"{tested} levels below the c/(2B) threshold")
    )
    return checks


# ---------------------------------------------------------------------------
# commands


def cmd_partition(args) -> int:
    inst = load_instance(args.input)
    if not inst.varieties:
        # empty families still produce a valid all-zero report
        table = CellCounts.zeros(args.s)
        from .spectrum import wht

        rep = PartitionReport(
            pvec=[],
            counts=table,
            spectrum=wht(table),
            max_count=0,
            bound_ratio=0.0,
            objective=0.0,
            trace=[],
            meta={"s": args.s, "n": inst.n, "num_varieties": 0, "seed": args.seed},
        )
        write_report(args.out, rep, "partition", {"input": args.input})
        return 0
    sampling = SamplingConfig(R=args.radius, seed=args.seed)
    cfg = SolveConfig(
        s=args.s,
        n=inst.n,
        restarts=args.restarts,
        iters=args.iters,
        seed=args.seed,
        objective=args.objective,
        sampling=sampling,
    )
    rep = partition_varieties(inst.varieties, cfg)
    write_report(args.out, rep, "partition", {"input": args.input})
    return 0


def cmd_partition_points(args) -> int:
    inst = load_instance(args.input)
    if inst.points is None:
        raise InstanceError("field 'points': required for partition-points")
    cfg = SolveConfig(
        s=args.s, n=inst.n, restarts=args.restarts, iters=args.iters, seed=args.seed
    )
    rep = partition_points(inst.points, args.s, cfg)
    write_report(args.out, rep, "partition-points", {"input": args.input})
    return 0


def _parse_grid(text: str):
    try:
        grid = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise InstanceError(f"--delta-grid must be comma-separated floats, got {text!r}")
    if not grid or any(not 0.0 < d < 1.0 for d in grid):
        raise InstanceError("--delta-grid entries must lie in (0, 1)")
    return grid


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="polypart", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a variety family")
    p.add_argument("--input", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--objective", choices=("discrete", "smooth"), default="discrete")
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--iters", type=int, default=600)
    p.add_argument("--radius", type=float, default=4.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("partition-points", help="partition a point set by bisection")
    p.add_argument("--input", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--iters", type=int, default=600)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition_points)

    p = sub.add_parser("verify-borsuk", help="model map zero and Jacobian checks")
    p.add_argument("--s", type=int, default=3)
    p.set_defaults(func=lambda a: _suite_result(verify_borsuk(a.s)))

    p = sub.add_parser("verify-spectrum", help="transform identity checks")
    p.add_argument("--s", type=int, default=8)
    p.set_defaults(func=lambda a: _suite_result(verify_spectrum(a.s)))

    p = sub.add_parser("bench-line-cells", help="line cell-entry bound check")
    p.add_argument("--D", type=int, default=6)
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=lambda a: _suite_result(bench_line_cells(a.D, a.trials)))

    p = sub.add_parser("verify-mollifier", help="threshold schedule and tube checks")
    p.add_argument(
        "--delta-grid",
        default=",".join(str(2.0**-e) for e in range(1, 13)),
        help="comma-separated smoothing levels in (0, 1)",
    )
    p.set_defaults(func=lambda a: _suite_result(verify_mollifier(_parse_grid(a.delta_grid))))

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InstanceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
