"""ppsim command line: gen, chsh, ghz, entropy, sweep, correlate.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import math
import operator
import os
import sys
import tempfile
from itertools import combinations

import numpy as np

from . import entropy as ent
from . import fields as fl
from . import gf4
from . import measure as ms

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TOL = 1e-9
GRAM_TOL = 1e-12
MAX_DEGREE = 5


class UsageError(Exception):
    pass


class VerificationError(Exception):
    pass


# ---------------------------------------------------------------- parsing

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub,
           ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_angle(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_angle(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_angle(node.left), _eval_angle(node.right))
    raise ValueError


def parse_angle(text: str) -> float:
    """A number or simple arithmetic in ``pi``: '0.5', 'pi/4', '-3*pi/2'."""
    try:
        value = _eval_angle(ast.parse(text.strip().replace("π", "pi"), mode="eval").body)
    except (SyntaxError, ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse angle {text!r}") from None
    if not math.isfinite(value):
        raise UsageError(f"angle {text!r} is not finite")
    return value


def parse_angles(text):
    if text is None:
        return None
    return [parse_angle(t) for t in text.split(",") if t.strip()]


def parse_ints(text):
    if text is None:
        return None
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def parse_kind(text):
    """'product', 'psi+', ..., or 'ghz-N'; returns (Kind, n or None)."""
    text = text.strip().lower()
    if text.startswith("ghz"):
        rest = text[3:].lstrip("-")
        try:
            return fl.Kind.GHZ, (int(rest) if rest else None)
        except ValueError:
            raise UsageError(f"bad GHZ kind {text!r}; use ghz-N") from None
    try:
        return fl.Kind.parse(text), None
    except ValueError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------- helpers

def load_pps(args) -> gf4.PpsSet:
    if not 1 <= args.s <= MAX_DEGREE:
        raise UsageError(f"--s must be in 1..{MAX_DEGREE}, got {args.s}")
    coeffs = parse_ints(args.poly)
    if coeffs is None:
        return gf4.default_pps_set(args.s)
    if len(coeffs) != args.s:
        raise UsageError(f"--poly has {len(coeffs)} coefficients but --s is {args.s}")
    try:
        poly = gf4.PrimitivePoly(tuple(coeffs))
    except ValueError as e:
        raise UsageError(str(e)) from None
    try:
        return gf4.build_pps_set(poly)
    except gf4.NotPrimitiveError as e:
        raise VerificationError(f"non-primitive polynomial {poly}: period {e.period} != {4 ** args.s - 1}") from None
    except ValueError as e:
        raise VerificationError(str(e)) from None


def build_ensemble(args, kind, n=None) -> fl.FieldEnsemble:
    if getattr(args, "ensemble", None):
        with open(args.ensemble) as fh:
            ens = fl.ensemble_from_json(fh.read())
    else:
        pps = load_pps(args)
        indices = parse_ints(getattr(args, "indices", None))
        if n is None and indices is None:
            n = getattr(args, "n", None)
        if n is not None and n > len(pps):
            raise UsageError(f"n={n} exceeds the {len(pps)} sequences available at s={pps.s}")
        try:
            ens = fl.make_ensemble(pps, kind, n=n, indices=indices)
        except (ValueError, IndexError) as e:
            raise UsageError(str(e)) from None
    if getattr(args, "save_ensemble", None):
        write_output(args.save_ensemble, fl.ensemble_to_json(ens))
    return ens


def write_output(path, text: str):
    """Write once, atomically; '-' or None means stdout."""
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".ppsim-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def note(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    pps = load_pps(args)
    text = gf4.pps_to_json(pps)
    write_output(args.out, text)
    expected = 4 ** (pps.s - 1)
    unbalanced = [a for a in range(len(pps))
                  if a and not np.all(gf4.label_counts(pps[a]) == expected)]
    G = gf4.gram_matrix(pps)
    off = np.abs(G - np.eye(pps.N))
    residual = float(off.max())
    bad = int(np.count_nonzero(off >= GRAM_TOL))
    lines = [
        f"polynomial: {pps.poly}  (s={pps.s}, N={pps.N}, {len(pps)} sequences)",
        f"balance: {'ok' if not unbalanced else f'FAIL on sequences {unbalanced}'}"
        f" (each label {expected} times)",
        f"gram residual: {residual:.3e} ({bad} of {pps.N * (pps.N - 1)} off-diagonal entries >= {GRAM_TOL:g})",
    ]
    # the summary goes wherever the JSON does not
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print("\n".join(lines), file=stream)
    if unbalanced:
        raise VerificationError(f"balance violated on {len(unbalanced)} sequences")
    if residual >= GRAM_TOL:
        raise VerificationError(f"Gram identity violated: max off-diagonal {residual:.3e}")
    return EXIT_OK


def cmd_chsh(args) -> int:
    kind = fl.Kind.PRODUCT if args.product else parse_kind(args.variant)[0]
    if kind is fl.Kind.GHZ:
        raise UsageError("CHSH needs a Bell variant or --product")
    ens = build_ensemble(args, kind, n=2)
    angles = parse_angles(args.angles)
    if angles is None:
        angles = list(ms.DEFAULT_CHSH_ANGLES[ens.kind])
    if len(angles) != 4:
        raise UsageError(f"CHSH takes 4 angles (a, a', b, b'), got {len(angles)}")
    terms = ms.chsh_terms(ens, *angles)
    B = ms.chsh(ens, *angles)
    grid_B, grid_angles = ms.chsh_grid_search(ens)
    if ens.kind is fl.Kind.PRODUCT:
        passed = B <= ms.CHSH_CLASSICAL_BOUND + TOL
        target = f"<= {ms.CHSH_CLASSICAL_BOUND:g}"
    else:
        passed = abs(B - ms.CHSH_QUANTUM_BOUND) < TOL
        target = "2*sqrt(2)"
    record = {
        "kind": ens.kind.value, "indices": list(ens.indices), "angles": angles,
        "E": list(terms), "B": B, "target": target, "pass": bool(passed),
        "grid_max_B": grid_B, "grid_max_angles": list(grid_angles), "C": 0.5, "N": ens.N,
    }
    if args.format == "csv":
        text = dump_csv(["kind", "theta_a", "theta_a2", "theta_b", "theta_b2",
                         "E_ab", "E_ab2", "E_a2b2", "E_a2b", "B", "pass"],
                        [[ens.kind.value, *angles, *terms, B, passed]])
    else:
        text = dump_json(record)
    write_output(args.out, text)
    if not passed:
        raise VerificationError(f"|B| = {B!r}, expected {target}")
    return EXIT_OK


def _sweep_rows(ens, angles, party, grid):
    rows = []
    for theta, E in ms.correlation_sweep(ens, angles, party, grid):
        a = list(angles)
        a[party] = theta
        exact = ms.expected_correlation(ens.kind, a)
        rows.append([theta, E, exact, abs(E - exact)])
    return rows


def _sweep_csv(rows):
    worst = max(r[3] for r in rows)
    return dump_csv(["theta", "E_empirical", "E_analytic", "abs_error"],
                    rows + [["max_abs_error", "", "", worst]]), worst


def _grid(count):
    if count is None:
        return None
    if count < 2:
        raise UsageError(f"--grid needs at least 2 points, got {count}")
    return [2 * math.pi * i / count for i in range(count)]


def cmd_ghz(args) -> int:
    n = args.n
    pps = load_pps(args)
    if n < 3:
        raise UsageError("GHZ needs --n >= 3")
    if n > len(pps):
        raise UsageError(f"n={n} exceeds the {len(pps)} sequences available at s={pps.s}")
    ens = build_ensemble(args, fl.Kind.GHZ, n=n)
    angles = parse_angles(args.angles) or [0.0] * n
    if len(angles) != n:
        raise UsageError(f"--angles needs {n} values, got {len(angles)}")
    res = ms.correlate(ens, angles)
    exact = ms.expected_correlation(fl.Kind.GHZ, angles)
    check_grid = [2 * math.pi * i / 8 for i in range(8)]
    marginals = []
    for pair in combinations(range(n), 2):
        worst = max(abs(ms.marginal_correlate(ens, pair, (ta, tb)).value)
                    for ta in check_grid for tb in check_grid)
        marginals.append({"parties": [ent.party_label(p) for p in pair], "max_abs_E": worst})
    failures = []
    if abs(res.value - exact) >= TOL:
        failures.append(f"E = {res.value!r}, expected cos(sum) = {exact!r}")
    bad = [m for m in marginals if m["max_abs_E"] >= TOL]
    if bad:
        failures.append(f"{len(bad)} two-party marginals nonzero, worst {max(m['max_abs_E'] for m in bad):.3e}")
    grid = _grid(args.grid)
    if args.format == "csv":
        if grid is None:
            raise UsageError("--format csv for ghz emits a sweep; give --grid")
        text, worst = _sweep_csv(_sweep_rows(ens, angles, args.party, grid))
        if worst >= TOL:
            failures.append(f"sweep max error {worst:.3e}")
    else:
        record = {"kind": "ghz", "n": n, "indices": list(ens.indices), "angles": angles,
                  "E": res.value, "E_analytic": exact, "C": res.C, "N": res.N,
                  "marginals": marginals, "pass": not failures}
        if grid is not None:
            rows = _sweep_rows(ens, angles, args.party, grid)
            record["sweep"] = {"party": args.party,
                               "theta": [r[0] for r in rows], "E": [r[1] for r in rows],
                               "max_abs_error": max(r[3] for r in rows)}
        text = dump_json(record)
    write_output(args.out, text)
    if failures:
        raise VerificationError("; ".join(failures))
    return EXIT_OK


def _expected_entropy(kind, bp):
    if kind is fl.Kind.PRODUCT:
        return 0.0
    if kind.is_bell:
        return 1.0
    if min(len(bp.A), len(bp.B)) == 1:
        return 1.0
    return None


def cmd_entropy(args) -> int:
    kind, n = parse_kind(args.kind)
    if kind is fl.Kind.GHZ and n is None:
        n = args.n or 3
    ens = build_ensemble(args, kind, n=n)
    try:
        report = ent.entanglement_report(ens)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rho = ent.density_matrix(ent.assemble_mode_state(ens))
    rows, failures = [], []
    for bp, S in report.items():
        S_b = ent.von_neumann_entropy(ent.partial_trace(rho, bp.swapped()))
        exp = _expected_entropy(ens.kind, bp)
        ok = abs(S - S_b) < TOL and (exp is None or abs(S - exp) < TOL)
        if not ok:
            failures.append(f"{bp.label()}: S_A={S!r} S_B={S_b!r} expected {exp}")
        rows.append([bp.label(), S, S_b, exp, ok])
    if args.format == "csv":
        text = dump_csv(["bipartition", "S_A", "S_B", "S_expected", "pass"],
                        [[r[0], r[1], r[2], "" if r[3] is None else r[3], r[4]] for r in rows])
    else:
        text = dump_json({"kind": ens.kind.value, "n": ens.n, "N": ens.N,
                          "indices": list(ens.indices),
                          "entropy": {r[0]: r[1] for r in rows},
                          "pass": not failures})
    write_output(args.out, text)
    if args.show and ens.n <= 4:
        note(ent.format_density(rho))
    if failures:
        raise VerificationError("; ".join(failures))
    return EXIT_OK


def cmd_sweep(args) -> int:
    kind, n = parse_kind(args.kind)
    if kind is fl.Kind.GHZ and n is None:
        n = args.n or 3
    grid = _grid(args.grid)
    if grid is None:
        raise UsageError("sweep needs --grid")
    ens = build_ensemble(args, kind, n=n)
    angles = parse_angles(args.angles) or [0.0] * ens.n
    if len(angles) != ens.n:
        raise UsageError(f"--angles needs {ens.n} values, got {len(angles)}")
    if not 0 <= args.party < ens.n:
        raise UsageError(f"--party must be in 0..{ens.n - 1}")
    rows = _sweep_rows(ens, angles, args.party, grid)
    if args.format == "json":
        worst = max(r[3] for r in rows)
        text = dump_json({"kind": ens.kind.value, "party": args.party, "angles": angles,
                          "theta": [r[0] for r in rows], "E_empirical": [r[1] for r in rows],
                          "E_analytic": [r[2] for r in rows], "max_abs_error": worst})
    else:
        text, worst = _sweep_csv(rows)
    write_output(args.out, text)
    if worst >= TOL:
        raise VerificationError(f"sweep max |E - analytic| = {worst:.3e}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    kind, n = parse_kind(args.kind)
    if kind is fl.Kind.GHZ and n is None:
        n = args.n or 3
    ens = build_ensemble(args, kind, n=n)
    angles = parse_angles(args.angles) or [0.0] * ens.n
    if len(angles) != ens.n:
        raise UsageError(f"--angles needs {ens.n} values, got {len(angles)}")
    res = ms.correlate(ens, angles)
    if args.format == "csv":
        text = dump_csv(["kind", "angles", "E", "C", "N"],
                        [[ens.kind.value, " ".join(repr(a) for a in angles), res.value, res.C, res.N]])
    else:
        text = dump_json(res.to_dict(kind=ens.kind.value))
    write_output(args.out, text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common_options(fmt="json") -> argparse.ArgumentParser:
    # parent actions are shared objects, so each subcommand gets its own copy
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--s", type=int, default=2, help="GF(4) degree, N = 4^s (default 2)")
    common.add_argument("--poly", help="feedback coefficients c0,...,c_{s-1} as labels 0-3")
    common.add_argument("--format", choices=("json", "csv"), default=fmt)
    common.add_argument("--out", help="output file (default stdout)")
    return common


def build_parser() -> argparse.ArgumentParser:

    ens_opts = argparse.ArgumentParser(add_help=False)
    ens_opts.add_argument("--indices", help="comma-separated PPS indices (default 0..n-1)")
    ens_opts.add_argument("--ensemble", help="read the ensemble from a JSON file instead")
    ens_opts.add_argument("--save-ensemble", help="also write the ensemble JSON here")

    p = argparse.ArgumentParser(prog="ppsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[_common_options()], help="generate a PPS set")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("chsh", parents=[_common_options(), ens_opts], help="CHSH value of a Bell simulation")
    c.add_argument("--variant", default="psi+", help="psi+, psi-, phi+ or phi-")
    c.add_argument("--product", action="store_true", help="use the un-exchanged product pair")
    c.add_argument("--angles", help="a,a',b,b' (default: the variant's maximizing set)")
    c.set_defaults(func=cmd_chsh)

    h = sub.add_parser("ghz", parents=[_common_options(), ens_opts], help="GHZ correlations and marginals")
    h.add_argument("--n", type=int, default=3)
    h.add_argument("--angles", help="n comma-separated angles (default zeros)")
    h.add_argument("--grid", type=int, help="also sweep --party over this many points")
    h.add_argument("--party", type=int, default=0)
    h.set_defaults(func=cmd_ghz)

    e = sub.add_parser("entropy", parents=[_common_options(), ens_opts], help="entanglement entropy table")
    e.add_argument("--kind", default="psi+", help="product, psi+, psi-, phi+, phi- or ghz-N")
    e.add_argument("--n", type=int, help="party count for product/ghz kinds")
    e.add_argument("--show", action="store_true", help="print the density matrix to stderr")
    e.set_defaults(func=cmd_entropy)

    w = sub.add_parser("sweep", parents=[_common_options("csv"), ens_opts], help="correlation vs one angle, as CSV")
    w.add_argument("--kind", default="psi+")
    w.add_argument("--n", type=int)
    w.add_argument("--party", type=int, default=0)
    w.add_argument("--angles", help="fixed angles (default zeros)")
    w.add_argument("--grid", type=int, help="number of points on [0, 2pi), at least 2")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("correlate", parents=[_common_options(), ens_opts], help="one correlation value")
    r.add_argument("--kind", default="psi+")
    r.add_argument("--n", type=int)
    r.add_argument("--angles")
    r.set_defaults(func=cmd_correlate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"ppsim {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (VerificationError, ent.DensityMatrixError, ArithmeticError) as e:
        print(f"ppsim {args.command}: verification failed: {e}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
