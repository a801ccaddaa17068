"""Command-line experiment runner.

Every output starts with the library version and the full configuration, so
a table can be reproduced from its own header.  Exit codes: 0 success, 1 a
certificate or invariant failed, 2 usage error, 3 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .errors import CertificateError, IsocompError, UsageError

# -- helpers ------------------------------------------------------------------


def _int_range(text: str) -> list[int]:
    """``"4..12"`` -> [4, ..., 12]; a single integer is a one-element range."""
    a, sep, b = text.partition("..")
    try:
        lo = int(a)
        hi = int(b) if sep else lo
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or A..B, got {text!r}") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return list(range(lo, hi + 1))


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


class Table:
    def __init__(self, columns, summary=None):
        self.columns = list(columns)
        self.rows = []
        self.summary = summary or {}

    def add(self, *values):
        self.rows.append([_clean(v) for v in values])


def _config(args) -> dict:
    skip = {"func", "output", "format"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def render(table: Table, args) -> str:
    cfg = _config(args)
    summary = {k: _clean(v) for k, v in table.summary.items()}
    if args.format == "json":
        doc = {
            "version": __version__,
            "config": cfg,
            "summary": summary,
            "rows": [dict(zip(table.columns, r)) for r in table.rows],
        }
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# isocomp {__version__}\n")
    buf.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
    if summary:
        buf.write(f"# summary: {json.dumps(summary, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


# -- subcommands --------------------------------------------------------------


def cmd_ball(args):
    from .groups import enumerate_ball, parse_group

    B = enumerate_ball(parse_group(args.group), args.n)
    t = Table(["index", "length", "normal_form"], {"size": len(B)})
    fmt = B.group.format
    for i, g in enumerate(B.elements):
        t.add(i, int(B.lengths[i]), fmt(g))
    return t


def cmd_profile(args):
    from .groups import enumerate_ball, parse_group
    from .isoperimetry import (
        lamplighter_folner_pair,
        pair_test_function,
        profile_growth_certificate,
        profile_heuristic_max,
        verify_certificate,
    )

    G = parse_group(args.group)
    t = Table(["n", "t_support", "ratio", "method"])
    for n in args.n:
        if args.method == "pair":
            if not (G.is_wreath and G.lamp_order):
                raise UsageError("pair certificates need a lamplighter group CmwrZ")
            cert = pair_test_function(lamplighter_folner_pair(G.lamp_order, n), args.p)
        elif args.method == "growth":
            cert = profile_growth_certificate(enumerate_ball(G, n), n, args.p)
        else:
            B = enumerate_ball(G, n + 1)
            cert = profile_heuristic_max(B, n, args.p, args.restarts, args.seed, args.iterations)
        verify_certificate(cert)
        t.add(n, cert.t, cert.ratio, cert.method + (" (degenerate)" if cert.degenerate else ""))
    return t


def cmd_folner(args):
    from .groups import parse_group
    from .isoperimetry import folner_from_pair, lamplighter_folner_pair, verify_folner_pair

    G = parse_group(args.group)
    if not (G.is_wreath and G.lamp_order):
        raise UsageError("Følner pairs are built for lamplighter groups CmwrZ")
    t = Table(["n", "cond1", "C2", "C3", "max_length", "right_form", "folner_j", "folner_ratio"])
    failed = []
    for n in args.n:
        P = lamplighter_folner_pair(G.lamp_order, n)
        r = verify_folner_pair(P)
        F = folner_from_pair(P)
        t.add(n, r.cond1, r.C2, r.C3, r.max_length, r.right_form, F.j, F.ratio)
        if not r.cond1 or r.C2 >= 2:
            failed.append(n)
    if failed:
        t.failure = CertificateError("Følner pair conditions", f"n = {failed}")
    return t


def cmd_tree_embed(args):
    from .embeddings import (
        CompressionModulus,
        TreeEmbedding,
        compression_constant,
        lemma_lower_bound,
        tree_compression_curve,
    )

    f = CompressionModulus.parse(args.f)
    E = TreeEmbedding.binary(args.J, args.p, f)
    curve = tree_compression_curve(E)
    c = compression_constant(curve, f)
    t = Table(["t", "rho", "f", "ratio"], {"lip": curve.lip, "c_f": c})
    bad = []
    for s, r in zip(curve.t, curve.rho):
        fv = float(f(float(s)))
        t.add(int(s), r, fv, r / fv if fv else math.inf)
        if r < lemma_lower_bound(E, int(s)) * (1 - 1e-12):
            bad.append(int(s))
    if bad:
        t.failure = CertificateError("tree lemma lower bound", f"t = {bad}")
    return t


def cmd_bourgain(args):
    from .embeddings import (
        CompressionModulus,
        TreeEmbedding,
        bourgain_integral,
        min_distance_ratio,
        tree_compression_curve,
    )

    f = CompressionModulus.parse(args.f)
    p = args.p if args.p is not None else args.q
    t = Table(["J", "integral", "minRatio", "bound"])
    bad = []
    for J in args.J:
        if J < 2:
            raise UsageError("J must be >= 2 (the bound divides by log J)")
        E = TreeEmbedding.binary(J, p, f)
        curve = tree_compression_curve(E)
        I = bourgain_integral(curve, args.q, J)
        mr = min_distance_ratio(E)
        bound = (I / math.log(J)) ** (1 / args.q)
        t.add(J, I, mr, bound)
        if mr > bound:
            bad.append(J)
    if bad:
        t.failure = CertificateError("min-ratio corollary", f"J = {bad}")
    return t


def cmd_cp_check(args):
    from .embeddings import CompressionModulus, check_Cp

    r = check_Cp(CompressionModulus.parse(args.f), args.p)
    t = Table(["f", "p", "verdict", "partial_integral", "tail_estimate"])
    t.add(args.f, args.p, r.verdict, r.partial_integral, r.tail_estimate)
    return t


def cmd_zwrz(args):
    from .cocycles import zwrz_lower_bound

    r = zwrz_lower_bound(args.radius, args.p)
    summary = {
        "fitted_exponent": r.fitted_exponent,
        "target_exponent": args.p / (2 * args.p - 1),
        "certified_c": r.c,
        "elements": r.n_elements,
        "case_a": r.case_a,
        "case_a_broken": r.case_a_broken,
        "support_broken": r.support_broken,
        "final_broken": r.final_broken,
        "witness": r.witness,
    }
    t = Table(["t", "infMax", "certifiedC"], summary)
    for s in range(1, r.radius + 1):
        t.add(s, r.per_sphere_inf[s], r.c)
    return t


def cmd_assemble(args):
    from .cocycles import zwrz_assembly
    from .embeddings import CompressionModulus

    A = zwrz_assembly(CompressionModulus.parse(args.f), args.K, args.radius, args.p)
    summary = {
        "generator_sum": A.generator_sum,
        "integral_f_over_M": A.integral,
        "cp_partial": A.cp_partial,
        "weights": [float(w) for w in A.weights],
    }
    t = Table(["k", "guaranteed", "measured"], summary)
    bad = []
    for k, fk, rho in A.rows():
        t.add(k, fk, rho)
        if rho < fk * (1 - 1e-12):
            bad.append(k)
    if A.generator_sum > 2 * A.integral + 0.1:
        bad.append("generator bound")
    if bad:
        t.failure = CertificateError("dyadic assembly guarantee", f"{bad}")
    return t


def cmd_walk(args):
    from .groups import enumerate_ball, parse_group
    from .walks import (
        convolution_powers,
        lazy_uniform,
        simulate_return_probability,
        walk_profile_certificate,
        wreath_return_probabilities,
        wreath_selection,
    )

    G = parse_group(args.group)
    n = args.n
    cols = ["q", "returnProb", "psi", "selectedQ", "certRatio"]
    if args.simulate:
        cols.append("simulated_noncertified")
    if args.method == "dp":
        if not G.is_wreath:
            raise UsageError("the local-time recursion needs a wreath product over Z")
        sel = wreath_selection(G, n, args.laziness)
        P = wreath_return_probabilities(G, 4 * n, args.laziness)
        t = Table(cols, {"selection_ratio": sel.ratio, "selection_bound": sel.bound})
        ret = P[: 2 * n + 1]
        psi = P[0::2][: 2 * n + 1]
        cert_ratio = ""
        ball = None
    else:
        ball = enumerate_ball(G, 2 * n + 1)
        nu = lazy_uniform(ball, args.laziness)
        cert = walk_profile_certificate(nu, n, ball)
        sel = cert.info.selection
        powers = convolution_powers(nu, 2 * n, ball)
        ret = [float(f.values[0]) for f in powers]
        psi = sel.psi
        cert_ratio = cert.ratio
        t = Table(
            cols,
            {
                "selection_ratio": sel.ratio,
                "selection_bound": sel.bound,
                "conversion_bound": cert.info.conversion_bound,
            },
        )
    for q in range(2 * n + 1):
        row = [q, ret[q], psi[q], sel.q, cert_ratio]
        if args.simulate:
            if ball is None:
                ball = enumerate_ball(G, 1)
            row.append(simulate_return_probability(lazy_uniform(ball, args.laziness), q, args.simulate, args.seed))
        t.add(*row)
    if not sel.holds:
        t.failure = CertificateError("scale selection bound", f"{sel.ratio} > {sel.bound}")
    return t


def cmd_schoenberg(args):
    from .cocycles import LampConfig, random_wreath_elements, schoenberg_psd_check
    from .groups import parse_group

    G = parse_group(args.group)
    b = LampConfig(G)  # rejects groups without Z or C2 lamps
    sample = random_wreath_elements(G, args.samples, args.seed)
    t = Table(["t", "min_eigenvalue", "norm", "ok"])
    bad = []
    for s in args.t:
        r = schoenberg_psd_check(b, sample, s)
        t.add(s, r.min_eigenvalue, r.norm, r.holds)
        if not r.holds:
            bad.append(s)
    if bad:
        t.failure = CertificateError("Schoenberg positivity", f"t = {bad}")
    return t


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isocomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"isocomp {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", "-o", help="write here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="accepted for reproducibility stamps; runs single-threaded")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, epilog):
        sp = sub.add_parser(name, parents=[common], help=help, epilog=epilog)
        sp.set_defaults(func=func)
        return sp

    sp = add("ball", cmd_ball, "enumerate a Cayley ball", "columns: index, length, normal_form")
    sp.add_argument("--group", required=True)
    sp.add_argument("--n", type=int, required=True)

    sp = add("profile", cmd_profile, "isoperimetric profile certificates", "columns: n, t_support, ratio, method")
    sp.add_argument("--group", required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--method", choices=["pair", "growth", "heuristic"], default="pair")
    sp.add_argument("--n", type=_int_range, required=True, help="N or A..B")
    sp.add_argument("--restarts", type=int, default=8)
    sp.add_argument("--iterations", type=int, default=200)

    sp = add(
        "folner",
        cmd_folner,
        "verify lamplighter Følner pairs",
        "columns: n, cond1, C2, C3, max_length, right_form, folner_j, folner_ratio",
    )
    sp.add_argument("--group", default="C2wrZ")
    sp.add_argument("--n", type=_int_range, default=_int_range("1..8"))

    sp = add("tree-embed", cmd_tree_embed, "compression of the tree embedding", "columns: t, rho, f, ratio")
    sp.add_argument("--J", type=int, required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--f", required=True, help="pow:a | powlog:a,b | powloglog:a,b,c | const:c")

    sp = add("bourgain-check", cmd_bourgain, "integral obstruction on binary trees", "columns: J, integral, minRatio, bound")
    sp.add_argument("--J", type=_int_range, required=True, help="A..B")
    sp.add_argument("--q", type=float, default=2.0)
    sp.add_argument("--p", type=float, default=None, help="embedding exponent (default q)")
    sp.add_argument("--f", default="pow:0.7")

    sp = add("cp-check", cmd_cp_check, "classify a modulus against (C_p)", "columns: f, p, verdict, partial_integral, tail_estimate")
    sp.add_argument("--f", required=True)
    sp.add_argument("--p", type=float, default=2.0)

    sp = add("zwrz", cmd_zwrz, "Z wr Z compression lower bound", "columns: t, infMax, certifiedC")
    sp.add_argument("--radius", type=int, default=12)
    sp.add_argument("--p", type=float, default=2.0)

    sp = add("assemble", cmd_assemble, "dyadic cocycle assembly on Z wr Z", "columns: k, guaranteed, measured")
    sp.add_argument("--f", default="pow:0.6")
    sp.add_argument("--K", type=int, default=3)
    sp.add_argument("--radius", type=int, default=16)
    sp.add_argument("--p", type=float, default=2.0)

    sp = add("walk", cmd_walk, "return probabilities and the walk certificate", "columns: q, returnProb, psi, selectedQ, certRatio")
    sp.add_argument("--group", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--laziness", type=float, default=0.5)
    sp.add_argument("--method", choices=["ball", "dp"], default="ball", help="dp: exact local-time recursion on wreath products")
    sp.add_argument("--simulate", type=int, default=0, metavar="TRIALS", help="add a Monte Carlo column (not certified)")

    sp = add("schoenberg", cmd_schoenberg, "Gaussian kernel positivity of the lamp cocycle", "columns: t, min_eigenvalue, norm, ok")
    sp.add_argument("--group", default="ZwrZ")
    sp.add_argument("--samples", type=int, default=50)
    sp.add_argument("--t", type=_float_list, default=[1.0, 4.0, 16.0])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        table = args.func(args)
    except IsocompError as exc:
        print(f"isocomp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    text = render(table, args)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failure = getattr(table, "failure", None)
    if failure is not None:
        print(f"isocomp: failed invariant: {failure}", file=sys.stderr)
        return failure.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
