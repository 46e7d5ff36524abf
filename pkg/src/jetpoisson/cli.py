"""Command line front end.

Every subcommand prints a plain ``key: value`` report (or JSON with
``--json``) and exits with 0 when the check passes, 1 on a mathematical
failure and 2 on malformed input.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .algebra import functional_equal
from .dp_form import dp_factorize, projective_dp_push
from .errors import (EpsOrderMismatch, InputError, InvalidSubstitution, JetPoissonError, NotDP,
                     ShapeError)
from .fileformats import default_eps_order, format_operator_file, read_operator_file
from .invariants import central_invariants
from .operators import WNLOperator, density_of, is_skew
from .poisson import (ferapontov_conditions, hydro_metric, is_compatible, is_poisson,
                      schouten_lv, schouten_lz)
from .printing import format_diffpoly
from .transform import (Substitution, ferapontov_pavlov, push_bivector, read_metric_file,
                        read_substitution_file)

__all__ = ["main", "main_entry", "build_parser"]

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class Report:
    """Ordered key-value report with a pass/fail verdict."""

    def __init__(self, command: str):
        self.items: list[tuple[str, object]] = [("command", command)]
        self.ok = True
        self.body: str | None = None

    def add(self, key: str, value) -> None:
        self.items.append((key, value))

    def fail(self) -> None:
        self.ok = False

    def render(self, as_json: bool) -> str:
        if as_json:
            data = {k: v for k, v in self.items}
            data["result"] = "pass" if self.ok else "fail"
            if self.body is not None:
                data["output"] = self.body
            return json.dumps(data, indent=2, sort_keys=False) + "\n"
        lines = [f"{k}: {_text(v)}" for k, v in self.items]
        lines.append(f"result: {'pass' if self.ok else 'fail'}")
        out = "\n".join(lines) + "\n"
        if self.body is not None:
            out += "---\n" + self.body
        return out


def _text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _name(path: str) -> str:
    return os.path.basename(path)


def _coef(space, c) -> str:
    return format_diffpoly(space.coefficient(c))


def _operators(path: str, eps_order: int | None):
    parsed = read_operator_file(path, eps_order)
    return parsed.space, parsed.operators


def _pencil(path: str, eps_order: int | None):
    space, ops = _operators(path, eps_order)
    if set(ops) != {"1", "2"}:
        raise InputError("a pencil file needs exactly the operators P1 and P2")
    return space, ops["1"], ops["2"]


# -- subcommands ------------------------------------------------------------------

def cmd_check_skew(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    _, ops = _operators(args.file, args.eps_order)
    for label, P in sorted(ops.items()):
        ok = is_skew(P)
        rep.add(f"P{label} skew", ok)
        if not ok:
            rep.fail()


def cmd_check_jacobi(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    _, ops = _operators(args.file, args.eps_order)
    for label, P in sorted(ops.items()):
        skew = is_skew(P)
        ok = skew and is_poisson(P)
        rep.add(f"P{label} skew", skew)
        rep.add(f"P{label} poisson", ok)
        if not ok:
            rep.fail()


def cmd_compat(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    _, P1, P2 = _pencil(args.file, args.eps_order)
    checks = [("P1 poisson", is_skew(P1) and is_poisson(P1)),
              ("P2 poisson", is_skew(P2) and is_poisson(P2))]
    compatible = checks[0][1] and checks[1][1] and is_compatible(P1, P2)
    checks.append(("compatible", compatible))
    for key, ok in checks:
        rep.add(key, ok)
        if not ok:
            rep.fail()


def cmd_schouten(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    space, ops = _operators(args.file, args.eps_order)
    labels = sorted(ops)
    if len(labels) == 1:
        labels = labels * 2
    elif len(labels) != 2:
        raise ShapeError("the schouten command takes one or two operators")
    P, Q = (density_of(ops[k]) for k in labels)
    rep.add("formalism", args.formalism)
    rep.add("pair", f"[P{labels[0]}, P{labels[1]}]")
    if args.formalism == "lz":
        b = schouten_lz(P, Q)
    else:
        lv = schouten_lv(P, Q, args.laurent_order)
        b = lv.density
        rep.add("laurent order", lv.order)
        rep.add("exact from u[1,1] power", lv.cutoff + 1)
    zero = functional_equal(b, space.zero)
    rep.add("vanishes", zero)
    rep.add("bracket", format_diffpoly(b))


def cmd_push(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    rep.add("substitution", _name(args.subst))
    space, ops = _operators(args.file, args.eps_order)
    s = read_substitution_file(args.subst, space.eps_order)
    if s.space is not space:
        raise EpsOrderMismatch("the substitution and the operator file disagree on N or E_max")
    rep.add("reexpress", args.reexpress)
    out = {label: push_bivector(s, P, reexpress=args.reexpress) for label, P in ops.items()}
    rep.body = format_operator_file(out, space)


def cmd_fp_oracle(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    m = read_metric_file(args.file, args.eps_order)
    s_op = m.operator()
    fields = tuple(m.space.u(i + 1) for i in range(m.space.n))
    s = Substitution(m.space, m.space.coefficient(m.B), fields)
    pushed = push_bivector(s, s_op)
    closed = ferapontov_pavlov(m.g, m.Gamma, m.B, m.space)
    agree = pushed == closed
    rep.add("agree", agree)
    if not agree:
        rep.fail()
    rep.body = format_operator_file({"": closed}, m.space)


def cmd_hydro_check(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    space, ops = _operators(args.file, args.eps_order)
    for label, P in sorted(ops.items()):
        h = hydro_metric(P)
        report = ferapontov_conditions(h)
        for name, ok, residuals in report.conditions:
            rep.add(f"P{label} {name}", ok)
            for idx, r in residuals:
                rep.add(f"P{label} {name} residual {list(idx)}", _coef(space, r))
        if not report.passed:
            rep.fail()


def cmd_invariants(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    space, P1, P2 = _pencil(args.file, args.eps_order)
    K = space.eps_order if args.order is None else args.order
    rep.add("order", K)
    ci = central_invariants(P1, P2, K)
    for i, ci_i in enumerate(ci.c):
        rep.add(f"branch {i + 1} f", _coef(space, ci.f[i]))
        parts = ", ".join(f"c{k} = {_coef(space, v)}" for k, v in sorted(ci_i.items()))
        rep.add(f"branch {i + 1}", parts)
    if ci.odd:
        rep.add("nonzero odd corrections", ", ".join(f"branch {b} order {k}" for b, k in ci.odd))
        rep.fail()


def cmd_dp(args, rep: Report) -> None:
    rep.add("file", _name(args.file))
    rep.add("action", args.action)
    space, ops = _operators(args.file, args.eps_order)
    out = {}
    if args.action == "factorize":
        for label, P in sorted(ops.items()):
            try:
                out[label] = WNLOperator.from_local(dp_factorize(P))
                rep.add(f"P{label} dp form", True)
            except NotDP as exc:
                rep.add(f"P{label} dp form", False)
                rep.add(f"P{label} failed step", exc.step)
                rep.add(f"P{label} failed entry", list(exc.entry))
                rep.add(f"P{label} remainder", format_diffpoly(exc.remainder))
                rep.fail()
    else:

        if args.subst is None:
            raise InputError("dp push needs --subst with a projective block")
        s = read_substitution_file(args.subst, space.eps_order)
        if s.projective is None:
            raise InvalidSubstitution("dp push needs a projective substitution")
        rep.add("substitution", _name(args.subst))
        for label, P in sorted(ops.items()):
            out[label] = WNLOperator.from_local(projective_dp_push(s.projective, P.local))
    if out and rep.ok:
        rep.body = format_operator_file(out, space)


COMMANDS = {
    "check-skew": cmd_check_skew,
    "check-jacobi": cmd_check_jacobi,
    "compat": cmd_compat,
    "schouten": cmd_schouten,
    "push": cmd_push,
    "fp-oracle": cmd_fp_oracle,
    "hydro-check": cmd_hydro_check,
    "invariants": cmd_invariants,
    "dp": cmd_dp,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jetpoisson",
        description="Weakly non-local Poisson structures and Miura-reciprocal transformations.")
    parser.add_argument("--eps-order", type=int, default=None,
                        help="truncation order in eps (default: file header, then "
                             "$JETPOISSON_EPS_ORDER, then 6)")
    parser.add_argument("--json", action="store_true", help="emit the report as JSON")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("check-skew", "test skew-symmetry of each operator"),
                            ("check-jacobi", "test the Jacobi identity of each operator"),
                            ("compat", "test that P1 and P2 form a Poisson pencil"),
                            ("fp-oracle", "compare a reciprocal push with the closed formula"),
                            ("hydro-check", "evaluate the Ferapontov conditions")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file")
    p = sub.add_parser("schouten", help="bracket of the operators' densities")
    p.add_argument("file")
    p.add_argument("--formalism", choices=("lz", "lv"), default="lz")
    p.add_argument("--laurent-order", type=int, default=6)
    p = sub.add_parser("push", help="push operators through a substitution")
    p.add_argument("file")
    p.add_argument("--subst", required=True)
    p.add_argument("--reexpress", action="store_true",
                   help="express the result in the new dependent variables")
    p = sub.add_parser("invariants", help="central invariants of a pencil")
    p.add_argument("file")
    p.add_argument("--order", type=int, default=None)
    p = sub.add_parser("dp", help="Doyle-Potemin factorisation or projective push")
    p.add_argument("action", choices=("factorize", "push"))
    p.add_argument("file")
    p.add_argument("--subst", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    rep = Report(args.command)
    try:
        if args.eps_order is None:
            default_eps_order()
        elif args.eps_order < 0:
            raise InputError("--eps-order must be non-negative")
        COMMANDS[args.command](args, rep)
    except JetPoissonError as exc:
        payload = {"error": exc.code, "message": str(exc)}
        if args.json:
            sys.stderr.write(json.dumps(payload) + "\n")
        else:
            sys.stderr.write(f"error: {exc.code}: {exc}\n")
        return EXIT_INPUT if exc.input_error else EXIT_FAIL
    sys.stdout.write(rep.render(args.json))
    return EXIT_PASS if rep.ok else EXIT_FAIL


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
