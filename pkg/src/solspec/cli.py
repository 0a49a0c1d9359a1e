"""Command-line entry point: ``solspec <subcommand> [flags]``.

Exit codes: 0 success, 1 selftest failure, 2 configuration error, 3 resource cap.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

from .algebra import (
    FiniteSupportElement,
    adjoint,
    length_weighted_norm,
    mu_q,
    twisted_convolve,
    weighted_norm,
)
from .config import SCHEMA_VERSION, RunConfig, build_config, load_config_file, parse_list
from .core import GroupElement, format_group, format_padic, parse_group
from .dirac import (
    BallBasis,
    CanonicalTrace,
    VectorState,
    commutator_norm,
    dirac_matrix,
    higher_commutator_norm,
    mk_lower_bound,
    operator_norm,
    resolvent_matrix,
    resolvent_tail_bound,
    summability_trace,
)
from .errors import ConfigError, ResourceCapError, SolspecError
from .inductive import LevelElement, check_functoriality, resolvent_gap, verify_morphism
from .lengths import LengthKind, LengthSpec, doubling_report, enumerate_ball
from .selftest import run_selftest
from .wiener import h1inf_evidence, neumann_inverse

COMMANDS = ("ball", "doubling", "algebra", "spectrum", "summability", "commutator", "mk-bound", "inductive", "wiener", "selftest")


# ---------------------------------------------------------------- helpers


def _pair_spec(cfg: RunConfig) -> LengthSpec:
    spec = cfg.length_spec("sum")
    if spec.is_one_dimensional:
        raise ConfigError(f"{spec.label} is a one-coordinate length; this command needs base pairs (sum, restricted:n, z2:n)")
    return spec


def _format_point(spec: LengthSpec, x) -> str:
    if spec.kind is LengthKind.Z2:
        return f"({x[0]}, {x[1]})"
    if spec.is_one_dimensional:
        return format_padic(x)
    return format_group(x)


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad number {text!r}") from exc


def _load_element(path: str | None, cfg: RunConfig) -> FiniteSupportElement:
    if path is None:
        raise ConfigError("this command needs --input with a JSON element file")
    try:
        rows = json.loads(Path(path).read_text())
        return FiniteSupportElement.from_json_list(rows, cfg.theta)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read element from {path}: {exc}") from exc


def _element_or_gamma(cfg: RunConfig) -> FiniteSupportElement:
    if cfg.input:
        return _load_element(cfg.input, cfg)
    try:
        g = parse_group(cfg.gamma, cfg.p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return FiniteSupportElement.delta(g, cfg.theta)


def _envelope(command: str, cfg: RunConfig, result) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command, "config": cfg.echo(), "result": result}


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _dump_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------------- commands


def cmd_ball(cfg: RunConfig):
    spec = cfg.length_spec("base")
    ball = enumerate_ball(spec, _fraction(cfg.radius), cfg.max_elements)
    elems = [_format_point(spec, x) for x in ball.elements]
    lens = [str(L) for L in ball.lengths]
    if (cfg.format or "json") == "csv":
        return _dump_csv(("element", "length"), zip(elems, lens))
    return _dump_json(
        _envelope("ball", cfg, {"spec": spec.label, "R": str(ball.radius), "count": len(ball), "elements": elems, "lengths": lens})
    )


def cmd_doubling(cfg: RunConfig):
    spec = cfg.length_spec("base")
    rep = doubling_report(spec, parse_list(cfg.radii), cfg.max_elements)
    if (cfg.format or "csv") == "csv":
        return _dump_csv(rep.CSV_HEADER, rep.csv_rows())
    rows = [dict(zip(rep.CSV_HEADER, r)) for r in rep.csv_rows()]
    return _dump_json(
        _envelope(
            "doubling",
            cfg,
            {
                "spec": spec.label,
                "rows": rows,
                "max_ratio2": str(rep.max_ratio2),
                "max_ratiop": str(rep.max_ratiop),
                "proved_bound": rep.proved_constant,
                "passed": rep.passed,
            },
        )
    )


def cmd_algebra(cfg: RunConfig):
    f = _load_element(cfg.input, cfg)
    op = cfg.op
    if op == "product":
        g = _load_element(cfg.input2, cfg)
        result = {"element": twisted_convolve(f, g).to_json_list()}
    elif op == "adjoint":
        result = {"element": adjoint(f).to_json_list()}
    elif op == "norm":
        spec = _pair_spec(cfg)
        result = {"spec": spec.label, "s": cfg.s, "norm": weighted_norm(f, cfg.s, spec), "l1": f.l1_norm()}
    elif op == "mu":
        spec = _pair_spec(cfg)
        result = {"spec": spec.label, "q": cfg.q, "mu": mu_q(f, cfg.q, spec)}
    else:
        raise ConfigError(f"unknown algebra op {op!r} (product, adjoint, norm, mu)")
    return _dump_json(_envelope("algebra", cfg, result))


def cmd_spectrum(cfg: RunConfig):
    spec = _pair_spec(cfg)
    R = _fraction(cfg.radius)
    basis = BallBasis.build(spec, R, cfg.max_elements, cfg.max_dim)
    D = dirac_matrix(spec, basis)
    lens = list(basis.ball.lengths)
    if (cfg.format or "json") == "csv":
        return _dump_csv(("eigenvalue", "float"), ((str(L), repr(float(L))) for L in lens))
    # B(1), then the dyadic shells (2^(n-1), 2^n] up to R
    annuli = [{"range": "[0, 1]", "count": sum(1 for L in lens if L <= 1)}]
    hi = Fraction(2)
    while hi / 2 < R:
        annuli.append({"range": f"({hi / 2}, {hi}]", "count": sum(1 for L in lens if hi / 2 < L <= hi)})
        hi *= 2
    res = resolvent_matrix(D, complex(0, cfg.t))
    result = {
        "spec": spec.label,
        "R": str(R),
        "dim": basis.dim,
        "eigenvalues": [str(L) for L in lens],
        "annulus_counts": annuli,
        "dirac_norm": operator_norm(D),
        "resolvent_norm": operator_norm(res),
        "resolvent_tail_bound": resolvent_tail_bound(R, cfg.t),
    }
    return _dump_json(_envelope("spectrum", cfg, result))


def cmd_summability(cfg: RunConfig):
    spec = _pair_spec(cfg)
    rep = summability_trace(spec, cfg.t, cfg.nmax or 4, cfg.max_elements)
    return _dump_json(_envelope("summability", cfg, rep.to_dict()))


def cmd_commutator(cfg: RunConfig):
    spec = _pair_spec(cfg)
    f = _element_or_gamma(cfg)
    basis = BallBasis.build(spec, _fraction(cfg.radius), cfg.max_elements, cfg.max_dim)
    k = cfg.order
    norm = commutator_norm(f, spec, basis, cfg.tol) if k == 1 else higher_commutator_norm(f, k, spec, basis, cfg.tol)
    result = {
        "spec": spec.label,
        "R": cfg.radius,
        "order": k,
        "norm": norm,
        "length_weighted_bound": length_weighted_norm(f, spec),
        "weighted_norm_bound": weighted_norm(f, k, spec),
    }
    return _dump_json(_envelope("commutator", cfg, result))


def cmd_mk_bound(cfg: RunConfig):
    spec = _pair_spec(cfg)
    basis = BallBasis.build(spec, _fraction(cfg.radius), cfg.max_elements, cfg.max_dim)
    try:
        g0 = parse_group(cfg.gamma, cfg.p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if g0.is_identity():
        raise ConfigError("--gamma must differ from the identity")
    th = cfg.theta
    e = GroupElement.identity(cfg.p)
    psi = VectorState.normalized({e: 1.0, g0: 1.0})
    d = FiniteSupportElement.delta(g0, th)
    candidates = [d + adjoint(d), (d - adjoint(d)).scale(1j)]
    value = mk_lower_bound(CanonicalTrace(), psi, candidates, spec, basis, cfg.tol)
    result = {
        "spec": spec.label,
        "phi": CanonicalTrace().to_dict(),
        "psi": psi.to_dict(),
        "candidates": [c.to_json_list() for c in candidates],
        "lower_bound": value,
    }
    return _dump_json(_envelope("mk-bound", cfg, result))


def cmd_inductive(cfg: RunConfig):
    j, k = cfg.j, cfg.k
    if j > k:
        raise ConfigError("--j must not exceed --k")
    th = cfg.theta
    R = _fraction(cfg.radius)
    zs = [(0, 0), (1, 0), (0, 1), (1, 1), (-1, 2)]
    samples = [LevelElement.delta(j, z, th) for z in zs]
    rep = verify_morphism(j, k, samples, R, 0.0, cfg.max_elements)
    gaps = [resolvent_gap(n, cfg.t, R, cfg.p, cfg.max_elements).to_dict() for n in range(j, k + 1)]
    result = {
        "morphism": rep.to_dict(),
        "functoriality": check_functoriality(j, (j + k) // 2, k, samples),
        "resolvent_gaps": gaps,
    }
    return _dump_json(_envelope("inductive", cfg, result))


def cmd_wiener(cfg: RunConfig):
    spec = _pair_spec(cfg)
    f = _load_element(cfg.input, cfg)
    qs = parse_list(cfg.q_schedule, int)
    ss = parse_list(cfg.s_schedule, float)
    g, rep = neumann_inverse(f, tol=cfg.tol, N_max=cfg.nmax or 200, spec=spec, s_schedule=ss, q_schedule=qs)
    ev = h1inf_evidence(g, spec, qs, range(1, 65), source=f, slack=rep.pruning_budget + rep.residual)
    result = {"report": rep.to_dict(), "evidence": ev.to_dict(), "inverse": g.to_json_list()}
    return _dump_json(_envelope("wiener", cfg, result))


def cmd_selftest(cfg: RunConfig):
    rep = run_selftest()
    text = _dump_json({"schema_version": SCHEMA_VERSION, "command": "selftest", "result": rep})
    return text, (0 if rep["passed"] else 1)


HANDLERS = {
    "ball": cmd_ball,
    "doubling": cmd_doubling,
    "algebra": cmd_algebra,
    "spectrum": cmd_spectrum,
    "summability": cmd_summability,
    "commutator": cmd_commutator,
    "mk-bound": cmd_mk_bound,
    "inductive": cmd_inductive,
    "wiener": cmd_wiener,
    "selftest": cmd_selftest,
}


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="flat key=value file; flags override it")
    a("--p", type=int, help="prime (default 2)")
    a("--theta0", help="theta_0 as a rational in [0, 1), e.g. 2/3")
    a("--digits", help="digit stream 'pre|period' or 'period', comma separated, e.g. '0,1'")
    a("--spec", help="length: base, sum, restricted:n, restricted-base:n or z2:n")
    a("--R", "--radius", dest="radius", help="ball radius (exact rational)")
    a("--radii", help="comma separated radii")
    a("--t", type=float, help="resolvent parameter or summability exponent")
    a("--level", type=int, help="level n for restricted and z2 specs")
    a("--j", type=int, help="lower level")
    a("--k", type=int, help="upper level")
    a("--tol", type=float, help="tolerance")
    a("--nmax", type=int, help="dyadic depth for summability, or Neumann term cap for wiener")
    a("--gamma", help="group element '(a/p^k, b/p^m)'")
    a("--input", help="JSON element file: list of {gamma, re, im}")
    a("--input2", help="second JSON element file (algebra product)")
    a("--op", help="algebra operation: product, adjoint, norm, mu")
    a("--s", type=float, help="weight exponent for algebra norm")
    a("--q", type=int, help="order for algebra mu")
    a("--order", type=int, help="commutator order k")
    a("--q-schedule", dest="q_schedule", help="comma separated q values")
    a("--s-schedule", dest="s_schedule", help="comma separated s values")
    a("--max-elements", dest="max_elements", type=int, help="ball size cap")
    a("--max-dim", dest="max_dim", type=int, help="matrix dimension cap")
    a("--out", help="write the report here instead of stdout")
    a("--format", choices=("json", "csv"), help="output format")

    parser = argparse.ArgumentParser(prog="solspec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ball": "enumerate a length ball",
        "doubling": "ball growth ratios against the proved doubling constants",
        "algebra": "products, adjoints and weighted norms of element files",
        "spectrum": "truncated Dirac spectrum and resolvent norms",
        "summability": "partial traces of (1 + D^2)^(-t/2) and their geometric bound",
        "commutator": "norms of iterated commutators with the Dirac operator",
        "mk-bound": "Monge-Kantorovich lower bound between the trace and a vector state",
        "inductive": "morphism checks between levels and resolvent gaps",
        "wiener": "Neumann inversion and tail decay of the inverse",
        "selftest": "run the invariant suite at small scale",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, overrides)
        out = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (SolspecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    code = 0
    if isinstance(out, tuple):
        out, code = out
    if cfg.out:
        Path(cfg.out).write_text(out)
    else:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
