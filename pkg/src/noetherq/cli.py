"""Command-line entry point: ``noetherq <command> [options]``.

Exit status is 0 when every verdict in the report is consistent, 2 when an
equivalence that should hold was found to fail, and 1 on input errors.
"""
from __future__ import annotations

import argparse
import os
import sys
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .channels import (
    choi_matrix, is_completely_positive, positivity_profile, stinespring_dilation,
)
from .classical_markov import (
    classical_noether_continuous, classical_noether_discrete, embedding_agreement,
    validate_chain,
)
from .fixed_structure import (
    FixedStructureReport, NoetherVerdict, constants_scale, fixed_point_space, noether_discrete,
    noether_measurement, propagation_check,
)
from .formats import (
    InputError, canonical_dumps, load_dynamics, load_json, parse_chain, parse_channel, parse_observable,
    to_jsonable,
)
from .linalg_core import (
    NoetherqError, OperatorSubspace, Tolerances, is_psd, min_eigenvalue, subspace_distance,
    span_subspace,
)
from .semigroups import (
    DEFAULT_TIMES, SemigroupSpec, conditional_expectation_check, constants_crosscheck,
    constants_of_motion, ergodic_projection, growth_bound, noether_continuous,
)

EXIT_OK, EXIT_INPUT, EXIT_INCONSISTENT = 0, 1, 2
COMMANDS = ("analyze-channel", "noether", "lindblad-constants", "ergodic", "classical", "dilate")


def tool_version() -> str:
    try:
        return version("noetherq")
    except PackageNotFoundError:
        return "unknown"


# --------------------------------------------------------------------------
# report fragments
# --------------------------------------------------------------------------

def subspace_doc(V: OperatorSubspace, bases: bool) -> dict:
    doc = {"dimension": V.size, "rank_tol": V.tol.rank_tol, "eq_tol": V.tol.eq_tol}
    if V.warnings:
        doc["warnings"] = list(V.warnings)
    if bases:
        doc["basis"] = [np.round(B, 15) for B in V.basis]
    return doc


def verdict_doc(v: NoetherVerdict) -> dict:
    return {
        "theorem": v.theorem,
        "clauses": {k: {"holds": v.clauses[k], "residual": v.residuals[k]} for k in v.clauses},
        "details": v.details,
        "groups": v.groups,
        "notes": v.notes,
        "consistent": v.consistent,
    }


def structure_doc(r: FixedStructureReport, bases: bool) -> dict:
    return {
        "fix": subspace_doc(r.fix, bases),
        "mult_domain": subspace_doc(r.mult_domain, bases),
        "bimodule": subspace_doc(r.bimodule, bases),
        "constants2": subspace_doc(r.constants2, bases),
        "fix_is_algebra": r.fix_is_algebra,
        "residuals": {"fix_closure": r.fix_closure_residual,
                      "constants2_closure": r.constants2_closure_residual,
                      "bimodule_vs_constants2": r.bimodule_vs_constants2},
        "witnesses": [{"a": w, "a_squared": w @ w} for w in r.witnesses],
        "consistent": r.consistent,
    }


def _observable(path, dim, tol):
    data, src = load_json(path)
    A = parse_observable(data, src, dim)
    if A.ndim == 1:
        A = np.diag(A).astype(complex)
    return A


# --------------------------------------------------------------------------
# commands; each returns (result dict, consistent, warnings)
# --------------------------------------------------------------------------

def cmd_analyze_channel(args, tol):
    data, src = load_json(args.file)
    ch = parse_channel(data, src, tol)
    S, Phi = ch.schrodinger, ch.heisenberg
    prof = positivity_profile(S, k_max=args.kmax, samples=args.samples, seed=args.seed, tol=tol)
    warnings = list(prof.warnings)
    result = {
        "description": ch.description,
        "dim": S.dim,
        "flags": {"trace_preserving": prof.trace_preserving, "unital": prof.unital,
                  "hermiticity_preserving": prof.hermiticity_preserving,
                  "completely_positive": prof.completely_positive},
        "choi_min_eigenvalue": min_eigenvalue(choi_matrix(S)),
        "positivity": {str(k): {"status": kp.status, "min_eigenvalue": kp.min_eigenvalue,
                                "samples": kp.samples, "witness": kp.witness}
                       for k, kp in prof.k_positive.items()},
    }
    consistent = True
    if prof.completely_positive and Phi.is_unital(tol):
        rep = constants_scale(Phi, tol, seed=args.seed)
        result["structure"] = structure_doc(rep, args.bases)
        result["structure"]["picture"] = "heisenberg"
        consistent = rep.consistent
        for V in (rep.fix, rep.mult_domain, rep.bimodule, rep.constants2):
            warnings.extend(V.warnings)
    else:
        fix = fixed_point_space(Phi, tol)
        result["structure"] = {"picture": "heisenberg", "fix": subspace_doc(fix, args.bases),
                               "note": "map is not unital CP; domain computations skipped"}
        warnings.extend(fix.warnings)
    return result, consistent, warnings


def cmd_noether(args, tol):
    data, src = load_json(args.channel)
    ch = parse_channel(data, src, tol)
    A = _observable(args.observable, ch.schrodinger.dim, tol)
    result, consistent = {}, True
    cp = is_completely_positive(ch.schrodinger, tol)
    v = noether_discrete(ch.schrodinger, A, tol, seed=args.seed, positivity_samples=args.samples)
    result["discrete"] = verdict_doc(v)
    consistent &= v.consistent
    if is_psd(A, tol):
        v = noether_measurement(ch.schrodinger, A, tol, seed=args.seed, positivity_samples=args.samples)
        result["measurement"] = verdict_doc(v)
        consistent &= v.consistent
    if cp:
        v = propagation_check(ch.heisenberg, A, tol)
        result["propagation"] = verdict_doc(v)
        consistent &= v.consistent
    return result, consistent, []


def _semigroup(path, tol, times) -> SemigroupSpec:
    kind, obj = load_dynamics(path, tol, times)
    if kind == "lindblad":
        return obj
    return SemigroupSpec.from_channel(obj.heisenberg, "heisenberg", times or DEFAULT_TIMES)


def cmd_lindblad_constants(args, tol):
    spec = _semigroup(args.file, tol, args.times)
    C = constants_of_motion(spec, tol)
    cross = constants_crosscheck(spec, C, tol)
    per_time = {format(t, "g"): r for t, r in cross["per_time"].items()}
    limit = 10 * tol.rank_tol * max(1.0, spec.dual_generator.norm())
    consistent = max([cross["joint"], *cross["per_time"].values()]) <= limit and cross["stationarity"] <= limit
    result = {
        "dim": spec.dim,
        "times": list(spec.times),
        "constants": subspace_doc(C, args.bases),
        "crosscheck": {"per_time_distance": per_time, "joint_distance": cross["joint"],
                       "stationarity_residual": cross["stationarity"]},
        "growth_bound": growth_bound(spec),
    }
    if args.observable:
        A = _observable(args.observable, spec.dim, tol)
        v = noether_continuous(spec, A, tol, seed=args.seed)
        result["noether"] = verdict_doc(v)
        consistent &= v.consistent
    return result, consistent, list(C.warnings)


def cmd_ergodic(args, tol):
    kind, obj = load_dynamics(args.file, tol, args.times)
    mode = args.mode or ("continuous" if kind == "lindblad" else "discrete")
    if mode == "discrete":
        if kind != "channel":
            raise InputError("discrete mode needs a channel file", args.file)
        E = ergodic_projection(obj.heisenberg, "discrete", tol)
        fix = fixed_point_space(obj.heisenberg, tol)
    else:
        spec = obj if kind == "lindblad" else SemigroupSpec.from_channel(obj.heisenberg, "heisenberg")
        E = ergodic_projection(spec, "continuous", tol)
        fix = constants_of_motion(spec, tol)
    P = E.projection
    rng_space = span_subspace([P.apply(X) for X in np.eye(P.dim ** 2).reshape(-1, P.dim, P.dim, order="F")],
                              P.dim, tol)
    range_dist = subspace_distance(rng_space, fix)
    ce = conditional_expectation_check(P, tol)
    ok = {
        "idempotent": E.idempotency_residual() <= tol.clause_tol,
        "unital": E.unitality_residual() <= tol.clause_tol,
        "completely_positive": E.choi_min_eigenvalue() >= -tol.psd_tol,
        "range_equals_fixed_space": range_dist <= tol.clause_tol,
        "conditional_expectation_iff_algebra": ce.passed == ce.range_is_algebra,
    }
    result = {
        "mode": mode, "method": E.method, "spectral_gap": E.spectral_gap, "iterations": E.iterations,
        "crosscheck_distance": E.crosscheck_distance, "notes": E.notes,
        "residuals": {"idempotency": E.idempotency_residual(), "unitality": E.unitality_residual(),
                      "choi_min_eigenvalue": E.choi_min_eigenvalue(), "range_distance": range_dist},
        "checks": ok,
        "fixed_space": subspace_doc(fix, args.bases),
        "conditional_expectation": {"passed": ce.passed, "max_residual": ce.max_residual,
                                    "range_is_algebra": ce.range_is_algebra,
                                    "range_closure_residual": ce.range_closure_residual,
                                    "witness": ce.witness},
    }
    if args.bases:
        result["projection"] = P.matrix
    return result, all(ok.values()), list(fix.warnings)


def cmd_classical(args, tol):
    data, src = load_json(args.matrix)
    c = parse_chain(data, src)
    odata, osrc = load_json(args.observable)
    O = parse_observable(odata, osrc, c.n_states)
    if O.ndim != 1:
        raise InputError("classical observables are given as {\"values\": [...]}", args.observable, "observable")
    rep = validate_chain(c, tol)
    v = (classical_noether_discrete if c.kind == "stochastic_matrix" else classical_noether_continuous)(c, O, tol)
    agreement = embedding_agreement(c, O, tol, seed=args.seed)
    agree = all(cv == qv for cv, _, qv in agreement.values())
    result = {
        "kind": c.kind, "states": c.n_states,
        "validation": {"column_residual": rep.column_residual, "min_entry": rep.min_entry},
        "verdict": verdict_doc(v),
        "embedding_agreement": {k: {"classical": cv, "quantum_clause": ql, "quantum": qv}
                                for k, (cv, ql, qv) in agreement.items()},
    }
    return result, v.consistent and agree, []


def cmd_dilate(args, tol):
    data, src = load_json(args.file)
    ch = parse_channel(data, src, tol)
    if ch.kraus is None:
        raise InputError("dilation needs a Kraus or effects channel", args.file)
    heis = ch.kraus if ch.kraus.picture == "heisenberg" else ch.kraus.dual()
    triple = stinespring_dilation(heis, tol)
    recon = triple.reconstruction_error(ch.heisenberg)
    defect = min_eigenvalue(np.eye(triple.V.shape[1]) - triple.V.conj().T @ triple.V)
    result = {
        "dims": list(triple.dims),
        "reconstruction_error": recon,
        "contraction_min_eigenvalue": defect,
        "co_contraction_defect": triple.co_contraction_defect(),
    }
    if args.bases:
        result["V"] = triple.V
    return result, recon <= tol.eq_tol and defect >= -tol.psd_tol, []


HANDLERS = {
    "analyze-channel": cmd_analyze_channel, "noether": cmd_noether,
    "lindblad-constants": cmd_lindblad_constants, "ergodic": cmd_ergodic,
    "classical": cmd_classical, "dilate": cmd_dilate,
}


# --------------------------------------------------------------------------
# argument parsing and output
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _times(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")
    if not vals or any(t < 0 for t in vals):
        raise argparse.ArgumentTypeError("times must be a nonempty list of nonnegative numbers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--tol-rank", type=float, default=1e-10, help="relative singular-value cutoff")
    g.add_argument("--tol-eq", type=float, default=1e-9, help="equality tolerance")
    g.add_argument("--tol-psd", type=float, default=1e-9, help="minimum-eigenvalue slack")
    g.add_argument("--seed", type=int, default=None, help="seed for sampled checks (default $NOETHERQ_SEED or 0)")
    g.add_argument("--json", action="store_true", help="emit the canonical JSON report")
    g.add_argument("--times", type=_times, default=None, help="comma-separated sample times")
    g.add_argument("--kmax", type=int, default=2, help="largest amplification order for positivity tests")
    g.add_argument("--samples", type=int, default=1000, help="random PSD samples per positivity test")
    g.add_argument("--bases", action="store_true", help="include subspace bases and matrices in the report")

    parser = _Parser(prog="noetherq", description="Symmetries and conservation laws of quantum and "
                                                   "classical Markov dynamics.")
    parser.add_argument("--version", action="version", version=f"noetherq {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze-channel", parents=[common], help="flags, positivity and fixed-point structure")
    p.add_argument("--file", required=True)
    p = sub.add_parser("noether", parents=[common], help="discrete Noether verdicts for a channel and observable")
    p.add_argument("--channel", required=True)
    p.add_argument("--observable", required=True)
    p = sub.add_parser("lindblad-constants", parents=[common], help="constants of motion of a semigroup")
    p.add_argument("--file", required=True, help="Lindblad file, or a channel file (generator Psi - id)")
    p.add_argument("--observable", help="optional observable for the continuous Noether verdict")
    p = sub.add_parser("ergodic", parents=[common], help="ergodic projection and conditional-expectation test")
    p.add_argument("--file", required=True)
    p.add_argument("--mode", choices=("discrete", "continuous"))
    p = sub.add_parser("classical", parents=[common], help="classical Markov-chain Noether verdicts")
    p.add_argument("--matrix", required=True)
    p.add_argument("--observable", required=True)
    p = sub.add_parser("dilate", parents=[common], help="Stinespring dilation of a channel")
    p.add_argument("--file", required=True)
    return parser


def _render_text(doc, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = []
    for key in sorted(doc):
        val = doc[key]
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_render_text(val, indent + 1))
        elif isinstance(val, list) and val and isinstance(val[0], (dict, list)):
            lines.append(f"{pad}{key}: [{len(val)} item(s)]")
            for item in val:
                if isinstance(item, dict):
                    lines.extend(_render_text(item, indent + 1))
                else:
                    lines.append(f"{pad}  {item}")
        elif isinstance(val, float):
            lines.append(f"{pad}{key}: {val:.6g}")
        else:
            lines.append(f"{pad}{key}: {val}")
    return lines


def run(argv=None) -> tuple[dict | None, int]:
    """Parse ``argv``, run the command and return ``(report, exit_code)``."""
    return execute(build_parser().parse_args(argv))


def execute(args: argparse.Namespace) -> tuple[dict | None, int]:
    if args.seed is None:
        env = os.environ.get("NOETHERQ_SEED")
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            print(f"noetherq: error: NOETHERQ_SEED must be an integer, got {env!r}", file=sys.stderr)
            return None, EXIT_INPUT
    try:
        tol = Tolerances(args.tol_rank, args.tol_eq, args.tol_psd)
    except ValueError as exc:
        print(f"noetherq: error: {exc}", file=sys.stderr)
        return None, EXIT_INPUT
    try:
        result, consistent, warnings = HANDLERS[args.command](args, tol)
    except (InputError, NoetherqError, ValueError) as exc:
        print(f"noetherq: error: {exc}", file=sys.stderr)
        return None, EXIT_INPUT
    inputs = {k: getattr(args, k) for k in ("file", "channel", "observable", "matrix", "mode")
              if getattr(args, k, None) is not None}
    report = to_jsonable({
        "tool": {"name": "noetherq", "version": tool_version()},
        "request": {"command": args.command, "inputs": inputs, "seed": args.seed,
                    "tolerances": {"rank_tol": tol.rank_tol, "eq_tol": tol.eq_tol, "psd_tol": tol.psd_tol},
                    "times": list(args.times) if args.times else None,
                    "kmax": args.kmax, "samples": args.samples},
        "result": result,
        "warnings": sorted(set(warnings)),
        "consistent": bool(consistent),
    })
    return report, EXIT_OK if consistent else EXIT_INCONSISTENT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report, code = execute(args)
    if report is not None:
        if args.json:
            sys.stdout.write(canonical_dumps(report) + "\n")
        else:
            sys.stdout.write("\n".join(_render_text(report)) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
