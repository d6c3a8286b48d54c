"""Command-line front end: ``reslab bands|direct|inverse|check``.

JSON in, JSON out.  Input and output default to stdin/stdout.  Exit codes:
0 ok, 1 check failed, 2 parse or schema error, 3 ambiguous classification,
4 perturbation outside the admissible class, 5 inverse gate failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

from .background import BackgroundError, build_background, classify_j0_states, SheetPoint
from .inverse import (
    CandidateRejected,
    InverseGateError,
    F_from_states,
    candidate_from_jost,
    glm_reconstruct,
    reconstruct_from_s1_zeros,
    reconstruct_interpolation,
    spectral_reconstruct,
)
from .instances import default_seed
from .jost import ClassViolation, validate_perturbation
from .oracle import finite_section_spectrum, identity_suite, k_kernel_least_squares, resolvable
from .poly import Poly, RootSet, roots
from .states import (
    AmbiguousClassification,
    NormingInconsistency,
    all_states,
    direct_problem,
    eigenvalues,
    norming_constants,
    s_matrix,
    zeros_S_minus_1,
)

VERSION = "reslab-states/1"

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_AMBIGUOUS, EXIT_CLASS, EXIT_INVERSE = 0, 1, 2, 3, 4, 5


class ParseError(ValueError):
    pass


# ----------------------------------------------------------------------------
# deterministic JSON


def _enc(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_enc(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _enc(x, indent, level + 1) for x in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite float in output")
        s = format(x, ".17g")
        if "e" not in s and "." not in s and "n" not in s:
            s += ".0"
        return s
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Sorted keys, floats at 17 significant digits; byte-identical for equal input."""
    return _enc(obj, 2, 0) + "\n"


def _load(path: str | None) -> dict:
    try:
        text = sys.stdin.read() if path in (None, "-") else open(path).read()
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError("top-level JSON value must be an object")
    return obj


def _emit(obj: dict, path: str | None):
    text = dumps(obj)
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# ----------------------------------------------------------------------------
# file types


def _reals(obj: dict, key: str, n: int | None = None) -> tuple:
    if key not in obj:
        raise ParseError(f"missing field {key!r}")
    val = obj[key]
    if not isinstance(val, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in val):
        raise ParseError(f"field {key!r} must be a list of numbers")
    if n is not None and len(val) != n:
        raise ParseError(f"field {key!r} must have length {n}")
    return tuple(float(x) for x in val)


def _int(obj: dict, key: str) -> int:
    val = obj.get(key)
    if not isinstance(val, int) or isinstance(val, bool):
        raise ParseError(f"field {key!r} must be an integer")
    return val


@dataclass(frozen=True)
class ProblemFile:
    q: int
    a0: tuple
    b0: tuple
    p: int | None = None
    u: tuple = ()
    v: tuple = ()

    @classmethod
    def from_dict(cls, obj: dict, need_perturbation: bool = True) -> "ProblemFile":
        q = _int(obj, "q")
        a0 = _reals(obj, "a0", q)
        b0 = _reals(obj, "b0", q)
        if not need_perturbation and "p" not in obj:
            return cls(q, a0, b0)
        p = _int(obj, "p")
        return cls(q, a0, b0, p, _reals(obj, "u", p), _reals(obj, "v", p))

    def to_dict(self) -> dict:
        out = {"q": self.q, "a0": list(self.a0), "b0": list(self.b0)}
        if self.p is not None:
            out.update(p=self.p, u=list(self.u), v=list(self.v))
        return out


@dataclass(frozen=True)
class StateRecord:
    lambda_re: float
    lambda_im: float
    sheet: int
    kind: str
    multiplicity: int
    gap_index: int | None


@dataclass(frozen=True)
class StatesFile:
    states: tuple
    constants: dict
    bands: dict
    phi0_plus: tuple = ()
    s1_zeros: tuple = ()  # (re, im, multiplicity)
    s1_flag: bool = True
    version: str = VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "states": [
                {
                    "lambda_re": s.lambda_re,
                    "lambda_im": s.lambda_im,
                    "sheet": s.sheet,
                    "kind": s.kind,
                    "multiplicity": s.multiplicity,
                    "gap_index": s.gap_index,
                }
                for s in self.states
            ],
            "constants": dict(self.constants),
            "bands": self.bands,
            "phi0_plus": list(self.phi0_plus),
            "s1_zeros": [{"re": r, "im": i, "multiplicity": m} for r, i, m in self.s1_zeros],
            "s1_flag": self.s1_flag,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "StatesFile":
        try:
            states = tuple(
                StateRecord(
                    float(s["lambda_re"]),
                    float(s["lambda_im"]),
                    int(s["sheet"]),
                    str(s["kind"]),
                    int(s["multiplicity"]),
                    None if s.get("gap_index") is None else int(s["gap_index"]),
                )
                for s in obj["states"]
            )
            const = obj["constants"]
            for k in ("c1", "c2", "c3", "kappa"):
                if k not in const:
                    raise ParseError(f"missing constant {k!r}")
            zeros = tuple((float(z["re"]), float(z["im"]), int(z["multiplicity"])) for z in obj.get("s1_zeros", []))
            return cls(
                states=states,
                constants=dict(const),
                bands=obj.get("bands", {}),
                phi0_plus=tuple(float(x) for x in obj.get("phi0_plus", [])),
                s1_zeros=zeros,
                s1_flag=bool(obj.get("s1_flag", True)),
                version=str(obj.get("version", VERSION)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed states file: {exc}") from exc


def _background(pf: ProblemFile):
    try:
        return build_background(pf.q, pf.a0, pf.b0)
    except BackgroundError as exc:
        raise ParseError(str(exc)) from exc


def bands_dict(bg) -> dict:
    bs = bg.bands
    return {
        "q": bg.q,
        "edges": [float(e) for e in bs.edges],
        "bands": [list(b) for b in bs.bands],
        "gaps": [
            {"index": j, "lower": bs.gap(j)[0], "upper": bs.gap(j)[1], "closed": bool(bs.closed[j - 1])}
            for j in range(1, bg.q)
        ],
        "open_gaps": len(bs.open_gaps),
        "closed_gaps": int(sum(bs.closed)),
        "mu": [float(x) for x in bs.mu],
        "nu": [float(x) for x in bs.nu],
        "alpha": [float(x) for x in bs.alpha],
        "h": [float(x) for x in bs.h],
        "j0_states": [{"mu": mu, "kind": kind, "gap_index": j} for mu, kind, j in classify_j0_states(bg)],
    }


# ----------------------------------------------------------------------------
# commands


def cmd_bands(args) -> int:
    pf = ProblemFile.from_dict(_load(args.input), need_perturbation=False)
    bg = _background(pf)
    _emit(bands_dict(bg), args.out)
    return EXIT_OK


def _direct(pf: ProblemFile, tol: float):
    bg = _background(pf)
    pert = validate_perturbation(bg, pf.p, pf.u, pf.v)
    prob = direct_problem(bg, pert)
    states = all_states(prob, tol=tol)
    return bg, prob, states


def states_file(prob, states) -> StatesFile:
    d = prob.data
    s1 = zeros_S_minus_1(prob)
    recs = tuple(
        StateRecord(float(s.lam.real), float(s.lam.imag), s.sheet, s.kind, s.multiplicity, s.gap_index) for s in states
    )
    return StatesFile(
        states=recs,
        constants={"c1": d.c1, "c2": d.c2, "c3": d.c3, "kappa": d.kappa, "nu": d.nu, "A_p": d.A_p},
        bands=bands_dict(prob.bg),
        phi0_plus=tuple(float(c) for c in d.phi0.coeffs),
        s1_zeros=tuple((float(z.real), float(z.imag), m) for z, m in s1.zeros),
        s1_flag=s1.flag,
    )


def dump_grid(prob, path: str, n: int = 400):
    bg = prob.bg
    lo, hi = bg.bands.edges[0], bg.bands.edges[-1]
    w = hi - lo
    xs = np.linspace(lo - 0.25 * w, hi + 0.25 * w, n)
    rows = []
    for x in xs:
        row = {"lambda": float(x), "F": float(prob.data.F(x))}
        try:
            S = s_matrix(SheetPoint(complex(x, 0.0)), prob)
            row.update(S_re=float(S.real), S_im=float(S.imag))
        except ZeroDivisionError:
            row.update(S_re=None, S_im=None)
        rows.append(row)
    with open(path, "w") as fh:
        fh.write(dumps({"grid": rows}))


def cmd_direct(args) -> int:
    pf = ProblemFile.from_dict(_load(args.input))
    bg, prob, states = _direct(pf, args.tol)
    _emit(states_file(prob, states).to_dict(), args.out)
    if args.dump_grid:
        dump_grid(prob, args.dump_grid)
    return EXIT_OK


def _recovered_file(bg, rec) -> dict:
    return ProblemFile(bg.q, bg.a0, bg.b0, rec.p, rec.u, rec.v).to_dict()


def inverse_from_states(sf: StatesFile, bg, method: str):
    projections = []
    for s in sf.states:
        projections.extend([complex(s.lambda_re, s.lambda_im)] * s.multiplicity)
    F = F_from_states(projections, float(sf.constants["c3"]), bg)
    if method == "s1":
        if not sf.s1_zeros and int(sf.constants.get("nu", 1)) != 1:
            raise InverseGateError("method s1 needs the zeros of S - 1")
        zeros = RootSet(tuple((complex(r, i), m) for r, i, m in sf.s1_zeros))
        res = reconstruct_from_s1_zeros(F, zeros, float(sf.constants["c2"]), bg)
    else:
        if not sf.phi0_plus:
            raise InverseGateError("states file carries no phi0_plus polynomial")
        res = reconstruct_interpolation(F, Poly(sf.phi0_plus), bg)
    cand = res.candidate
    if method == "interp":
        rec, _ = spectral_reconstruct(cand, bg)
    else:
        rec, _, _ = glm_reconstruct(cand, bg)
    return rec


def cmd_inverse(args) -> int:
    if not args.background:
        raise ParseError("--background is required")
    sf = StatesFile.from_dict(_load(args.input))
    pf = ProblemFile.from_dict(_load(args.background), need_perturbation=False)
    bg = _background(pf)
    rec = inverse_from_states(sf, bg, args.method)
    _emit(_recovered_file(bg, rec), args.out)
    return EXIT_OK


def _entry(value: float, gate: float) -> dict:
    return {"value": float(value), "gate": float(gate), "pass": bool(value <= gate)}


def check_identities(prob, rng) -> dict:
    rep = identity_suite(prob, rng)
    return {k: _entry(rep.residuals[k], rep.gates[k]) for k in rep.residuals}


def section_size(bg, p: int) -> int:
    """Smallest multiple of q that is at least max(2000, 10 q p)."""
    return bg.q * -(-max(2000, 10 * bg.q * p) // bg.q)


def check_oracle(prob, states) -> dict:
    bg, pert = prob.bg, prob.pert
    N = section_size(bg, pert.p)
    sec = finite_section_spectrum(bg, pert, N)
    ev = [s.lam.real for s in eigenvalues(states)]
    ev_res = [r for r in ev if resolvable(r, bg, N)]
    acc = list(sec.accepted)
    miss = max([min([abs(r - x) for x in acc], default=math.inf) for r in ev_res], default=0.0)
    extra = max([min([abs(r - x) for x in ev], default=math.inf) for r in acc], default=0.0)
    return {
        "finite_section_match": _entry(miss, 1e-6),
        "finite_section_no_extra": _entry(extra, 1e-6),
    }


def check_roundtrip(prob) -> dict:
    bg, pert = prob.bg, prob.pert
    cand = candidate_from_jost(prob.data)
    out = {}

    def err(rec):
        if rec.p != pert.p:
            return math.inf
        return float(max(np.max(np.abs(np.subtract(rec.u, pert.u))), np.max(np.abs(np.subtract(rec.v, pert.v)))))

    rec, sys_, K = glm_reconstruct(cand, bg)
    out["glm_uv"] = _entry(err(rec), 1e-6)
    out["glm_vanishing"] = _entry(sys_.vanishing, 1e-8)
    Kls = k_kernel_least_squares(prob, K.shape[0] - 1).K
    out["kernel_vs_least_squares"] = _entry(float(np.max(np.abs(K - Kls))), 1e-6)
    rec2, meas = spectral_reconstruct(cand, bg)
    out["spectral_uv"] = _entry(err(rec2), 1e-6)
    if all(m == 1 for _, m in roots(prob.data.F)):
        res = reconstruct_interpolation(prob.data.F, prob.data.phi0, bg)
        d = res.candidate.P1 - prob.data.theta0
        out["interpolation_theta0"] = _entry(float(np.max(np.abs(d.coeffs))), 1e-6)
    return out


def cmd_check(args) -> int:
    pf = ProblemFile.from_dict(_load(args.input))
    bg, prob, states = _direct(pf, args.tol)
    seed = default_seed()
    rng = np.random.default_rng(seed)
    report = {}
    suites = ["identities", "oracle", "roundtrip"] if args.suite == "all" else [args.suite]
    for name in suites:
        if name == "identities":
            report[name] = check_identities(prob, rng)
            try:
                nm = norming_constants(states, prob)
                report[name]["norming_two_routes"] = _entry(max([n.rel_diff for n in nm], default=0.0), 1e-6)
            except NormingInconsistency:
                report[name]["norming_two_routes"] = _entry(1.0, 1e-6)
        elif name == "oracle":
            report[name] = check_oracle(prob, states)
        else:
            report[name] = check_roundtrip(prob)
    ok = all(e["pass"] for suite in report.values() for e in suite.values())
    report["pass"] = ok
    report["meta"] = {"seed": seed, "suites": suites}
    if "oracle" in suites:
        N = section_size(bg, prob.pert.p)
        report["meta"]["sections"] = [N, 2 * N]
    _emit(report, args.out)
    return EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reslab", description="States and inverse problems for perturbed periodic Jacobi operators")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("input", nargs="?", default=None, help="input JSON (default: stdin)")
        p.add_argument("--out", default=None, help="output JSON (default: stdout)")

    p = sub.add_parser("bands", help="band structure of the background")
    common(p)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("direct", help="all states of the perturbed operator")
    common(p)
    p.add_argument("--tol", type=float, default=1e-8, help="relative residual gate for roots of F")
    p.add_argument("--dump-grid", default=None, metavar="PATH", help="write lambda/F/S samples for plotting")
    p.set_defaults(func=cmd_direct)

    p = sub.add_parser("inverse", help="reconstruct (p, u, v) from a states file")
    common(p)
    p.add_argument("--method", choices=("glm", "interp", "s1"), default="glm")
    p.add_argument("--background", default=None, help="background problem file (q, a0, b0)")
    p.set_defaults(func=cmd_inverse)

    p = sub.add_parser("check", help="run verification suites")
    common(p)
    p.add_argument("--suite", choices=("identities", "oracle", "roundtrip", "all"), default="all")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except AmbiguousClassification as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except ClassViolation as exc:
        print(f"error: not in the admissible class: {exc}", file=sys.stderr)
        return EXIT_CLASS
    except (InverseGateError, CandidateRejected) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVERSE


if __name__ == "__main__":
    sys.exit(main())
