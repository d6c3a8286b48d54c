"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
Instance sets come from ``instance_family`` (seed from RESLAB_SEED).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import pytest
import sympy as sp

import exact_oracle
from reslab.background import SheetPoint
from reslab.instances import instance_family, worked_instance
from reslab.inverse import (
    InverseGateError,
    candidate_from_jost,
    glm_reconstruct,
    reconstruct_from_s1_zeros,
    reconstruct_interpolation,
)
from reslab.jost import JostPole, asymptotic_residual, jost_f, jost_polys
from reslab.oracle import finite_section_spectrum, identity_suite, resolvable
from reslab.poly import Poly, roots
from reslab.states import (
    ANTIBOUND,
    BOUND,
    RESONANCE,
    SIGMA0,
    _local_scale,
    all_states,
    direct_problem,
    eigenvalues,
    gap_closure_counts,
    norming_constants,
    sign_law_value,
    zeros_S_minus_1,
)


@dataclass
class Outcome:
    number: int
    ok: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"criterion {self.number}: {'PASS' if self.ok else 'FAIL'}  {self.detail}  [{self.seconds:.2f}s]"


def _family(n):
    out = []
    for inst in instance_family(n):
        prob = direct_problem(inst.bg, inst.pert)
        out.append((inst, prob, all_states(prob)))
    return out


def _coeff_err(p: Poly, expr) -> float:
    ex = np.array([float(c) for c in reversed(sp.Poly(expr, exact_oracle.lam).all_coeffs())])
    c = p.coeffs
    n = max(len(c), len(ex))
    return float(np.max(np.abs(np.pad(c, (0, n - len(c))) - np.pad(ex, (0, n - len(ex))))))


def criterion_1() -> Outcome:
    ex = exact_oracle.worked()
    r = sp.sqrt(sp.Rational(189, 20))
    assert ex.theta_plus[0] == sp.Rational(3, 2)
    assert sp.expand(ex.phi_plus[0] + sp.Rational(5, 3) * exact_oracle.lam) == 0
    assert sp.expand(ex.F - (-sp.Rational(10, 9) * exact_oracle.lam**3 + sp.Rational(21, 2) * exact_oracle.lam)) == 0
    assert set(sp.solve(ex.F, exact_oracle.lam)) == {0, r, -r}

    t0 = time.perf_counter()
    inst = worked_instance()
    prob = direct_problem(inst.bg, inst.pert)
    states = all_states(prob)
    elapsed = time.perf_counter() - t0
    d = prob.data
    coef = max(
        _coeff_err(d.theta0, ex.theta_plus[0]),
        _coeff_err(d.phi0, ex.phi_plus[0]),
        _coeff_err(d.F, ex.F),
        abs(d.c1 - float(ex.c1)),
        abs(d.c2 - float(ex.c2)),
        abs(d.c3 - float(ex.c3)),
    )
    bound = sorted(s.lam.real for s in states if s.kind == BOUND)
    sig = [s for s in states if s.kind == SIGMA0]
    rf = float(r)
    root_err = max(abs(bound[0] + rf), abs(bound[1] - rf), abs(sig[0].lam)) if len(bound) == 2 and len(sig) == 1 else math.inf
    ok = coef <= 1e-10 and root_err <= 1e-9 and d.kappa == ex.kappa == 3 and len(states) == 3 and elapsed < 1.0
    return Outcome(1, ok, f"coeff err {coef:.1e}, root err {root_err:.1e}, kappa {d.kappa}, {len(states)} states", elapsed)


def criterion_2() -> Outcome:
    t0 = time.perf_counter()
    worst, bad = 0.0, 0
    for inst in instance_family(100):
        d = jost_polys(inst.bg, inst.pert)
        if d.F.degree != d.kappa or d.kappa != inst.pert.nu + inst.bg.q - 1:
            bad += 1
        worst = max(worst, abs(d.F.lead / (-inst.bg.a0_wrap * d.c3) - 1))
    el = time.perf_counter() - t0
    ok = bad == 0 and worst <= 1e-8 and el < 10
    return Outcome(2, ok, f"100 instances, degree mismatches {bad}, max rel lead err {worst:.1e}", el)


def section_size(q: int) -> int:
    return q * math.ceil(2000 / q)


def criterion_3(family) -> Outcome:
    t0 = time.perf_counter()
    worst, missing, extra, checked = 0.0, 0, 0, 0
    for inst, prob, states in family:
        N = section_size(inst.bg.q)
        spec = finite_section_spectrum(inst.bg, inst.pert, N)
        ev = [s.lam.real for s in eigenvalues(states)]
        acc = list(spec.accepted)
        for r in ev:
            if not resolvable(r, inst.bg, N):
                continue
            checked += 1
            dist = min([abs(r - x) for x in acc], default=math.inf)
            if dist > 1e-6:
                missing += 1
            else:
                worst = max(worst, dist)
        for x in acc:
            if min([abs(r - x) for r in ev], default=math.inf) > 1e-6:
                extra += 1
    el = time.perf_counter() - t0
    ok = missing == 0 and extra == 0 and checked > 0 and el < 60
    return Outcome(3, ok, f"{checked} eigenvalues, max diff {worst:.1e}, missing {missing}, spurious {extra}", el)


def criterion_4(family) -> Outcome:
    t0 = time.perf_counter()
    v = {"odd": 0, "sign": 0, "band": 0, "simple": 0, "sheet": 0}
    for inst, prob, states in family:
        bg, d = inst.bg, prob.data
        for c in gap_closure_counts(states, bg).values():
            v["odd"] += c % 2 == 0
        for s in states:
            if s.kind == BOUND:
                v["sign"] += sign_law_value(s, prob) >= 0
                v["simple"] += s.multiplicity != 1
            # the other sheet of each state is not a zero of f_0
            if s.kind in (BOUND, ANTIBOUND, RESONANCE):
                other = SheetPoint(s.lam, 3 - s.sheet)
                try:
                    f = jost_f(0, other, d, bg)
                    v["sheet"] += abs(f) <= 1e-4 * _local_scale(s.lam, prob, other.sheet)
                except JostPole:
                    pass
        for z, _ in roots(d.F):
            if abs(z.imag) < 1e-10 * max(1.0, abs(z)) and bg.bands.locate(z.real)[0] == "band":
                v["band"] += 1
        for lo, hi in bg.bands.bands:
            for x in np.linspace(lo, hi, 52)[1:-1]:
                if np.sign(d.F(x)) != np.sign(bg.phi_q(x)):
                    v["band"] += 1
    el = time.perf_counter() - t0
    ok = sum(v.values()) == 0
    return Outcome(4, ok, "violations " + ", ".join(f"{k}={n}" for k, n in v.items()), el)


def criterion_5(family) -> Outcome:
    t0 = time.perf_counter()
    worst, n, nonpos = 0.0, 0, 0
    for inst, prob, states in family:
        for nm in norming_constants(states, prob, rtol=np.inf):
            n += 1
            worst = max(worst, nm.rel_diff)
            nonpos += not (nm.series > 0 and nm.closed_form > 0)
    el = time.perf_counter() - t0
    ok = worst <= 1e-6 and nonpos == 0 and n > 0
    return Outcome(5, ok, f"{n} bound states, max rel diff {worst:.1e}, non-positive {nonpos}", el)


def criterion_6(family) -> Outcome:
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = {}
    ok = True
    wi = worked_instance()
    for inst, prob, _ in family + [(wi, direct_problem(wi.bg, wi.pert), None)]:
        rep = identity_suite(prob, rng)
        ok &= rep.ok and all(rep.residuals[k] <= 1e-9 for k in rep.residuals)
        for k, x in rep.residuals.items():
            worst[k] = max(worst.get(k, 0.0), x)
    el = time.perf_counter() - t0
    top = max(v for k, v in worst.items() if k != "gap_sine_sign_violations")
    return Outcome(6, bool(ok), f"max residual {top:.1e}, sign violations {int(worst['gap_sine_sign_violations'])}", el)


def _uv_err(rec, pert) -> float:
    if rec.p != pert.p:
        return math.inf
    return float(max(np.max(np.abs(np.subtract(rec.u, pert.u))), np.max(np.abs(np.subtract(rec.v, pert.v)))))


def criterion_7(family30) -> Outcome:
    t0 = time.perf_counter()
    worst, van = 0.0, 0.0
    for inst, prob, _ in family30:
        assert inst.bg.bands.all_open
        rec, sys, _ = glm_reconstruct(candidate_from_jost(prob.data), inst.bg, gate=1e-8)
        worst = max(worst, _uv_err(rec, inst.pert))
        van = max(van, sys.vanishing)
    el = time.perf_counter() - t0
    ok = worst <= 1e-6 and van <= 1e-8 and el < 300
    return Outcome(7, ok, f"30 instances, max (u,v) err {worst:.1e}, max vanishing residual {van:.1e}", el)


def criterion_8(family30) -> Outcome:
    t0 = time.perf_counter()
    worst_interp, n_interp, worst_s1, n_s1, failures = 0.0, 0, 0.0, 0, 0
    for inst, prob, _ in family30:
        d = prob.data
        if all(m == 1 for _, m in roots(d.F)):
            res = reconstruct_interpolation(d.F, d.phi0, inst.bg)
            err = float(np.max(np.abs((res.candidate.P1 - d.theta0).coeffs)))
            worst_interp = max(worst_interp, err)
            failures += err > 1e-6
            n_interp += 1
        z = zeros_S_minus_1(prob)
        if z.flag and all(m == 1 for _, m in roots(d.F)):
            res = reconstruct_from_s1_zeros(d.F, z.zeros, d.c2, inst.bg)
            err = max(
                float(np.max(np.abs((res.candidate.P1 - d.theta0).coeffs))),
                float(np.max(np.abs((res.candidate.P2 - d.phi0).coeffs))),
            )
            worst_s1 = max(worst_s1, err)
            failures += err > 1e-6
            n_s1 += 1
    wi = worked_instance()
    wp = direct_problem(wi.bg, wi.pert)
    try:
        reconstruct_from_s1_zeros(wp.data.F, zeros_S_minus_1(wp).zeros, wp.data.c2, wi.bg)
        rejected = False
    except InverseGateError:
        rejected = True
    el = time.perf_counter() - t0
    ok = failures == 0 and rejected and n_interp > 0 and n_s1 > 0
    return Outcome(
        8, ok,
        f"interp {n_interp} inst err {worst_interp:.1e}; s1 {n_s1} inst err {worst_s1:.1e}; worked s1 rejected {rejected}",
        el,
    )


def criterion_9(family) -> Outcome:
    t0 = time.perf_counter()
    lo_r, hi_r, C = 1.0, 0.0, 0.0
    bad = 0
    for inst, prob, _ in family:
        rep = asymptotic_residual(prob.data, inst.bg, 1e4)
        for ratio in (rep.F_ratio, rep.f2_ratio):
            lo_r, hi_r = min(lo_r, ratio), max(hi_r, ratio)
            bad += not (0.4 <= ratio <= 0.6)
        C = max(C, rep.F_dev * 1e4, rep.f2_dev * 1e4, rep.F_dev_2 * 2e4, rep.f2_dev_2 * 2e4)
    wi = worked_instance()
    wrep = asymptotic_residual(jost_polys(wi.bg, wi.pert), wi.bg, 1e4)
    el = time.perf_counter() - t0
    ok = bad == 0
    return Outcome(
        9, ok,
        f"{len(family)} instances, ratios in [{lo_r:.4f}, {hi_r:.4f}], C <= {C:.1f}; "
        f"worked instance F ratio {wrep.F_ratio:.3f} (odd F, no first-order term)",
        el,
    )


# ----------------------------------------------------------------------------
# pytest wrappers


@pytest.fixture(scope="module")
def fam20():
    return _family(20)


@pytest.fixture(scope="module")
def fam30():
    return _family(30)


def _report(outcome: Outcome, capsys):
    with capsys.disabled():
        print("\n" + outcome.line())
    assert outcome.ok, outcome.line()


def test_criterion_1_worked_instance_exact(capsys):
    _report(criterion_1(), capsys)


def test_criterion_2_degree_and_leading_law(capsys):
    _report(criterion_2(), capsys)


def test_criterion_3_finite_section_agreement(fam20, capsys):
    _report(criterion_3(fam20), capsys)


def test_criterion_4_structure(fam20, capsys):
    _report(criterion_4(fam20), capsys)


def test_criterion_5_norming_two_routes(fam20, capsys):
    _report(criterion_5(fam20), capsys)


def test_criterion_6_identities(fam20, capsys):
    _report(criterion_6(fam20), capsys)


def test_criterion_7_glm_round_trip(fam30, capsys):
    _report(criterion_7(fam30), capsys)


def test_criterion_8_interpolation_routes(fam30, capsys):
    _report(criterion_8(fam30), capsys)


def test_criterion_9_asymptotics(fam20, capsys):
    _report(criterion_9(fam20), capsys)


if __name__ == "__main__":
    f20, f30 = _family(20), _family(30)
    outs = [
        criterion_1(), criterion_2(), criterion_3(f20), criterion_4(f20), criterion_5(f20),
        criterion_6(f20), criterion_7(f30), criterion_8(f30), criterion_9(f20),
    ]
    for o in outs:
        print(o.line())
    raise SystemExit(0 if all(o.ok for o in outs) else 1)
