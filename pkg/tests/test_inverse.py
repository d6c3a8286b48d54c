import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.background import SheetPoint
from reslab.instances import instance_family, random_instance, worked_background
from reslab.inverse import (
    CandidateRejected,
    GlmSystem,
    InverseGateError,
    JostCandidate,
    candidate_from_jost,
    glm_kernel,
    glm_reconstruct,
    glm_solve,
    reconstruct_from_s1_zeros,
    reconstruct_interpolation,
    recover_coefficients,
    s_hat_symmetry,
    scattering_from_candidate,
    spectral_reconstruct,
    validate_candidate,
)
from reslab.jost import validate_perturbation
from reslab.oracle import k_kernel_least_squares
from reslab.poly import Poly, RootSet
from reslab.states import direct_problem, norming_constants, s_matrix, zeros_S_minus_1

R = math.sqrt(189 / 20)


def uv_error(rec, pert) -> float:
    if rec.p != pert.p:
        return math.inf
    return float(max(np.max(np.abs(np.subtract(rec.u, pert.u))), np.max(np.abs(np.subtract(rec.v, pert.v)))))


@pytest.fixture(scope="module")
def wcand(worked_prob):
    return candidate_from_jost(worked_prob.data)


def test_worked_candidate_accepted(wcand, worked):
    rep = validate_candidate(wcand, worked.bg)
    assert sorted(s.lam.real for s in rep.bound) == pytest.approx([-R, R], abs=1e-9)


def test_candidate_with_zero_c2_rejected(wcand, worked):
    bad = JostCandidate(wcand.P1, wcand.P2, wcand.c1, 0.0, wcand.nu)
    with pytest.raises(CandidateRejected):
        validate_candidate(bad, worked.bg)


def test_candidate_with_nonreal_sheet1_zero_rejected():
    # nu = 2 on the worked background: P1 = c1 - d/2 keeps both asymptotic laws
    bg = worked_background()
    c1, d, e = 0.14793014303273438, 1.879621435201635, 2.47653346366633
    cand = JostCandidate(Poly([c1 - d / 2]), Poly([e, d]), c1, -2 * d, 2)
    with pytest.raises(CandidateRejected, match="first sheet is not real"):
        validate_candidate(cand, bg)


def test_scattering_worked(wcand, worked, worked_prob, worked_states):
    scat = scattering_from_candidate(wcand, worked.bg)
    assert len(scat.r) == 2
    assert sorted(scat.r) == pytest.approx([-R, R], abs=1e-9)
    assert all(m > 0 for m in scat.m)
    ref = {round(n.r, 6): n.series for n in norming_constants(worked_states, worked_prob)}
    for r, m in zip(scat.r, scat.m):
        assert m == pytest.approx(ref[round(r, 6)], rel=1e-6)
    assert s_hat_symmetry(scat) < 1e-9
    for x in np.linspace(1.55, 2.45, 10):
        assert abs(abs(s_matrix(SheetPoint(complex(x, 0.0)), worked_prob)) - 1) < 1e-9


def test_glm_kernel_worked(wcand, worked):
    sys = glm_kernel(scattering_from_candidate(wcand, worked.bg))
    F = sys.Fcal
    assert np.isrealobj(F)
    assert np.array_equal(F, F.T)
    L = F.shape[0] - 1
    assert max(abs(F[l, m]) for l in range(L + 1) for m in range(L + 1) if l + m >= 3) < 1e-8


def test_glm_solve_worked(wcand, worked, worked_prob):
    rec, sys, K = glm_reconstruct(wcand, worked.bg)
    L = K.shape[0] - 1
    for n in range(2, L + 1):
        assert K[n, n] == pytest.approx(1.0, abs=1e-9)
    assert K[2, 2] / K[1, 1] == pytest.approx(1.5, rel=1e-9)
    Kls = k_kernel_least_squares(worked_prob, L).K
    assert np.allclose(K[1:, 1:], Kls[1:, 1:], atol=1e-8)
    assert uv_error(rec, worked.pert) < 1e-6


def test_glm_trivial_data():
    sys = GlmSystem(np.zeros((5, 5)), np.zeros((5, 5)), 0, 0.0, 0)
    K = glm_solve(sys)
    assert np.allclose(K, np.eye(5))
    rec = recover_coefficients(K, worked_background())
    assert rec.p == 0 and rec.u == () and rec.v == ()


def test_kernel_support_on_family(family):
    # K(n, m) vanishes once n + m >= nu + 1 (in particular for n + m >= 2p + 1)
    for inst, prob, _ in family:
        _, sys, K = glm_reconstruct(candidate_from_jost(prob.data), inst.bg)
        nu = inst.pert.nu
        L = K.shape[0] - 1
        for n in range(L + 1):
            for m in range(n, L + 1):
                if n + m >= nu + 1 and m > n:
                    assert abs(K[n, m]) < 1e-7, (inst.label, n, m)
                if 2 * n >= nu + 1:
                    assert abs(abs(K[n, n]) - 1) < 1e-7


def test_round_trip_q3_p2():
    inst = random_instance(np.random.default_rng(42), q=3, p=2)
    prob = direct_problem(inst.bg, inst.pert)
    rec, _, _ = glm_reconstruct(candidate_from_jost(prob.data), inst.bg)
    assert uv_error(rec, inst.pert) < 1e-6


def test_spectral_route_worked(wcand, worked):
    rec, meas = spectral_reconstruct(wcand, worked.bg)
    assert meas.total_mass == pytest.approx(1.0, abs=1e-8)
    assert uv_error(rec, worked.pert) < 1e-6


def test_interpolation_worked(worked, worked_prob):
    d = worked_prob.data
    res = reconstruct_interpolation(d.F, d.phi0, worked.bg)
    assert sorted(z.real for z in res.sigma1) == pytest.approx([-R, R], abs=1e-9)
    assert res.candidate.P1.allclose(Poly([1.5]), rtol=1e-10)
    rec, _, _ = glm_reconstruct(res.candidate, worked.bg)
    assert uv_error(rec, worked.pert) < 1e-6


def test_interpolation_rejects_flipped_F(worked, worked_prob):
    d = worked_prob.data
    with pytest.raises((CandidateRejected, InverseGateError)):
        res = reconstruct_interpolation(-d.F, d.phi0, worked.bg)
        validate_candidate(res.candidate, worked.bg)


def test_s1_route_rejects_worked(worked, worked_prob):
    z = zeros_S_minus_1(worked_prob)
    with pytest.raises(InverseGateError, match="exceptional-set collision"):
        reconstruct_from_s1_zeros(worked_prob.data.F, z.zeros, worked_prob.data.c2, worked.bg)


def test_s1_route_nu1(worked):
    pert = validate_perturbation(worked.bg, 1, (0.0,), (0.5,))
    prob = direct_problem(worked.bg, pert)
    res = reconstruct_from_s1_zeros(prob.data.F, RootSet(()), prob.data.c2, worked.bg)
    assert res.candidate.P2.allclose(prob.data.phi0, rtol=1e-12)
    rec, _, _ = glm_reconstruct(res.candidate, worked.bg)
    assert uv_error(rec, pert) < 1e-6


def test_s1_route_recovers_phi0():
    done = 0
    for inst in instance_family(24):
        prob = direct_problem(inst.bg, inst.pert)
        z = zeros_S_minus_1(prob)
        if not z.flag or any(m > 1 for _, m in z.zeros):
            continue
        res = reconstruct_from_s1_zeros(prob.data.F, z.zeros, prob.data.c2, inst.bg)
        assert res.candidate.P2.allclose(prob.data.phi0, atol=1e-8 * max(1, np.max(np.abs(prob.data.phi0.coeffs))), rtol=0)
        done += 1
    assert done >= 5


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1))
def test_two_inverse_routes_agree(seed):
    inst = random_instance(np.random.default_rng(seed))
    prob = direct_problem(inst.bg, inst.pert)
    cand = candidate_from_jost(prob.data)
    rec_glm, _, _ = glm_reconstruct(cand, inst.bg)
    rec_spec, _ = spectral_reconstruct(cand, inst.bg)
    assert uv_error(rec_glm, inst.pert) < 1e-6
    assert uv_error(rec_spec, inst.pert) < 1e-6
