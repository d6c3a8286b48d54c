import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reslab.jost import validate_perturbation
from reslab.oracle import (
    finite_section,
    finite_section_spectrum,
    identity_suite,
    k_kernel_least_squares,
    resolvable,
    tridiag_eigenvalues,
)
from reslab.poly import Poly
from reslab.states import direct_problem

R = math.sqrt(189 / 20)


def trivial(bg):
    return validate_perturbation(bg, 1, (0.0,), (0.0,), allow_trivial=True)


@settings(max_examples=20)
@given(st.integers(2, 60), st.integers(0, 2**31 - 1))
def test_ql_matches_lapack(n, seed):
    rng = np.random.default_rng(seed)
    d = rng.normal(size=n)
    e = rng.uniform(0.1, 2, size=n - 1)
    ref = np.linalg.eigvalsh(np.diag(d) + np.diag(e, 1) + np.diag(e, -1))
    assert np.allclose(tridiag_eigenvalues(d, e), ref, atol=1e-11)


def test_worked_finite_section(worked):
    spec = finite_section_spectrum(worked.bg, worked.pert, 2000)
    assert np.allclose(sorted(spec.accepted), [-R, R], atol=1e-6)


def test_unperturbed_has_no_eigenvalue_at_antibound_dirichlet_point(worked):
    spec = finite_section_spectrum(worked.bg, trivial(worked.bg), 2000)
    assert spec.accepted.size == 0
    assert not np.any(np.abs(spec.stable) < 1e-3)


def test_free_lattice_no_outside_eigenvalues(free_bg):
    sec = finite_section(free_bg, trivial(free_bg), 800)
    ev = tridiag_eigenvalues(sec.diag, sec.offdiag)
    assert ev.min() > -2 - 1e-12 and ev.max() < 2 + 1e-12


def test_section_size_rules(worked):
    with pytest.raises(ValueError):
        finite_section_spectrum(worked.bg, worked.pert, 2001)
    assert resolvable(R, worked.bg, 2000)


def test_kernel_worked(worked_prob):
    fit = k_kernel_least_squares(worked_prob, 4)
    K = fit.K
    for n in range(5):
        for m in range(n + 1, 5):
            if n + m >= 3:
                assert abs(K[n, m]) < 1e-8
    assert K[2, 2] / K[1, 1] == pytest.approx(1.5, rel=1e-10)


def test_kernel_identity_when_unperturbed(worked):
    prob = direct_problem(worked.bg, trivial(worked.bg))
    K = k_kernel_least_squares(prob, 4).K
    assert np.allclose(K, np.eye(5), atol=1e-9)


def test_identity_suite_worked(worked_prob):
    rep = identity_suite(worked_prob)
    assert rep.ok, rep.residuals
    assert rep.residuals["background_wronskian"] <= 1e-9


def test_identity_suite_family(family, rng):
    for inst, prob, _ in family:
        rep = identity_suite(prob, rng)
        assert rep.ok, (inst.label, rep.residuals)


def test_identity_suite_catches_corrupted_F(worked_prob):
    c = worked_prob.data.F.coeffs.copy()
    c[1] *= 1.001
    bad = dataclasses.replace(worked_prob, data=dataclasses.replace(worked_prob.data, F=Poly(c)))
    rep = identity_suite(bad)
    assert not rep.passed["F_factorization"]
    assert not rep.ok
