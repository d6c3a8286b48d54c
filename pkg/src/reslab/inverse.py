"""Reconstruction of the perturbation from resonance and scattering data.

Routes implemented:

* Jost candidate -> scattering data -> GLM kernel -> K -> (u, v);
* Jost candidate -> spectral measure of e_1 -> Lanczos -> (u, v), a second
  route that shares no code with the GLM solver;
* (F, phi_0^+) -> theta_0^+ by interpolation at the zeros of F;
* (F, zeros of S - 1, c2) -> phi_0^+ -> the interpolation route.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .background import Background, SheetPoint, m_branch, sqrt_disc, sqrt_disc_values
from .jost import JostData, JostPole, jost_f, leading_phi0, state_poly_from, theta0_degree_bound
from .poly import Poly, PolyError, RootSet, interpolate, roots
from .states import (
    BOUND,
    ON_SHEET_TOL,
    RESONANCE,
    SIGMA0,
    VIRTUAL,
    AmbiguousClassification,
    DirectProblem,
    _dirichlet_index,
    _local_scale,
    _near_edge,
    all_states,
    build_regularizers,
    eigenvalues,
    hat_f,
    norming_closed_form,
    reg_values,
    s_hat_values,
    sign_law_value,
)


class CandidateRejected(ValueError):
    pass


class InverseGateError(RuntimeError):
    pass


# ----------------------------------------------------------------------------
# Jost candidates


@dataclass(frozen=True)
class JostCandidate:
    P1: Poly
    P2: Poly
    c1: float
    c2: float
    nu: int

    @property
    def p(self) -> int:
        return (self.nu + 1) // 2

    def P(self, bg: Background) -> Poly:
        return state_poly_from(bg, self.P1, self.P2)

    def problem(self, bg: Background) -> DirectProblem:
        """A DirectProblem view of the candidate; only index 0 is available."""
        P = self.P(bg)
        data = JostData(
            theta_plus=(self.P1,),
            phi_plus=(self.P2,),
            F=P,
            Fn=(P,),
            c1=self.c1,
            c2=self.c2,
            c3=self.c1 * self.c2,
            kappa=self.nu + bg.q - 1,
            A_p=bg.A(self.p),
            p=self.p,
            nu=self.nu,
        )
        return DirectProblem(bg, None, data, build_regularizers(bg), (self.P1,), (self.P2,))


def candidate_from_jost(data: JostData) -> JostCandidate:
    return JostCandidate(data.theta0, data.phi0, data.c1, data.c2, data.nu)


@dataclass
class CandidateReport:
    states: list
    bound: list
    checks: dict = field(default_factory=dict)


def _vanishes_on_sheet1(z: complex, prob: DirectProblem) -> bool:
    try:
        f1 = jost_f(0, SheetPoint(z, 1), prob.data, prob.bg)
    except JostPole:
        return False
    return abs(f1) <= ON_SHEET_TOL * _local_scale(z, prob, 1)


def validate_candidate(cand: JostCandidate, bg: Background) -> CandidateReport:
    if not bg.bands.all_open:
        raise CandidateRejected("background has a closed gap")
    if not cand.c1 > 0:
        raise CandidateRejected("constant c1 must be positive")
    if cand.c2 == 0:
        raise CandidateRejected("constant c2 must be nonzero")
    nu = cand.nu
    if cand.P2.degree != nu - 1:
        raise CandidateRejected(f"degree of P2 must be nu - 1 = {nu - 1}")
    if cand.P1.degree > theta0_degree_bound(nu) or cand.P1.is_zero():
        raise CandidateRejected(f"degree of P1 must be at most {theta0_degree_bound(nu)}")
    checks = {}
    lead = leading_phi0(cand.c2, bg, cand.p)
    checks["sheet2_leading"] = abs(cand.P2.lead - lead) / abs(lead)
    if checks["sheet2_leading"] > 1e-8:
        raise CandidateRejected("sheet-2 asymptotics: leading coefficient of P2 inconsistent with c2")
    # given the sheet-2 law, f -> c1 A_p on sheet 1 iff P = phi_q f f_- has degree
    # nu + q - 1 and leading coefficient -a0 c1 c2; direct evaluation at large
    # lam cancels catastrophically once nu >= 4
    prob = cand.problem(bg)
    P = prob.data.F
    kappa = nu + bg.q - 1
    lead_P = -bg.a0_wrap * cand.c1 * cand.c2
    checks["sheet1_limit"] = abs(P.lead / lead_P - 1.0) if P.degree == kappa else math.inf
    if checks["sheet1_limit"] > 1e-8:
        raise CandidateRejected("sheet-1 asymptotics: f does not tend to c1 A_p")
    try:
        sts = all_states(prob)
    except AmbiguousClassification as exc:
        raise CandidateRejected(f"zero classification failed: {exc}") from exc
    except RuntimeError as exc:
        raise CandidateRejected(str(exc)) from exc
    for st in sts:
        x = st.lam
        if st.kind == RESONANCE and _vanishes_on_sheet1(x, prob):
            raise CandidateRejected("a zero on the first sheet is not real")
        if st.kind != SIGMA0 and abs(cand.P2(x)) <= 1e-10 * max(1.0, cand.P2.magnitude(x)):
            raise CandidateRejected("condition i: zero of f where P2 vanishes")
        if st.kind in (BOUND, SIGMA0, VIRTUAL) and st.multiplicity != 1:
            raise CandidateRejected("condition iii: multiple zero of P at a bound, virtual or sigma0 point")
    bound = eigenvalues(sts)
    for st in bound:
        if sign_law_value(st, prob) >= 0:
            raise CandidateRejected("condition ii: sign of P' at bound state")
    checks["P_degree"] = P.degree
    return CandidateReport(states=sts, bound=bound, checks=checks)


# ----------------------------------------------------------------------------
# scattering data


@dataclass(frozen=True)
class ScatteringData:
    bg: Background
    prob: DirectProblem = field(repr=False)
    r: tuple
    gaps: tuple
    m: tuple
    c2: float
    c3: float
    nu: int

    def s_hat(self, lam) -> np.ndarray:
        return s_hat_values(lam, self.prob)


def scattering_from_candidate(cand: JostCandidate, bg: Background, report: CandidateReport | None = None) -> ScatteringData:
    report = validate_candidate(cand, bg) if report is None else report
    prob = cand.problem(bg)
    r, gaps, ms = [], [], []
    for st in report.bound:
        x = st.lam.real
        mj = norming_closed_form(x, st.gap_index, prob)
        if not mj > 0:
            raise CandidateRejected("condition violation: norming constant not positive")
        r.append(x)
        gaps.append(st.gap_index)
        ms.append(mj)
    return ScatteringData(bg, prob, tuple(r), tuple(gaps), tuple(ms), cand.c2, cand.c1 * cand.c2, cand.nu)


def s_hat_symmetry(scat: ScatteringData, n: int = 10) -> float:
    """max |S^(lam - i0) - conj S^(lam + i0)| over band samples."""
    worst = 0.0
    for lo, hi in scat.bg.bands.bands:
        xs = np.linspace(lo, hi, n + 2)[1:-1]
        up = scat.s_hat(xs + 0j)
        dn = scat.s_hat(np.array([complex(x, -0.0) for x in xs]))
        worst = max(worst, float(np.max(np.abs(dn - up.conj()))))
    return worst


# ----------------------------------------------------------------------------
# GLM


@dataclass
class GlmSystem:
    Fcal: np.ndarray
    F0: np.ndarray
    nodes: int  # quadrature nodes per band
    vanishing: float  # max |Fcal_{l,m}| over l + m >= nu + 1
    nu: int
    a0_wrap: float = 1.0


def _f0_quadrature(scat: ScatteringData, L: int, nodes: int) -> np.ndarray:
    """Band integral of S^ psi^_l psi^_m / (2 sqrt(Delta^2 - 1)) by the midpoint rule in theta.

    With lam = mid + half cos(theta) the inverse square-root endpoint
    behaviour becomes a smooth periodic integrand.  Only the upper rim is
    sampled; the lower rim contributes the complex conjugate.
    """
    bg = scat.bg
    prob = scat.prob
    th = (np.arange(nodes) + 0.5) * np.pi / nodes
    F0 = np.zeros((L + 1, L + 1))
    for lo, hi in bg.bands.bands:
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        lam = mid + half * np.cos(th) + 0j
        g = reg_values(list(range(L + 1)), lam, prob, +1, perturbed=False)
        w = scat.s_hat(lam) * prob.reg.De2(lam) / (2.0 * sqrt_disc_values(lam, bg.bands.edges))
        w = w * half * np.sin(th) * (np.pi / nodes)
        F0 -= np.imag((g * w) @ g.T) / np.pi
    return F0


def _bound_terms(scat: ScatteringData, L: int) -> np.ndarray:
    out = np.zeros((L + 1, L + 1))
    for x, mj in zip(scat.r, scat.m):
        g = reg_values(list(range(L + 1)), complex(x, 0.0), scat.prob, +1, perturbed=False)[:, 0].real
        e2 = abs(float(np.real(scat.prob.reg.De2(x))))
        out += e2 * np.outer(g, g) / mj
    return out


def glm_kernel(scat: ScatteringData, L: int | None = None, gate: float = 1e-8, n_start: int = 64, n_max: int = 1 << 17) -> GlmSystem:
    nu = scat.nu
    L = max(nu + 2, 2 * ((nu + 1) // 2) + 2) if L is None else L
    if L < nu + 2:
        raise ValueError("L must be at least nu + 2")
    B = _bound_terms(scat, L)
    idx = [(l, m) for l in range(L + 1) for m in range(L + 1) if l + m >= nu + 1]
    prev = None
    nodes = n_start
    while nodes <= n_max:
        F0 = _f0_quadrature(scat, L, nodes)
        Fcal = F0 + B
        Fcal = 0.5 * (Fcal + Fcal.T)
        van = max(abs(Fcal[l, m]) for l, m in idx)
        drift = np.inf if prev is None else float(np.max(np.abs(Fcal - prev)))
        if van < gate and drift < gate:
            return GlmSystem(Fcal, F0, nodes, van, nu, scat.bg.a0_wrap)
        prev = Fcal
        nodes *= 2
    raise InverseGateError(f"quadrature not converged (vanishing residual {van:.3e})")


def glm_solve(sys: GlmSystem) -> np.ndarray:
    """K(n, m) for 0 <= n <= m <= L.

    For each n the off-diagonal equations give K(n, m)/K(n, n) and the
    diagonal relation fixes K(n, n) > 0.  The diagonal relation is used for
    n >= 1 only; K(0, 0) = K(1, 1) because a_0 is not perturbed.
    """
    F = sys.Fcal
    L = F.shape[0] - 1
    K = np.zeros((L + 1, L + 1))
    for n in range(L, -1, -1):
        idx = list(range(n + 1, L + 1))
        if idx:
            A = np.eye(len(idx)) + F[np.ix_(idx, idx)].T
            try:
                k = np.linalg.solve(A, -F[n, idx])
            except np.linalg.LinAlgError as exc:
                raise InverseGateError("GLM solvability violated") from exc
            if np.linalg.cond(A) > 1e12:
                raise InverseGateError("GLM solvability violated")
        else:
            k = np.zeros(0)
        if n >= 1:
            d = 1.0 + F[n, n] + (float(np.dot(k, F[idx, n])) if idx else 0.0)
            if not d > 0:
                raise InverseGateError("GLM solvability violated: no positive diagonal root")
            knn = 1.0 / math.sqrt(d)
        else:
            knn = K[1, 1]
        K[n, n] = knn
        if idx:
            K[n, idx] = k * knn
    return K


@dataclass(frozen=True)
class Recovered:
    p: int
    u: tuple
    v: tuple
    nu: int
    a: tuple = ()
    b: tuple = ()


def _trim(bg: Background, a: np.ndarray, b: np.ndarray, tol: float) -> Recovered:
    n_all = len(a)
    u = np.array([a[n - 1] - bg.a_at(n) for n in range(1, n_all + 1)])
    v = np.array([b[n - 1] - bg.b_at(n) for n in range(1, n_all + 1)])
    if np.any(a <= 0):
        raise InverseGateError("reconstruction positivity failure")
    p = n_all
    while p > 0 and abs(u[p - 1]) < tol and abs(v[p - 1]) < tol:
        p -= 1
    u, v = u[:p], v[:p]
    if p == 0:
        return Recovered(0, (), (), 0, (), ())
    nu = 2 * p if abs(u[-1]) >= tol else 2 * p - 1
    if nu == 2 * p - 1:
        u[-1] = 0.0
    return Recovered(p, tuple(float(x) for x in u), tuple(float(x) for x in v), nu, tuple(a[:p]), tuple(b[:p]))


def recover_coefficients(K: np.ndarray, bg: Background, tol: float = 1e-7) -> Recovered:
    """a_n = a^0_n K(n+1,n+1)/K(n,n); b_n from the first off-diagonal of K."""
    L = K.shape[0] - 1
    a, b = [], []
    for n in range(1, L):
        a.append(bg.a_at(n) * K[n + 1, n + 1] / K[n, n])
        b.append(bg.b_at(n) + bg.a_at(n) * K[n, n + 1] / K[n, n] - bg.a_at(n - 1) * K[n - 1, n] / K[n - 1, n - 1])
    return _trim(bg, np.array(a), np.array(b), tol)


def glm_reconstruct(cand: JostCandidate, bg: Background, gate: float = 1e-8) -> tuple[Recovered, GlmSystem, np.ndarray]:
    scat = scattering_from_candidate(cand, bg)
    sys = glm_kernel(scat, gate=gate)
    K = glm_solve(sys)
    return recover_coefficients(K, bg), sys, K


# ----------------------------------------------------------------------------
# spectral-measure route


@dataclass
class SpectralMeasure:
    nodes: np.ndarray
    weights: np.ndarray
    total_mass: float


def spectral_measure(cand: JostCandidate, bg: Background, nodes: int = 512, report: CandidateReport | None = None) -> SpectralMeasure:
    """Discretized spectral measure of e_1 for the operator whose Jost function is ``cand``.

    Band density i s / (pi a0 phi_q |f|^2) on the upper rim; point masses
    4 s^2 / (a0^2 hat f_-^2 m_j) at the eigenvalues.
    """
    report = validate_candidate(cand, bg) if report is None else report
    prob = cand.problem(bg)
    a0 = bg.a0_wrap
    th = (np.arange(nodes) + 0.5) * np.pi / nodes
    xs, ws = [], []
    for lo, hi in bg.bands.bands:
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        lam = mid + half * np.cos(th) + 0j
        s = sqrt_disc_values(lam, bg.bands.edges)
        # phi_q |f|^2 = a0 De2 (D-/D+) |D+ f|^2 keeps the density pole-free
        gp = reg_values([0], lam, prob, +1)[0]
        reg = prob.reg
        dens = np.real(1j * s) / (np.pi * a0 * a0 * np.real(reg.De2(lam) * reg.Dm(lam) / reg.Dp(lam)) * np.abs(gp) ** 2)
        xs.append(lam.real)
        ws.append(dens * half * np.sin(th) * np.pi / nodes)
    for st in report.bound:
        x = st.lam.real
        mj = norming_closed_form(x, st.gap_index, prob)
        fm = hat_f(0, x, prob, -1).real
        s = sqrt_disc(SheetPoint(x), bg).real
        xs.append(np.array([x]))
        ws.append(np.array([4.0 * s * s / (a0 * a0 * fm * fm * mj)]))
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    return SpectralMeasure(x, w, float(np.sum(w)))


def lanczos_coefficients(meas: SpectralMeasure, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi coefficients (a_1..a_steps, b_1..b_steps) of a discrete measure (Stieltjes procedure)."""
    x, w = meas.nodes, meas.weights / meas.total_mass
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    a, b = [], []
    a_prev = 0.0
    for _ in range(steps):
        nrm = np.sum(w * p * p)
        bn = np.sum(w * x * p * p) / nrm
        nxt = (x - bn) * p - a_prev * p_prev
        # one reorthogonalization pass against p and p_prev
        nxt -= np.sum(w * nxt * p) / nrm * p
        an = math.sqrt(np.sum(w * nxt * nxt) / nrm)
        nxt /= an
        a.append(an)
        b.append(bn)
        p_prev, p = p, nxt
        a_prev = an
    return np.array(a), np.array(b)


def spectral_reconstruct(cand: JostCandidate, bg: Background, tol: float = 1e-7, mass_gate: float = 1e-8) -> tuple[Recovered, SpectralMeasure]:
    steps = cand.p + 2
    report = validate_candidate(cand, bg)
    prev = None
    nodes = 256
    while nodes <= 1 << 16:
        meas = spectral_measure(cand, bg, nodes, report)
        a, b = lanczos_coefficients(meas, steps)
        if prev is not None and abs(meas.total_mass - 1.0) < mass_gate and np.max(np.abs(np.concatenate([a, b]) - prev)) < mass_gate:
            return _trim(bg, a[:-1], b[:-1], tol), meas
        prev = np.concatenate([a, b])
        nodes *= 2
    raise InverseGateError(f"spectral measure not converged (mass {meas.total_mass!r})")


# ----------------------------------------------------------------------------
# interpolation routes


@dataclass
class InterpolationResult:
    candidate: JostCandidate
    sigma1: list
    sigma2: list
    excluded: list
    residual: float
    searched: bool = False


def _constants_from(F: Poly, phi0: Poly, bg: Background) -> tuple[float, float, int, int]:
    nu = phi0.degree + 1
    p = (nu + 1) // 2
    a0 = bg.a0_wrap
    c3 = -F.lead / a0
    c2 = -phi0.lead * bg.A(p) / a0
    return c3 / c2, c2, nu, p


def reconstruct_interpolation(F: Poly, phi0: Poly, bg: Background, tol: float = 1e-8) -> InterpolationResult:
    """theta_0^+ from the zeros of F: theta = -m_+ phi0 at bound-like zeros, -m_- phi0 at the others."""
    if not bg.bands.all_open:
        raise CandidateRejected("background has a closed gap")
    if phi0.is_zero():
        raise CandidateRejected("phi0 must be nonzero")
    rs = roots(F)
    if any(m > 1 for _, m in rs):
        raise InverseGateError("F has multiple zeros")
    c1, c2, nu, p = _constants_from(F, phi0, bg)
    if not c1 > 0:
        raise CandidateRejected("sign law: c1 = c3 / c2 read off F and phi0 is not positive")
    deg = theta0_degree_bound(nu)
    Fd = F.derivative()
    reg = build_regularizers(bg)
    sig1, sig2, excluded, ambiguous = [], [], [], []
    for z, _ in rs:
        if abs(phi0(z)) <= 1e-9 * max(1.0, phi0.magnitude(z)):
            excluded.append(z)  # sigma0 point: the node equation degenerates
            continue
        if z.imag != 0.0:
            sig2.append(z)
            continue
        x = z.real
        kind, j = bg.bands.locate(x)
        if kind == "edge" and not any(abs(x - mu) <= 1e-8 * (1 + abs(mu)) for mu in bg.bands.mu):
            sig2.append(z)  # m_+ = m_- at an edge, either branch gives the node value
            continue
        if kind != "gap":
            excluded.append(z)
            continue
        bound_like = (-1) ** (bg.q - j) * Fd(x) < 0
        near = lambda pts: any(abs(x - mu) <= 1e-8 * (1 + abs(mu)) for mu in pts)
        if bound_like and not near(reg.Mp):
            sig1.append(z)
            ambiguous.append(z)
        elif not bound_like and not near(reg.Mm + reg.Me):
            sig2.append(z)
        else:
            excluded.append(z)

    def build(s1, s2):
        pts = []
        for z in s1:
            pts.append((z, -m_branch(SheetPoint(z), bg, +1) * phi0(z)))
        for z in s2:
            pts.append((z, -m_branch(SheetPoint(z), bg, -1) * phi0(z)))
        return interpolate(pts, deg, tol=tol)

    if len(sig1) + len(sig2) < deg + 1:
        raise InverseGateError("insufficient data")
    searched = False
    try:
        P1, res = build(sig1, sig2)
    except PolyError:
        # the sign law is only necessary for bound states: try every split of the real bound-like nodes
        searched = True
        P1 = None
        for k in range(1, len(ambiguous) + 1):
            for moved in itertools.combinations(ambiguous, k):
                s1 = [z for z in sig1 if z not in moved]
                s2 = sig2 + list(moved)
                try:
                    P1, res = build(s1, s2)
                    sig1, sig2 = s1, s2
                    break
                except PolyError:
                    continue
            if P1 is not None:
                break
        if P1 is None:
            raise InverseGateError("interpolation residual: no consistent node assignment")
    cand = JostCandidate(P1, phi0, c1, c2, nu)
    return InterpolationResult(cand, sig1, sig2, excluded, res, searched)


def s1_gate(zeros: RootSet, bg: Background) -> tuple[bool, list, list]:
    """Separation condition: no zero of S - 1 on the Dirichlet or edge sets, except points on both."""
    on_mu, on_e = [], []
    ok = True
    for z, _ in zeros:
        dm = _dirichlet_index(z, bg, 1e-7) is not None
        de = _near_edge(z, bg) is not None
        on_mu.append(dm)
        on_e.append(de)
        if dm != de:
            ok = False
    return ok, on_mu, on_e


def phi0_from_s1_zeros(zeros: RootSet, c2: float, bg: Background) -> Poly:
    nu = zeros.total + 1
    p = (nu + 1) // 2
    return Poly.from_roots(list(zeros.expanded()), lead=leading_phi0(c2, bg, p))


def reconstruct_from_s1_zeros(F: Poly, zeros: RootSet, c2: float, bg: Background, tol: float = 1e-8) -> InterpolationResult:
    ok, on_mu, on_e = s1_gate(zeros, bg)
    if not ok:
        raise InverseGateError("exceptional-set collision: Zeros(S-1) != Zeros(phi0)")
    phi0 = phi0_from_s1_zeros(zeros, c2, bg)
    return reconstruct_interpolation(F, phi0, bg, tol)


def F_from_states(projections, c3: float, bg: Background) -> Poly:
    """F = -a0 c3 prod (lam - r_j) over the projections of all states."""
    return Poly.from_roots(list(projections), lead=-bg.a0_wrap * c3)
