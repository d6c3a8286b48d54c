"""Classification of the zeros of the state polynomial F on the two-sheeted surface.

Also: regularized Jost values, the S-matrix, zeros of S - 1, norming
constants (two independent routes) and resolvent entries.

Regularization.  The Dirichlet points split into M+ (poles of m_+ on sheet 1,
i.e. bound states of the background), M- (poles of m_-) and M_e (Dirichlet
points on band edges).  With D+- = prod (lam - mu) over M+- and
De2 = prod (lam - mu) over M_e, phi_q = a0 * De2 * D+ * D-, and

    g^+-_n = D+- * f^+-_n = D+- theta_n + B+- phi_n

is analytic away from M_e.  Point values of the regularized functions use
|De2|^(1/2) as the edge factor so that norming constants come out positive;
products of two regularized functions use the analytic De2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .background import (
    Background,
    SheetPoint,
    DirichletPole,
    classify_j0_states,
    floquet_multipliers,
    fundamental_solutions,
    m_branch,
    sqrt_disc,
    sqrt_disc_values,
)
from .jost import JostData, JostPole, Perturbation, jost_f, jost_polys
from .poly import Poly, RootSet, roots

BOUND = "bound"
ANTIBOUND = "antibound"
RESONANCE = "resonance"
VIRTUAL = "virtual"
SIGMA0 = "sigma0"

ON_SHEET_TOL = 1e-7
OFF_SHEET_TOL = 1e-4
ROOT_TOL = 1e-8


class AmbiguousClassification(RuntimeError):
    pass


class NormingInconsistency(RuntimeError):
    pass


class SignLawWarning(UserWarning):
    pass


@dataclass(frozen=True)
class State:
    lam: complex
    sheet: int
    kind: str
    multiplicity: int = 1
    gap_index: Optional[int] = None
    edge_index: Optional[int] = None

    @property
    def point(self) -> SheetPoint:
        return SheetPoint(self.lam, self.sheet)

    @property
    def is_eigenvalue(self) -> bool:
        """Sheet-1 states are eigenvalues of the perturbed operator."""
        return self.sheet == 1 and self.kind in (BOUND, SIGMA0)


@dataclass(frozen=True)
class Regularizers:
    Mp: tuple
    Mm: tuple
    Me: tuple
    Dp: Poly
    Dm: Poly
    De2: Poly

    def D(self, sign: int) -> Poly:
        return self.Dp if sign > 0 else self.Dm


def build_regularizers(bg: Background) -> Regularizers:
    Mp, Mm, Me = [], [], []
    for mu, kind, _ in classify_j0_states(bg):
        {"bound": Mp, "antibound": Mm, "virtual": Me}[kind].append(mu)
    # closed gaps: the Dirichlet point sits on the merged edge and is a square-root point
    for j in range(1, bg.q):
        if bg.bands.closed[j - 1]:
            Me.append(float(bg.bands.mu[j - 1]))
    return Regularizers(
        Mp=tuple(Mp),
        Mm=tuple(Mm),
        Me=tuple(Me),
        Dp=Poly.from_roots(Mp),
        Dm=Poly.from_roots(Mm),
        De2=Poly.from_roots(Me),
    )


@dataclass(frozen=True)
class DirectProblem:
    """Background, perturbation and everything derived from them."""

    bg: Background
    pert: Perturbation
    data: JostData
    reg: Regularizers
    theta_ext: tuple = field(repr=False)  # perturbed theta^+_n for n = 0..p+q+1
    phi_ext: tuple = field(repr=False)

    @property
    def n_poly(self) -> int:
        return len(self.theta_ext)


def direct_problem(bg: Background, pert: Perturbation) -> DirectProblem:
    data = jost_polys(bg, pert)
    th, ph = fundamental_solutions(bg.q, bg.a0, bg.b0, pert.p + bg.q + 1)
    theta_ext = tuple(data.theta_plus) + tuple(th[pert.p + 3 :])
    phi_ext = tuple(data.phi_plus) + tuple(ph[pert.p + 3 :])
    return DirectProblem(bg, pert, data, build_regularizers(bg), theta_ext, phi_ext)


# ----------------------------------------------------------------------------
# regularized Jost / Bloch values


def reg_coefficients(lam, bg: Background, reg: Regularizers, sign: int, sheet: int = 1):
    """(A, B) with D^sign f^sign_n = A theta^+_n + B phi^+_n, pole-free off M_e."""
    lam = np.asarray(lam, dtype=complex)
    s = sign * sqrt_disc_values(lam, bg.bands.edges, sheet)
    ph = bg.phi_half(lam)
    num = ph + s
    den = ph - s
    A = reg.D(sign)(lam) + 0j
    use_num = np.abs(num) >= np.abs(den)
    with np.errstate(divide="ignore", invalid="ignore"):
        b1 = num / (bg.a0_wrap * reg.De2(lam) * reg.D(-sign)(lam))
        b2 = -A * bg.theta_q1(lam) / den
    B = np.where(use_num, b1, b2)
    return A, B


def reg_values(ns, lam, prob: DirectProblem, sign: int = 1, sheet: int = 1, perturbed: bool = True):
    """g^sign_n(lam) = D^sign f^sign_n for each n in ``ns`` (rows) and each lam (columns).

    ``perturbed=False`` gives the background Bloch solutions D^sign psi^sign_n.
    Indices past the polynomial range are continued by the Floquet multiplier.
    """
    bg = prob.bg
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    A, B = reg_coefficients(lam, bg, prob.reg, sign, sheet)
    if perturbed:
        th, ph = prob.theta_ext, prob.phi_ext
    else:
        th, ph = fundamental_solutions(bg.q, bg.a0, bg.b0, bg.q + 1)
    d = bg.delta(lam)
    xi = d + sign * sqrt_disc_values(lam, bg.bands.edges, sheet)
    out = np.empty((len(ns), lam.size), dtype=complex)
    # the last q polynomial indices lie past the perturbation, where the Bloch relation holds
    first = len(th) - bg.q
    for i, n in enumerate(ns):
        if n < len(th):
            out[i] = A * th[n](lam) + B * ph[n](lam)
        else:
            if first < 0:
                raise ValueError("no Bloch continuation available for this index")
            k = (n - first) // bg.q
            r = n - k * bg.q
            out[i] = (A * th[r](lam) + B * ph[r](lam)) * xi**k
    return out


def edge_factor(lam: float, reg: Regularizers) -> float:
    """|De2(lam)|^(1/2): the positive edge regularizer at a real point."""
    return math.sqrt(abs(float(np.real(reg.De2(lam)))))


def hat_f(n: int, lam: float, prob: DirectProblem, sign: int = 1) -> float | complex:
    """Regularized Jost value De D^sign f^sign_n at a real point off the bands."""
    g = reg_values([n], complex(lam, 0.0), prob, sign)[0, 0]
    return edge_factor(lam, prob.reg) * g


# ----------------------------------------------------------------------------
# classification


def _local_scale(lam: complex, prob: DirectProblem, sheet: int) -> float:
    d = prob.data
    try:
        m = m_branch(SheetPoint(lam, 1), prob.bg, +1 if sheet == 1 else -1)
    except DirichletPole:
        return math.inf
    return abs(d.theta0(lam)) + abs(m * d.phi0(lam)) + 1e-300


def _near_edge(lam: complex, bg: Background) -> Optional[int]:
    for k, e in enumerate(bg.bands.edges):
        if abs(lam - e) <= 1e-8 * (1.0 + abs(lam)):
            return k
    return None


def _dirichlet_index(lam: complex, bg: Background, tol: float = 1e-8) -> Optional[int]:
    for j, mu in enumerate(bg.bands.mu, start=1):
        if abs(lam - mu) <= tol * (1.0 + abs(mu)):
            return j
    return None


def _edge_gap(k: int, q: int) -> int:
    """Gap adjacent to edge k: lam_0^+ borders gap 0, lam_q^- borders gap q."""
    return (k + 1) // 2


def _sqrt_fit_ok(edge: float, k: int, prob: DirectProblem) -> bool:
    """f_0^+ ~ C sqrt(eps) on the gap side of the edge."""
    side = -1.0 if k % 2 == 0 else 1.0
    eps = 1e-6 * max(1.0, prob.bg.bands.scale)
    try:
        f1 = abs(jost_f(0, SheetPoint(edge + side * eps), prob.data, prob.bg))
        f4 = abs(jost_f(0, SheetPoint(edge + side * 4 * eps), prob.data, prob.bg))
    except JostPole:
        return False
    if f1 == 0.0:
        return False
    return 1.7 < f4 / f1 < 2.3


def classify_projection(lam: complex, mult: int, prob: DirectProblem) -> State:
    bg, data = prob.bg, prob.data
    lam = complex(lam)
    # (a) band edge
    k = _near_edge(lam, bg)
    if k is not None:
        edge = float(bg.bands.edges[k])
        on_mu = _dirichlet_index(edge, bg, 1e-7)
        phi0_zero = abs(data.phi0(edge)) <= 1e-8 * max(1.0, data.phi0.magnitude(edge))
        if (on_mu is not None and phi0_zero) or _sqrt_fit_ok(edge, k, prob):
            return State(complex(edge, 0.0), 1, VIRTUAL, mult, _edge_gap(k, bg.q), k)
    # (b) Dirichlet point with phi_0^+ = 0
    j = _dirichlet_index(lam, bg)
    if j is not None and abs(data.phi0(lam)) <= 1e-8 * max(1.0, data.phi0.magnitude(lam)):
        mu = float(bg.bands.mu[j - 1])
        kinds = {m: kd for m, kd, _ in classify_j0_states(bg)}
        sheet = 1 if kinds.get(mu) == "bound" else 2
        return State(complex(mu, 0.0), sheet, SIGMA0, mult, j)
    # (c) real point
    if lam.imag == 0.0:
        x = lam.real
        kind, gi = bg.bands.locate(x, tol=0.0)
        if kind != "gap":
            raise AmbiguousClassification(f"root {x!r} lies on the spectrum of the background ({kind} {gi})")
        vals = {}
        for sheet in (1, 2):
            try:
                f = jost_f(0, SheetPoint(x, sheet), data, bg)
                vals[sheet] = abs(f) / _local_scale(x, prob, sheet)
            except JostPole:
                vals[sheet] = math.inf
        if vals[1] < ON_SHEET_TOL and vals[2] > OFF_SHEET_TOL:
            st = State(complex(x, 0.0), 1, BOUND, mult, gi)
            sign_law_check(st, prob)
            return st
        if vals[2] < ON_SHEET_TOL and vals[1] > OFF_SHEET_TOL:
            return State(complex(x, 0.0), 2, ANTIBOUND, mult, gi)
        raise AmbiguousClassification(
            f"ambiguous classification at {x!r}: |f0| sheet1={vals[1]:.3e}, sheet2={vals[2]:.3e}"
        )
    # (d) non-real
    return State(lam, 2, RESONANCE, mult)


def sign_law_value(st: State, prob: DirectProblem) -> float:
    """(-1)^(q-j) F'(r); negative at every bound state."""
    q = prob.bg.q
    return (-1) ** (q - st.gap_index) * float(prob.data.F.derivative()(st.lam.real))


def sign_law_check(st: State, prob: DirectProblem) -> bool:
    ok = sign_law_value(st, prob) < 0
    if not ok:
        warnings.warn(f"sign law violated at bound state {st.lam.real!r}", SignLawWarning)
    return ok


def all_states(prob: DirectProblem, tol: float = ROOT_TOL) -> list[State]:
    F = prob.data.F
    rs = roots(F)
    out = []
    for z, m in rs:
        if abs(F(z)) > tol * max(F.magnitude(z), 1e-300):
            raise RuntimeError(f"root refinement failed at {z!r}")
        out.append(classify_projection(z, m, prob))
    total = sum(s.multiplicity for s in out)
    if total != prob.data.kappa:
        raise RuntimeError(f"state count {total} differs from deg F = {prob.data.kappa}")
    out.sort(key=lambda s: (s.sheet, s.lam.real, s.lam.imag))
    return out


def eigenvalues(states: list[State]) -> list[State]:
    """Sheet-1 states (bound states and sheet-1 sigma0 states), ascending."""
    return sorted([s for s in states if s.is_eigenvalue], key=lambda s: s.lam.real)


def gap_closure_counts(states: list[State], bg: Background) -> dict[int, int]:
    """Number of states (with multiplicity) whose projection lies in each finite gap closure."""
    counts = {}
    for j in range(1, bg.q):
        lo, hi = bg.bands.gap(j)
        tol = 1e-8 * (1 + max(abs(lo), abs(hi)))
        counts[j] = sum(
            s.multiplicity for s in states if s.lam.imag == 0.0 and lo - tol <= s.lam.real <= hi + tol
        )
    return counts


# ----------------------------------------------------------------------------
# S-matrix


def s_matrix(pt: SheetPoint, prob: DirectProblem) -> complex:
    """S = f_0^- / f_0^+ on the sheet of ``pt`` (the two Jost functions swap on sheet 2)."""
    try:
        fp = jost_f(0, pt, prob.data, prob.bg)
        fm = jost_f(0, pt.other(), prob.data, prob.bg)
    except JostPole as exc:
        raise ZeroDivisionError("evaluation at a state") from exc
    if abs(fp) <= 1e-13 * _local_scale(pt.lam, prob, pt.sheet):
        raise ZeroDivisionError("evaluation at a state")
    return fm / fp


def s_hat_values(lam, prob: DirectProblem, sheet: int = 1):
    """Regularized S-matrix D^- f^- / (D^+ f^+), vectorised."""
    gp = reg_values([0], lam, prob, +1, sheet)[0]
    gm = reg_values([0], lam, prob, -1, sheet)[0]
    return gm / gp


@dataclass(frozen=True)
class S1Zeros:
    zeros: RootSet
    on_dirichlet: tuple
    on_edge: tuple
    flag: bool


def zeros_S_minus_1(prob: DirectProblem) -> S1Zeros:
    """Zeros of phi_0^+ with the separation flag: True iff none lies on the Dirichlet
    or edge sets, except points belonging to both."""
    bg = prob.bg
    phi0 = prob.data.phi0
    if phi0.degree < 1:
        return S1Zeros(RootSet(()), (), (), True)
    rs = roots(phi0)
    on_mu, on_e = [], []
    ok = True
    for z, _ in rs:
        dm = _dirichlet_index(z, bg, 1e-7) is not None
        de = _near_edge(z, bg) is not None
        on_mu.append(dm)
        on_e.append(de)
        if (dm or de) and not (dm and de):
            ok = False
    return S1Zeros(rs, tuple(on_mu), tuple(on_e), ok)


# ----------------------------------------------------------------------------
# norming constants


@dataclass(frozen=True)
class Norming:
    r: float
    gap_index: int
    series: float
    closed_form: float
    terms: int

    @property
    def rel_diff(self) -> float:
        return abs(self.series - self.closed_form) / abs(self.closed_form)


def norming_series(r: float, prob: DirectProblem, tail_tol: float = 1e-12, max_terms: int = 100000) -> tuple[float, int]:
    """sum_k hat f_k^+(r)^2, summed until the geometric tail bound drops below tail_tol."""
    bg = prob.bg
    q = bg.q
    e2 = abs(float(np.real(prob.reg.De2(r))))
    xi_s = floquet_multipliers(SheetPoint(r), bg)[0].real
    xi = abs(xi_s)
    if xi >= 1.0:
        raise NormingInconsistency(f"{r!r} is not in a gap")
    n_first = prob.pert.p + 1 + q
    g = reg_values(list(range(n_first)), complex(r, 0.0), prob, +1)[:, 0].real
    total = float(np.sum(g * g))
    last = g[-q:].copy()
    n = n_first
    while n < max_terms:
        last = last * xi_s
        block = float(np.sum(last * last))
        total += block
        n += q
        tail = block * xi * xi / (1.0 - xi * xi)
        if tail < tail_tol * total:
            break
    return e2 * total, n


def norming_closed_form(r: float, gap: int, prob: DirectProblem) -> float:
    """F'(r) / (a0 hat f_0^-(r)^2) * (-1)^(q-k+1) * 2 sinh(q h(r))."""
    bg = prob.bg
    q = bg.q
    fm = hat_f(0, r, prob, -1).real
    sinh_qh = abs(sqrt_disc(SheetPoint(r), bg))
    Fd = float(prob.data.F.derivative()(r))
    return Fd / (bg.a0_wrap * fm * fm) * (-1) ** (q - gap + 1) * 2.0 * sinh_qh


def norming_constants(states: list[State], prob: DirectProblem, rtol: float = 1e-6) -> list[Norming]:
    out = []
    for st in eigenvalues(states):
        r = st.lam.real
        a, nterms = norming_series(r, prob)
        b = norming_closed_form(r, st.gap_index, prob)
        nm = Norming(r, st.gap_index, a, b, nterms)
        if not (a > 0 and b > 0) or nm.rel_diff > rtol:
            raise NormingInconsistency(f"norming inconsistency at {r!r}: series {a!r} vs closed form {b!r}")
        out.append(nm)
    return out


# ----------------------------------------------------------------------------
# resolvent


def phi_big(pert: Perturbation, bg: Background, lam: complex, n_max: int) -> np.ndarray:
    """Phi_n for n = 0..n_max: the perturbed solution with Phi_0 = 0, Phi_1 = 1."""
    out = np.zeros(n_max + 1, dtype=complex)
    if n_max >= 1:
        out[1] = 1.0
    for n in range(1, n_max):
        out[n + 1] = ((lam - pert.b_at(n, bg)) * out[n] - pert.a_at(n - 1, bg) * out[n - 1]) / pert.a_at(n, bg)
    return out


def resolvent_entry(m: int, n: int, pt: SheetPoint, prob: DirectProblem) -> complex:
    """<e_m, (J - lam)^{-1} e_n> for m, n >= 1, continued to the sheet of ``pt``."""
    if m > n:
        m, n = n, m
    bg, data = prob.bg, prob.data
    try:
        f0 = jost_f(0, pt, data, bg)
        fn = jost_f(n, pt, data, bg)
    except JostPole as exc:
        raise ZeroDivisionError("pole") from exc
    if f0 == 0:
        raise ZeroDivisionError("pole")
    Phi = phi_big(prob.pert, bg, pt.lam, m)
    # sign fixed against a dense solve of (J - lam) x = e_n
    return -Phi[m] * fn / (bg.a0_wrap * f0)
