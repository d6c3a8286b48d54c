"""Brute-force checks that do not go through the state polynomial.

* finite sections of the perturbed Jacobi matrix, diagonalised by an in-repo
  implicit-shift QL iteration;
* least-squares recovery of the transformation kernel from band samples;
* a battery of algebraic identities evaluated at random points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

from .background import (
    Background,
    SheetPoint,
    floquet_multipliers,
    m_branch,
    quasimomentum,
    sqrt_disc,
)
from .jost import Perturbation
from .states import DirectProblem, reg_values, s_matrix


class QLError(RuntimeError):
    pass


@njit(cache=True)
def _tqli(d, e, max_iter):
    """Eigenvalues of a symmetric tridiagonal matrix by implicit QL with Wilkinson shifts.

    d: diagonal (n), e: sub-diagonal in e[1:] (e[0] unused).  Returns status.
    """
    n = d.shape[0]
    for i in range(1, n):
        e[i - 1] = e[i]
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 2.2e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > max_iter:
                return 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


def tridiag_eigenvalues(diag, offdiag, max_iter: int = 60) -> np.ndarray:
    """Sorted eigenvalues of the symmetric tridiagonal matrix (diag, offdiag)."""
    d = np.array(diag, dtype=float)
    e = np.zeros_like(d)
    e[1:] = np.asarray(offdiag, dtype=float)
    status = _tqli(d, e, max_iter)
    if status != 0:
        raise QLError("QL iteration did not converge")
    return np.sort(d)


@dataclass(frozen=True)
class FiniteSection:
    N: int
    diag: np.ndarray
    offdiag: np.ndarray


def finite_section(bg: Background, pert: Perturbation, N: int) -> FiniteSection:
    diag = np.array([pert.b_at(n, bg) for n in range(1, N + 1)])
    off = np.array([pert.a_at(n, bg) for n in range(1, N)])
    return FiniteSection(N, diag, off)


def _inverse_iteration(sec: FiniteSection, lam: float, iters: int = 3) -> np.ndarray:
    N = sec.N
    shift = lam + 1e-10 * max(1.0, abs(lam))
    ab = np.zeros((3, N))
    ab[0, 1:] = sec.offdiag
    ab[1] = sec.diag - shift
    ab[2, :-1] = sec.offdiag
    x = np.ones(N) / math.sqrt(N)
    for _ in range(iters):
        x = solve_banded((1, 1), ab, x)
        x /= np.linalg.norm(x)
    return x


def _off_spectrum(x: float, bg: Background, margin: float) -> bool:
    kind, _ = bg.bands.locate(x, tol=0.0)
    if kind != "gap":
        return False
    return all(abs(x - e) > margin for e in bg.bands.edges)


@dataclass
class SectionSpectrum:
    N: int
    eigenvalues: np.ndarray  # full spectrum of the N-section
    candidates: np.ndarray  # eigenvalues off the background spectrum
    stable: np.ndarray  # candidates reproduced at 2N
    accepted: np.ndarray  # stable and localized at the left end


def finite_section_spectrum(
    bg: Background, pert: Perturbation, N: int = 2000, stab_tol: float = 1e-8, loc_frac: float = 0.5
) -> SectionSpectrum:
    """Bound-state estimates from the N x N truncation.

    A gap eigenvalue is kept when the 2N truncation reproduces it within
    ``stab_tol`` and its eigenvector carries almost all of its weight in the
    left ``loc_frac`` of the section (the right end hosts truncation states).
    """
    if N < 10 * bg.q * pert.p or N % bg.q:
        raise ValueError("N must be a multiple of q and at least 10 q p")
    sec = finite_section(bg, pert, N)
    ev = tridiag_eigenvalues(sec.diag, sec.offdiag)
    sec2 = finite_section(bg, pert, 2 * N)
    ev2 = tridiag_eigenvalues(sec2.diag, sec2.offdiag)
    margin = 1e-9 * bg.bands.scale
    cand = np.array([x for x in ev if _off_spectrum(x, bg, margin)])
    cand2 = np.array([x for x in ev2 if _off_spectrum(x, bg, margin)])
    stable = np.array([x for x in cand if cand2.size and np.min(np.abs(cand2 - x)) < stab_tol])
    accepted = []
    cut = int(loc_frac * N)
    for x in stable:
        vec = _inverse_iteration(sec, x)
        if np.sum(vec[:cut] ** 2) > 1.0 - 1e-8:
            accepted.append(x)
    return SectionSpectrum(N, ev, cand, stable, np.array(accepted))


def resolvable(r: float, bg: Background, N: int, tol: float = 1e-10) -> bool:
    """Whether a bound state at ``r`` decays enough over N sites to be seen by a section."""
    xi = abs(floquet_multipliers(SheetPoint(r), bg)[0])
    return xi ** (N / bg.q) < tol


# ----------------------------------------------------------------------------
# transformation kernel


@dataclass
class KernelFit:
    K: np.ndarray  # K[n, m], n, m = 0..L
    residual: float


def band_samples(bg: Background, per_band: int, margin_frac: float = 1e-3) -> np.ndarray:
    """Interior band points on both rims, kept away from edges."""
    pts = []
    for lo, hi in bg.bands.bands:
        w = hi - lo
        xs = np.linspace(lo + margin_frac * w + 0.05 * w, hi - margin_frac * w - 0.05 * w, per_band)
        xs = xs + 0.013 * w * np.sin(np.arange(per_band))  # break symmetric placement
        for x in xs:
            pts.append(complex(x, 0.0))
            pts.append(complex(x, -0.0))
    return np.array(pts)


def k_kernel_least_squares(prob: DirectProblem, L: int | None = None, tol: float = 1e-7) -> KernelFit:
    """K(n, m) from f_n^+ = sum_{m >= n} K(n, m) psi_m^+ sampled on the bands."""
    bg = prob.bg
    nu = prob.pert.nu
    L = nu + 2 if L is None else L
    M = max(L, nu + 1)
    per_band = max(3 * (nu + 2), 12)
    lam = band_samples(bg, per_band)
    # regularized values share the same D^+ factor, which cancels in the expansion
    psi = reg_values(list(range(M + 1)), lam, prob, +1, perturbed=False)
    f = reg_values(list(range(L + 1)), lam, prob, +1, perturbed=True)
    K = np.zeros((L + 1, M + 1))
    worst = 0.0
    for n in range(L + 1):
        cols = list(range(n, M + 1))
        A = psi[cols].T
        Ar = np.vstack([A.real, A.imag])
        br = np.concatenate([f[n].real, f[n].imag])
        coef, *_ = np.linalg.lstsq(Ar, br, rcond=None)
        res = np.max(np.abs(Ar @ coef - br)) / max(np.max(np.abs(br)), 1e-300)
        worst = max(worst, float(res))
        K[n, n:] = coef
    if worst > tol:
        raise RuntimeError(f"expansion failure: residual {worst:.3e}")
    return KernelFit(K[:, : L + 1], worst)


# ----------------------------------------------------------------------------
# identities


@dataclass
class IdentityReport:
    residuals: dict = field(default_factory=dict)
    gates: dict = field(default_factory=dict)

    def add(self, name: str, value: float, gate: float):
        self.residuals[name] = float(value)
        self.gates[name] = float(gate)

    @property
    def passed(self) -> dict:
        return {k: bool(self.residuals[k] <= self.gates[k]) for k in self.residuals}

    @property
    def ok(self) -> bool:
        return all(self.passed.values())


def _rel(a, b) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _random_complex(rng, bg: Background, n: int) -> np.ndarray:
    s = bg.bands.scale
    z = rng.uniform(-1.5 * s, 1.5 * s, n) + 1j * rng.uniform(0.05 * s, s, n)
    z[::2] = z[::2].conjugate()
    return z


def identity_suite(prob: DirectProblem, rng: np.random.Generator | None = None, samples: int = 30) -> IdentityReport:
    bg, data = prob.bg, prob.data
    rng = np.random.default_rng(0) if rng is None else rng
    rep = IdentityReport()

    # Wronskian-type identity of the background, coefficientwise
    ident = 1.0 - bg.delta * bg.delta + bg.phi_half * bg.phi_half + bg.phi_q * bg.theta_q1
    scale = max(1.0, float(np.max(np.abs((bg.delta * bg.delta).coeffs))))
    rep.add("background_wronskian", float(np.max(np.abs(ident.coeffs))) / scale, 1e-9)

    zs = _random_complex(rng, bg, samples)
    m_prod = xi_prod = fact = wr = 0.0
    for z in zs:
        pt = SheetPoint(z)
        mp = m_branch(pt, bg, +1)
        mm = m_branch(pt, bg, -1)
        m_prod = max(m_prod, _rel(mp * mm, -bg.theta_q1(z) / bg.phi_q(z)))
        xp, xm = floquet_multipliers(pt, bg)
        xi_prod = max(xi_prod, abs(xp * xm - 1.0))
        for sheet in (1, 2):
            ms = (mp, mm) if sheet == 1 else (mm, mp)
            fp = data.theta0(z) + ms[0] * data.phi0(z)
            fm = data.theta0(z) + ms[1] * data.phi0(z)
            fact = max(fact, _rel(bg.phi_q(z) * fp * fm, data.F(z)))
        # Wronskian of regularized Jost solutions at n = 0 and n = p + 1
        target = bg.phi_q(z) * (mm - mp)
        n_last = prob.pert.p + 1
        gp = reg_values([0, 1, n_last, n_last + 1], z, prob, +1)[:, 0]
        gm = reg_values([0, 1, n_last, n_last + 1], z, prob, -1)[:, 0]
        e2 = prob.reg.De2(z)
        w0 = prob.pert.a_at(0, bg) * e2 * (gp[0] * gm[1] - gp[1] * gm[0])
        w1 = prob.pert.a_at(n_last, bg) * e2 * (gp[2] * gm[3] - gp[3] * gm[2])
        wr = max(wr, _rel(w0, target), _rel(w1, target))
    rep.add("m_product", m_prod, 1e-9)
    rep.add("floquet_product", xi_prod, 1e-9)
    rep.add("F_factorization", fact, 1e-9)
    rep.add("jost_wronskian", wr, 1e-9)

    # i sin(q kappa) on the gaps: real, equal to sqrt(Delta^2 - 1), sign -(-1)^(q-j)
    q = bg.q
    worst = 0.0
    sign_bad = 0
    for j in range(0, q + 1):
        lo, hi = bg.bands.gap(j)
        if bg.bands.closed[j - 1] if 1 <= j <= q - 1 else False:
            continue
        lo = lo if math.isfinite(lo) else hi - 2.0
        hi = hi if math.isfinite(hi) else lo + 2.0
        for x in rng.uniform(lo, hi, 6):
            k = quasimomentum(complex(x, 0.0), bg)
            isin = 1j * np.sin(q * k)
            s = sqrt_disc(SheetPoint(complex(x, 0.0)), bg)
            expected = -((-1) ** (q - j)) * math.sinh(q * k.imag)
            worst = max(worst, abs(isin.imag) / max(1.0, abs(isin)), _rel(isin.real, expected), _rel(s.real, expected))
            if np.sign(isin.real) != -((-1) ** (q - j)):
                sign_bad += 1
    rep.add("gap_sine", worst, 1e-9)
    rep.add("gap_sine_sign_violations", sign_bad, 0)

    # |S| = 1 and rim conjugation on the bands
    unit = conj = 0.0
    for lo, hi in bg.bands.bands:
        for x in rng.uniform(lo, hi, 8):
            up = s_matrix(SheetPoint(complex(x, 0.0)), prob)
            dn = s_matrix(SheetPoint(complex(x, -0.0)), prob)
            unit = max(unit, abs(abs(up) - 1.0))
            conj = max(conj, abs(dn - up.conjugate()))
    rep.add("S_unimodular", unit, 1e-9)
    rep.add("S_conjugation", conj, 1e-9)
    return rep
