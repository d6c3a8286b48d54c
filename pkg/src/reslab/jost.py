"""Finitely supported perturbations of the periodic background.

Jost polynomials come from the backward recursion started beyond the
support, where the perturbed and unperturbed solutions coincide.  The state
polynomials F_n and their leading constants live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .background import Background, DirichletPole, SheetPoint, bloch_psi, fundamental_solutions, m_branch
from .poly import Poly


class ClassViolation(ValueError):
    """The perturbation is outside the admissible class."""


class JostPole(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class Perturbation:
    p: int
    u: tuple
    v: tuple
    nu: int
    a: tuple = field(repr=False)  # perturbed a_1..a_p
    b: tuple = field(repr=False)

    def a_at(self, n: int, bg: Background) -> float:
        """Perturbed a_n for n >= 0; a_0 is the unperturbed a^0_q."""
        if 1 <= n <= self.p:
            return float(self.a[n - 1])
        return bg.a_at(n)

    def b_at(self, n: int, bg: Background) -> float:
        if 1 <= n <= self.p:
            return float(self.b[n - 1])
        return bg.b_at(n)


def validate_perturbation(bg: Background, p: int, u, v, allow_trivial: bool = False) -> Perturbation:
    p = int(p)
    u = tuple(float(x) for x in u)
    v = tuple(float(x) for x in v)
    if p < 1:
        raise ClassViolation("support length p must be >= 1")
    if len(u) != p or len(v) != p:
        raise ClassViolation("u and v must have length p")
    a = tuple(bg.a_at(n) + u[n - 1] for n in range(1, p + 1))
    b = tuple(bg.b_at(n) + v[n - 1] for n in range(1, p + 1))
    if any(x <= 0 for x in a):
        raise ClassViolation("positivity violated: a0_n + u_n must be > 0")
    if u[-1] != 0.0:
        nu = 2 * p
    elif v[-1] != 0.0:
        nu = 2 * p - 1
    elif allow_trivial:
        nu = 0
    else:
        raise ClassViolation("effective support shorter than p: re-submit with smaller p")
    return Perturbation(p=p, u=u, v=v, nu=nu, a=a, b=b)


@dataclass(frozen=True)
class JostData:
    theta_plus: tuple  # n = 0..p+2
    phi_plus: tuple
    F: Poly
    Fn: tuple  # n = 0..p
    c1: float
    c2: float
    c3: float
    kappa: int
    A_p: float
    p: int = 0
    nu: int = 0

    @property
    def theta0(self) -> Poly:
        return self.theta_plus[0]

    @property
    def phi0(self) -> Poly:
        return self.phi_plus[0]


def backward_recursion(bg: Background, pert: Perturbation) -> tuple[list[Poly], list[Poly]]:
    """theta^+_n and phi^+_n for n = 0..p+2."""
    p = pert.p
    theta, phi = fundamental_solutions(bg.q, bg.a0, bg.b0, p + 2)
    lam = Poly.x()
    out = []
    for base in (theta, phi):
        y = {p + 1: base[p + 1], p + 2: base[p + 2]}
        for n in range(p + 1, 0, -1):
            y[n - 1] = ((lam - pert.b_at(n, bg)) * y[n] - y[n + 1] * pert.a_at(n, bg)) / pert.a_at(n - 1, bg)
        out.append([y[n] for n in range(0, p + 3)])
    return out[0], out[1]


def state_poly_from(bg: Background, th: Poly, ph: Poly) -> Poly:
    """phi_q th^2 + 2 phi th ph - theta_{q+1} ph^2, the pole-free form of phi_q f^+ f^-."""
    return bg.phi_q * th * th + 2.0 * bg.phi_half * th * ph - bg.theta_q1 * ph * ph


def constants(pert: Perturbation, bg: Background, n: int = 0) -> tuple[float, float, float, int, float]:
    """(c1(n), c2(n), c3(n), kappa, A_p); n = 0 gives the constants of F."""
    p = pert.p
    c1 = 1.0 / float(np.prod([pert.a_at(j, bg) for j in range(n, p + 1)]))
    ap0 = bg.a_at(p)
    ap = pert.a_at(p, bg)
    if pert.nu == 2 * p:
        c2 = c1 * pert.u[-1] * (ap0 + ap)
    elif pert.nu == 2 * p - 1:
        c2 = c1 * ap0**2 * pert.v[-1]
    else:
        c2 = 0.0
    kappa = pert.nu + bg.q - 1
    return c1, c2, c1 * c2, kappa, bg.A(p)


def jost_polys(bg: Background, pert: Perturbation) -> JostData:
    th, ph = backward_recursion(bg, pert)
    Fn = tuple(state_poly_from(bg, th[n], ph[n]) for n in range(0, pert.p + 1))
    c1, c2, c3, kappa, A_p = constants(pert, bg)
    return JostData(
        theta_plus=tuple(th),
        phi_plus=tuple(ph),
        F=Fn[0],
        Fn=Fn,
        c1=c1,
        c2=c2,
        c3=c3,
        kappa=kappa,
        A_p=A_p,
        p=pert.p,
        nu=pert.nu,
    )


def state_polynomial(n: int, data: JostData, bg: Background) -> Poly:
    """F_n = phi_q f^+_n f^-_n as a polynomial, for any n >= 0."""
    if n < len(data.Fn):
        return data.Fn[n]
    if n < len(data.theta_plus):
        return state_poly_from(bg, data.theta_plus[n], data.phi_plus[n])
    th, ph = fundamental_solutions(bg.q, bg.a0, bg.b0, n)
    return state_poly_from(bg, th[n], ph[n])


def jost_f(n: int, pt: SheetPoint, data: JostData, bg: Background) -> complex:
    """f_n on the sheet of ``pt``: theta^+_n + m phi^+_n with m_+ on sheet 1 and m_- on sheet 2.

    Beyond the support f_n is the Bloch solution and is continued with the
    Floquet multiplier.
    """
    try:
        if n >= len(data.theta_plus):
            return bloch_psi(n, SheetPoint(pt.lam, 1), bg, +1 if pt.sheet == 1 else -1)
        m = m_branch(SheetPoint(pt.lam, 1), bg, +1 if pt.sheet == 1 else -1)
    except DirichletPole as exc:
        raise JostPole("m-function pole: use F-based route") from exc
    lam = pt.lam
    return complex(data.theta_plus[n](lam)) + m * complex(data.phi_plus[n](lam))


def wronskian_profile(data: JostData, pert: Perturbation, bg: Background, lam: complex) -> np.ndarray:
    """a_n (theta^+_n phi^+_{n+1} - theta^+_{n+1} phi^+_n) for n = 0..p+1."""
    th, ph = data.theta_plus, data.phi_plus
    vals = []
    for n in range(0, pert.p + 2):
        vals.append(pert.a_at(n, bg) * (th[n](lam) * ph[n + 1](lam) - th[n + 1](lam) * ph[n](lam)))
    return np.array(vals, dtype=complex)


@dataclass
class AsymptoticReport:
    lam: float
    F_dev: float
    F_dev_2: float
    f2_dev: float
    f2_dev_2: float

    @property
    def F_ratio(self) -> float:
        return self.F_dev_2 / self.F_dev if self.F_dev else 0.0

    @property
    def f2_ratio(self) -> float:
        return self.f2_dev_2 / self.f2_dev if self.f2_dev else 0.0


def asymptotic_residual(data: JostData, bg: Background, lam_large: float) -> AsymptoticReport:
    """Relative deviations of F and sheet-2 f_0 from their leading terms at lam and 2 lam."""
    a00 = bg.a0_wrap
    lead_F = -a00 * data.c3
    lead_f = -data.c2 / data.A_p

    def devs(x):
        F = data.F(x)
        fd = abs(F / (lead_F * x**data.kappa) - 1.0)
        f2 = jost_f(0, SheetPoint(complex(x, 0.0), 2), data, bg)
        gd = abs(f2 / (lead_f * x**data.nu) - 1.0)
        return fd, gd

    F1, g1 = devs(float(lam_large))
    F2, g2 = devs(2.0 * float(lam_large))
    return AsymptoticReport(lam=float(lam_large), F_dev=F1, F_dev_2=F2, f2_dev=g1, f2_dev_2=g2)


def theta0_degree_bound(nu: int) -> int:
    """Largest admissible degree of theta^+_0; for nu = 1 it is a nonzero constant."""
    return max(nu - 2, 0)


def leading_phi0(c2: float, bg: Background, p: int) -> float:
    """Leading coefficient of phi^+_0 fixed by the sheet-2 asymptotics."""
    return -bg.a0_wrap * c2 / bg.A(p)


def sign_at_infinity(data: JostData) -> int:
    return int(math.copysign(1, data.F.lead))
