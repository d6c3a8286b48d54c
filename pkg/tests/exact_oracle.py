"""Exact rational reference for the Jost polynomials and the state polynomial.

Independent of the package: sympy rationals, forward recursion for the
fundamental solutions, backward recursion through the perturbation.
"""

from __future__ import annotations

from dataclasses import dataclass

import sympy as sp

lam = sp.Symbol("lam")


@dataclass
class ExactJost:
    theta: list  # unperturbed theta_n
    phi: list
    theta_plus: list  # perturbed, n = 0..p+2
    phi_plus: list
    F: sp.Expr
    delta: sp.Expr
    c1: sp.Rational
    c2: sp.Rational
    c3: sp.Rational
    kappa: int


def exact_jost(q, a0, b0, p, u, v) -> ExactJost:
    a0 = [sp.Rational(x) for x in a0]
    b0 = [sp.Rational(x) for x in b0]
    u = [sp.Rational(x) for x in u]
    v = [sp.Rational(x) for x in v]

    def a_bg(n):
        return a0[(n - 1) % q]

    def b_bg(n):
        return b0[(n - 1) % q]

    def a(n):
        return a_bg(n) + u[n - 1] if 1 <= n <= p else a_bg(n)

    def b(n):
        return b_bg(n) + v[n - 1] if 1 <= n <= p else b_bg(n)

    top = max(q + 1, p + 2)
    theta, phi = [sp.Integer(1), sp.Integer(0)], [sp.Integer(0), sp.Integer(1)]
    for n in range(1, top):
        theta.append(sp.expand(((lam - b_bg(n)) * theta[n] - a_bg(n - 1) * theta[n - 1]) / a_bg(n)))
        phi.append(sp.expand(((lam - b_bg(n)) * phi[n] - a_bg(n - 1) * phi[n - 1]) / a_bg(n)))

    def backward(base):
        y = {p + 1: base[p + 1], p + 2: base[p + 2]}
        for n in range(p + 1, 0, -1):
            y[n - 1] = sp.expand(((lam - b(n)) * y[n] - a(n) * y[n + 1]) / a(n - 1))
        return [y[n] for n in range(p + 3)]

    th_p, ph_p = backward(theta), backward(phi)
    delta = sp.expand((phi[q + 1] + theta[q]) / 2)
    phi_half = sp.expand((phi[q + 1] - theta[q]) / 2)
    F = sp.expand(phi[q] * th_p[0] ** 2 + 2 * phi_half * th_p[0] * ph_p[0] - theta[q + 1] * ph_p[0] ** 2)

    c1 = 1 / sp.Mul(*[a(j) for j in range(0, p + 1)])
    if u[-1] != 0:
        nu = 2 * p
        c2 = c1 * u[-1] * (a_bg(p) + a(p))
    else:
        nu = 2 * p - 1
        c2 = c1 * a_bg(p) ** 2 * v[-1]
    return ExactJost(theta, phi, th_p, ph_p, F, delta, c1, c2, c1 * c2, nu + q - 1)


def coeffs(expr) -> list:
    """Ascending rational coefficients of a polynomial in lam."""
    return list(reversed(sp.Poly(expr, lam).all_coeffs()))


def worked() -> ExactJost:
    return exact_jost(2, [2, sp.Rational(1, 2)], [0, 0], 1, [1], [0])
