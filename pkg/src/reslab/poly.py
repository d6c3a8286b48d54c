"""Real-coefficient polynomials, root clustering and interpolation.

Coefficients are stored in ascending order: ``coeffs[k]`` multiplies ``lam**k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

TRIM_TOL = 1e-14
CLUSTER_TOL = 1e-7


class PolyError(ValueError):
    pass


def _trim(c: np.ndarray, tol: float) -> np.ndarray:
    if c.size == 0:
        return np.zeros(1)
    scale = np.max(np.abs(c))
    if scale == 0.0:
        return np.zeros(1)
    nz = np.nonzero(np.abs(c) > tol * scale)[0]
    return c[: nz[-1] + 1].copy()


class Poly:
    """Immutable polynomial with real (float) coefficients."""

    __slots__ = ("_c",)

    def __init__(self, coeffs: Iterable[float], trim_tol: float = TRIM_TOL):
        c = np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs, dtype=float)
        c = _trim(np.atleast_1d(c), trim_tol)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def const(cls, a: float) -> "Poly":
        return cls([a])

    @classmethod
    def x(cls) -> "Poly":
        return cls([0.0, 1.0])

    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: float = 1.0) -> "Poly":
        if len(roots) == 0:
            return cls([lead])
        c = npoly.polyfromroots(np.asarray(roots, dtype=complex))
        return cls(lead * c.real)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        if self._c.size == 1 and self._c[0] == 0.0:
            return -1
        return self._c.size - 1

    @property
    def lead(self) -> float:
        return float(self._c[-1])

    def is_zero(self) -> bool:
        return self.degree < 0

    def __call__(self, lam):
        # Horner; accepts scalars and arrays, real or complex
        c = self._c
        if np.isscalar(lam):
            acc = 0.0 * lam + c[-1]
            for a in c[-2::-1]:
                acc = acc * lam + a
            return acc
        lam = np.asarray(lam)
        acc = np.full(lam.shape, c[-1], dtype=np.result_type(lam, float))
        for a in c[-2::-1]:
            acc = acc * lam + a
        return acc

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            return other
        return Poly([float(other)])

    def __add__(self, other):
        return Poly(npoly.polyadd(self._c, self._coerce(other)._c))

    __radd__ = __add__

    def __sub__(self, other):
        return Poly(npoly.polysub(self._c, self._coerce(other)._c))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return Poly(-self._c)

    def __mul__(self, other):
        if isinstance(other, Poly):
            return Poly(npoly.polymul(self._c, other._c))
        return Poly(self._c * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float):
        return Poly(self._c / float(other))

    def scale(self, a: float) -> "Poly":
        return Poly(self._c * a)

    def derivative(self) -> "Poly":
        if self._c.size == 1:
            return Poly([0.0])
        return Poly(npoly.polyder(self._c))

    def __eq__(self, other):
        return isinstance(other, Poly) and np.array_equal(self._c, other._c)

    def __hash__(self):
        return hash(self._c.tobytes())

    def allclose(self, other: "Poly", rtol: float = 1e-10, atol: float = 0.0) -> bool:
        n = max(self._c.size, other._c.size)
        a = np.pad(self._c, (0, n - self._c.size))
        b = np.pad(other._c, (0, n - other._c.size))
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
        return bool(np.all(np.abs(a - b) <= atol + rtol * scale))

    def __repr__(self):
        return f"Poly({np.array2string(self._c, precision=6, separator=', ')})"

    def magnitude(self, lam) -> float:
        """Sum of |c_k||lam|^k, the natural scale for residuals at ``lam``."""
        return float(Poly(np.abs(self._c))(abs(lam)))


def arith(p: Poly, q, op: str):
    """Dispatch a named ring operation; ``q`` is a Poly, scalar or evaluation point."""
    if op == "add":
        return p + q
    if op == "sub":
        return p - q
    if op == "mul":
        return p * q
    if op == "scale":
        return p.scale(float(q))
    if op == "derivative":
        return p.derivative()
    if op == "eval":
        return p(q)
    raise PolyError(f"unknown operation {op!r}")


@dataclass(frozen=True)
class RootSet:
    roots: tuple  # of (complex value, int multiplicity)

    @property
    def values(self) -> np.ndarray:
        return np.array([r for r, _ in self.roots], dtype=complex)

    @property
    def multiplicities(self) -> list[int]:
        return [m for _, m in self.roots]

    @property
    def total(self) -> int:
        return sum(m for _, m in self.roots)

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    def expanded(self) -> np.ndarray:
        return np.array([r for r, m in self.roots for _ in range(m)], dtype=complex)


def _polish(p: Poly, z: complex, iters: int = 4) -> complex:
    dp = p.derivative()
    for _ in range(iters):
        d = dp(z)
        if d == 0:
            break
        step = p(z) / d
        z_new = z - step
        if not np.isfinite(z_new) or abs(p(z_new)) > abs(p(z)):
            break
        z = z_new
    return z


def roots(p: Poly, cluster_tol: float = CLUSTER_TOL) -> RootSet:
    """All complex roots of ``p`` with multiplicities.

    Companion-matrix eigenvalues (LAPACK shifted QR) polished by Newton; roots
    closer than ``cluster_tol * max(1, |root|)`` are merged.
    """
    if p.degree < 1:
        raise PolyError("constant polynomial")
    raw = npoly.polyroots(p.coeffs).astype(complex)
    raw = np.array([_polish(p, z) for z in raw])

    # greedy single-linkage clustering
    order = np.argsort(raw.real)
    raw = raw[order]
    groups: list[list[complex]] = []
    for z in raw:
        for g in groups:
            c = np.mean(g)
            if abs(z - c) <= cluster_tol * max(1.0, abs(c)):
                g.append(z)
                break
        else:
            groups.append([z])

    out = []
    for g in groups:
        z = complex(np.mean(g))
        if abs(z.imag) <= cluster_tol * max(1.0, abs(z)):
            z = complex(z.real, 0.0)
        out.append([z, len(g)])

    # conjugate symmetry for real polynomials: pair up and average
    reals = [(z, m) for z, m in out if z.imag == 0.0]
    upper = [(z, m) for z, m in out if z.imag > 0.0]
    lower = [(z, m) for z, m in out if z.imag < 0.0]
    paired = []
    used = set()
    for z, m in upper:
        best, bd = None, np.inf
        for k, (w, mw) in enumerate(lower):
            if k in used:
                continue
            d = abs(z - w.conjugate())
            if d < bd:
                best, bd = k, d
        if best is None:
            raise PolyError("conjugate pairing failed")
        used.add(best)
        w, mw = lower[best]
        zz = 0.5 * (z + w.conjugate())
        mm = max(m, mw)
        paired.append((zz, mm))
        paired.append((zz.conjugate(), mm))
    result = reals + paired
    result.sort(key=lambda t: (t[0].real, t[0].imag))
    return RootSet(tuple((complex(z), int(m)) for z, m in result))


def interpolate(points: Sequence[tuple[complex, complex]], degree: int, tol: float = 1e-8) -> tuple[Poly, float]:
    """Real polynomial of the given degree through ``points`` (least squares if overdetermined).

    Returns ``(poly, relative_residual)``.
    """
    if len(points) < degree + 1:
        raise PolyError("insufficient data")
    xs = np.array([complex(x) for x, _ in points])
    ys = np.array([complex(y) for _, y in points])
    for i in range(len(xs)):
        for j in range(i):
            if abs(xs[i] - xs[j]) <= 1e-14 * max(1.0, abs(xs[i])):
                raise PolyError("duplicate interpolation node")
    if degree < 0:
        res = float(np.max(np.abs(ys))) if ys.size else 0.0
        if res > tol:
            raise PolyError("inconsistent interpolation data")
        return Poly([0.0]), res
    # column scaling keeps the Vandermonde system tame
    s = max(1.0, float(np.max(np.abs(xs))))
    V = np.vander(xs / s, degree + 1, increasing=True)
    A = np.vstack([V.real, V.imag])
    b = np.concatenate([ys.real, ys.imag])
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    resid = A @ coef - b
    scale = max(float(np.max(np.abs(b))), 1e-300)
    rel = float(np.max(np.abs(resid))) / scale
    if rel > tol:
        raise PolyError(f"inconsistent interpolation data (residual {rel:.3e})")
    coef = coef / s ** np.arange(degree + 1)
    return Poly(coef), rel
