"""The unperturbed periodic Jacobi operator on the half-lattice.

Fundamental solutions, Lyapunov function, band/gap layout, the branch of
sqrt(Delta^2 - 1) on the two-sheeted surface, Weyl m-functions, Bloch
solutions and the quasi-momentum.

Branch convention: on sheet 1,

    sqrt(Delta^2 - 1) = -1/2 * prod_k sqrt(lam - e_k)

over all 2q band edges with principal square roots; sheet 2 carries the
opposite sign.  Real ``lam`` with imaginary part ``+0.0`` is the upper rim of a
band, ``-0.0`` the lower rim.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .poly import Poly, roots

NORM_TOL = 1e-10
CLOSED_GAP_TOL = 1e-9
EDGE_TOL = 1e-9


class BackgroundError(ValueError):
    pass


@dataclass(frozen=True)
class SheetPoint:
    """A point of the two-sheeted surface: projection ``lam`` and sheet 1 or 2."""

    lam: complex
    sheet: int = 1

    def __post_init__(self):
        if self.sheet not in (1, 2):
            raise ValueError("sheet must be 1 or 2")
        object.__setattr__(self, "lam", complex(self.lam))

    def other(self) -> "SheetPoint":
        return SheetPoint(self.lam, 3 - self.sheet)


@dataclass(frozen=True)
class BandStructure:
    edges: np.ndarray  # 2q sorted reals: lam_0^+, lam_1^-, lam_1^+, ..., lam_q^-
    mu: np.ndarray  # Dirichlet points, one per finite gap closure
    nu: np.ndarray  # Neumann points
    alpha: np.ndarray  # critical points of Delta
    h: np.ndarray  # gap heights, cosh h_j = (-1)^(j-q) Delta(alpha_j)
    closed: tuple  # closed[j-1] is True when gap j is degenerate

    @property
    def q(self) -> int:
        return len(self.edges) // 2

    def band(self, j: int) -> tuple[float, float]:
        """Band sigma_j, j = 1..q."""
        return float(self.edges[2 * j - 2]), float(self.edges[2 * j - 1])

    def gap(self, j: int) -> tuple[float, float]:
        """Gap gamma_j; j = 0 and j = q are the infinite gaps."""
        q = self.q
        if j == 0:
            return -math.inf, float(self.edges[0])
        if j == q:
            return float(self.edges[-1]), math.inf
        return float(self.edges[2 * j - 1]), float(self.edges[2 * j])

    @property
    def bands(self) -> list[tuple[float, float]]:
        return [self.band(j) for j in range(1, self.q + 1)]

    @property
    def gaps(self) -> list[tuple[float, float]]:
        return [self.gap(j) for j in range(0, self.q + 1)]

    @property
    def open_gaps(self) -> list[int]:
        return [j for j in range(1, self.q) if not self.closed[j - 1]]

    @property
    def all_open(self) -> bool:
        return not any(self.closed)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.edges))))

    def locate(self, x: float, tol: float | None = None) -> tuple[str, int]:
        """Classify a real number as ('gap', j), ('band', j) or ('edge', k).

        For edges ``k`` is the index into ``edges``.
        """
        if tol is None:
            tol = EDGE_TOL * max(1.0, abs(x))
        for k, e in enumerate(self.edges):
            if abs(x - e) <= tol:
                return "edge", k
        e = self.edges
        if x < e[0]:
            return "gap", 0
        if x > e[-1]:
            return "gap", self.q
        for j in range(1, self.q + 1):
            lo, hi = self.band(j)
            if lo <= x <= hi:
                return "band", j
        for j in range(1, self.q):
            lo, hi = self.gap(j)
            if lo < x < hi:
                return "gap", j
        raise BackgroundError(f"cannot locate {x}")


@dataclass(frozen=True)
class Background:
    q: int
    a0: tuple  # a^0_1..a^0_q
    b0: tuple
    theta: tuple  # theta_n, n = 0..q+1
    phi: tuple  # phi_n, n = 0..q+1
    bands: BandStructure = field(repr=False)

    # derived polynomials
    @property
    def delta(self) -> Poly:
        return (self.phi[self.q + 1] + self.theta[self.q]) / 2.0

    @property
    def phi_half(self) -> Poly:
        return (self.phi[self.q + 1] - self.theta[self.q]) / 2.0

    @property
    def phi_q(self) -> Poly:
        return self.phi[self.q]

    @property
    def theta_q1(self) -> Poly:
        return self.theta[self.q + 1]

    @property
    def a0_wrap(self) -> float:
        return float(self.a0[-1])

    def a_at(self, n: int) -> float:
        """Periodic a^0_n for any integer n (a^0_0 = a^0_q)."""
        return float(self.a0[(n - 1) % self.q])

    def b_at(self, n: int) -> float:
        return float(self.b0[(n - 1) % self.q])

    def A(self, p: int) -> float:
        """prod_{j=0}^p a^0_j."""
        return float(np.prod([self.a_at(j) for j in range(0, p + 1)]))

    @property
    def B(self) -> float:
        return float(sum(self.b0))


def fundamental_solutions(q: int, a0, b0, n_max: int) -> tuple[list[Poly], list[Poly]]:
    """theta_n, phi_n for n = 0..n_max by the forward three-term recursion."""

    def a_at(n):
        return float(a0[(n - 1) % q])

    def b_at(n):
        return float(b0[(n - 1) % q])

    lam = Poly.x()
    theta = [Poly([1.0]), Poly([0.0])]
    phi = [Poly([0.0]), Poly([1.0])]
    for n in range(1, n_max):
        for y in (theta, phi):
            y.append(((lam - b_at(n)) * y[n] - y[n - 1] * a_at(n - 1)) / a_at(n))
    return theta[: n_max + 1], phi[: n_max + 1]


def _real_roots(p: Poly, what: str) -> np.ndarray:
    rs = roots(p).expanded()
    scale = max(1.0, float(np.max(np.abs(rs))))
    if np.any(np.abs(rs.imag) > 1e-6 * scale):
        raise BackgroundError(f"numerical band failure: complex {what}")
    return np.sort(rs.real)


def build_background(q: int, a0, b0) -> Background:
    q = int(q)
    if q < 2:
        raise BackgroundError("period q must be >= 2")
    a0 = tuple(float(x) for x in a0)
    b0 = tuple(float(x) for x in b0)
    if len(a0) != q or len(b0) != q:
        raise BackgroundError("a0 and b0 must have length q")
    if any(a <= 0 for a in a0):
        raise BackgroundError("a0 entries must be positive")
    if abs(np.prod(a0) - 1.0) > NORM_TOL:
        raise BackgroundError("non-normalized background: prod a0 != 1")

    theta, phi = fundamental_solutions(q, a0, b0, q + 1)
    delta = (phi[q + 1] + theta[q]) / 2.0

    # edges: roots of Delta - 1 and Delta + 1 (q each)
    edges = np.sort(np.concatenate([_real_roots(delta - 1.0, "edge"), _real_roots(delta + 1.0, "edge")]))
    if edges.size != 2 * q:
        raise BackgroundError("numerical band failure: wrong edge count")
    scale = max(1.0, float(np.max(np.abs(edges))))
    closed = []
    for j in range(1, q):
        lo, hi = edges[2 * j - 1], edges[2 * j]
        if hi - lo <= CLOSED_GAP_TOL * scale:
            mid = 0.5 * (lo + hi)
            edges[2 * j - 1] = edges[2 * j] = mid
            closed.append(True)
        else:
            closed.append(False)

    mu = _real_roots(phi[q], "Dirichlet point")
    nu = _real_roots(theta[q + 1], "Neumann point")
    alpha = _real_roots(delta.derivative(), "critical point")
    h = np.array(
        [
            math.acosh(max(1.0, (-1) ** (j - q) * float(delta(alpha[j - 1]))))
            for j in range(1, q)
        ]
    )
    # closed-gap Dirichlet points sit exactly on the merged edge
    for j in range(1, q):
        if closed[j - 1]:
            h[j - 1] = 0.0
    bands = BandStructure(edges=edges, mu=mu, nu=nu, alpha=alpha, h=h, closed=tuple(closed))
    for arr in (edges, mu, nu, alpha, h):
        arr.setflags(write=False)
    return Background(q=q, a0=a0, b0=b0, theta=tuple(theta), phi=tuple(phi), bands=bands)


# ----------------------------------------------------------------------------
# multivalued functions


def sqrt_disc_values(lam, edges, sheet: int = 1):
    """Vectorised sqrt(Delta^2 - 1) via the product formula."""
    lam = np.asarray(lam, dtype=complex)
    acc = np.full(lam.shape, -0.5 + 0j)
    for e in edges:
        acc = acc * np.sqrt(lam - e)
    return acc if sheet == 1 else -acc


def sqrt_disc(pt: SheetPoint, bg: Background) -> complex:
    """sqrt(Delta^2 - 1) at a point of the surface; zero at band edges."""
    acc = -0.5 + 0j
    for e in bg.bands.edges:
        acc *= cmath.sqrt(pt.lam - e)
    return acc if pt.sheet == 1 else -acc


def is_branch_point(lam: complex, bg: Background, tol: float = EDGE_TOL) -> bool:
    d = bg.delta(lam)
    return abs(d * d - 1.0) < tol * max(1.0, abs(d) ** 2)


def floquet_multipliers(pt: SheetPoint, bg: Background) -> tuple[complex, complex]:
    """(xi_+, xi_-) = Delta +- sqrt(Delta^2 - 1); |xi_+| < 1 on sheet 1 off the bands."""
    d = complex(bg.delta(pt.lam))
    s = sqrt_disc(pt, bg)
    return d + s, d - s


class DirichletPole(ZeroDivisionError):
    pass


def _dirichlet_tol(bg: Background) -> float:
    return 1e-12 * max(1.0, bg.bands.scale ** (bg.q - 1))


def m_branch(pt: SheetPoint, bg: Background, sign: int) -> complex:
    """m_+ (sign=+1) or m_- (sign=-1) at ``pt``.

    Uses whichever of (phi + s)/phi_q and -theta_{q+1}/(phi - s) avoids
    cancellation; the second form is also the regular value at a Dirichlet
    point that is not a pole of this branch.  Raises DirichletPole at a pole.
    """
    s = sqrt_disc(pt, bg) * sign
    lam = pt.lam
    ph = complex(bg.phi_half(lam))
    num = ph + s
    den = ph - s
    if abs(num) >= abs(den):
        phq = complex(bg.phi_q(lam))
        if abs(phq) <= _dirichlet_tol(bg) * max(1.0, abs(num)):
            raise DirichletPole("Dirichlet point: m-function singular")
        return num / phq
    return -complex(bg.theta_q1(lam)) / den


def weyl_m(pt: SheetPoint, bg: Background) -> tuple[complex, complex]:
    """(m_+, m_-) = (phi +- sqrt(Delta^2-1)) / phi_q on the sheet of ``pt``."""
    phq = complex(bg.phi_q(pt.lam))
    if abs(phq) <= _dirichlet_tol(bg):
        raise DirichletPole("Dirichlet point: m-functions singular")
    return m_branch(pt, bg, +1), m_branch(pt, bg, -1)


def bloch_psi(n: int, pt: SheetPoint, bg: Background, sign: int = 1) -> complex:
    """Bloch solution psi_n^{+-} = theta_n + m_{+-} phi_n.

    Indices beyond one period use psi_{n+q} = xi * psi_n, which avoids the
    cancellation of theta_n + m phi_n for decaying solutions.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    q = bg.q
    k, r = divmod(n, q)
    m = m_branch(pt, bg, sign)
    base = complex(bg.theta[r](pt.lam)) + m * complex(bg.phi[r](pt.lam))
    if k == 0:
        return base
    xi_p, xi_m = floquet_multipliers(pt, bg)
    xi = xi_p if sign == 1 else xi_m
    return base * xi**k


def quasimomentum(lam: complex, bg: Background) -> complex:
    """Quasi-momentum ``kappa`` with cos(q kappa) = Delta(lam) and Re kappa in [-pi, 0].

    Real ``lam`` is read as the boundary value from the upper half-plane, so on a
    gap gamma_j: Re kappa = -pi (q - j)/q and Im kappa = h(lam) > 0.
    Lower half-plane values are the conjugates of upper half-plane values.
    """
    lam = complex(lam)
    q = bg.q
    bs = bg.bands
    if lam.imag < 0:
        return quasimomentum(lam.conjugate(), bg).conjugate()
    if lam.imag == 0.0:
        x = lam.real
        kind, j = bs.locate(x, tol=0.0)
        d = float(bg.delta(x))
        if kind == "gap":
            hq = math.acosh(max(1.0, abs(d)))
            return complex(-math.pi * (q - j), hq) / q
        if kind == "edge":
            jj = (j + 1) // 2
            return complex(-math.pi * (q - jj) / q, 0.0)
        # band sigma_j: q kappa = -pi (q - j) - arccos((-1)^(q-j) Delta)
        s = math.acos(max(-1.0, min(1.0, (-1) ** (q - j) * d)))
        return complex((-math.pi * (q - j) - s) / q, 0.0)
    # upper half-plane: q kappa = -i log xi_+ on a branch fixed by continuation from infinity
    R = 1e3 * bs.scale + 10 * abs(lam)
    ts = np.geomspace(1.0, R / abs(lam), 4000)[::-1]
    path = lam * ts
    xi = np.array([floquet_multipliers(SheetPoint(z), bg)[0] for z in path])
    phase = np.unwrap(np.angle(xi))
    # at large |lam|, xi_+ ~ lam^{-q} so q Re kappa ~ -q arg lam
    target = -q * cmath.phase(path[0])
    shift = 2 * math.pi * round((target - phase[0]) / (2 * math.pi))
    re_qk = phase[-1] + shift
    im_qk = -math.log(abs(xi[-1]))
    return complex(re_qk, im_qk) / q


def classify_j0_states(bg: Background) -> list[tuple[float, str, int]]:
    """States of the unperturbed operator: (mu_j, kind, j) for each open gap."""
    out = []
    bs = bg.bands
    for j in range(1, bg.q):
        if bs.closed[j - 1]:
            continue
        mu = float(bs.mu[j - 1])
        lo, hi = bs.gap(j)
        tol = EDGE_TOL * max(1.0, abs(mu)) * 10
        if abs(mu - lo) <= tol or abs(mu - hi) <= tol:
            out.append((mu, "virtual", j))
            continue
        xi_p, xi_m = floquet_multipliers(SheetPoint(mu), bg)
        th = float(bg.theta[bg.q](mu))
        if abs(xi_p - th) < abs(xi_m - th):
            out.append((mu, "antibound", j))
        else:
            out.append((mu, "bound", j))
    return out


def edge_singularity_sign(bg: Background, j: int, n: int = 1, eps: float = 1e-8) -> int:
    """Sign s in psi_n^+ ~ s * i C / sqrt(lam - edge) for a Dirichlet point on an edge.

    Evaluated on the upper rim of the adjacent band; returns 0 when mu_j is
    not at an edge of gap j.
    """
    bs = bg.bands
    mu = float(bs.mu[j - 1])
    lo, hi = bs.gap(j)
    if abs(mu - lo) <= 1e-7 * max(1.0, abs(mu)):
        x = complex(lo - eps, 0.0)
    elif abs(mu - hi) <= 1e-7 * max(1.0, abs(mu)):
        x = complex(hi + eps, 0.0)
    else:
        return 0
    val = bloch_psi(n, SheetPoint(x), bg, +1) * math.sqrt(eps)
    c = (val / 1j).real
    return int(np.sign(c))
