"""Small dense linear algebra over 2x2 complex matrices.

Everything downstream works with SL(2,C) elements, their Mobius action on
the Riemann sphere, and the projection to hyperbolic 3-space realized as
positive Hermitian matrices of determinant one.  Matrices are plain numpy
arrays of shape (2, 2) and dtype complex128; no wrapper class is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Tolerances, default_tolerances
from .errors import NonSL2Input, NotPositiveDefinite


class Infinity:
    """The point at infinity of the Riemann sphere.

    A singleton, used as an explicit projective value instead of a float
    sentinel: the hyperbolic Gauss map genuinely attains infinity.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"


INF = Infinity()


def is_inf(value) -> bool:
    return isinstance(value, Infinity)


def mat2(a11, a12, a21, a22) -> np.ndarray:
    return np.array([[a11, a12], [a21, a22]], dtype=complex)


def identity2() -> np.ndarray:
    return np.eye(2, dtype=complex)


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product. Kept as a named operation for the public surface."""
    return a @ b


def det2(m: np.ndarray) -> complex:
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]


def inv2(m: np.ndarray) -> np.ndarray:
    """Inverse by adjugate; raises ZeroDivisionError on singular input."""
    d = det2(m)
    if d == 0:
        raise ZeroDivisionError("singular 2x2 matrix")
    return np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]], dtype=complex) / d


def fro(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


_SPLITTER = 134217729.0  # 2**27 + 1, Veltkamp splitting constant


def _two_prod(a: float, b: float):
    """Product a*b as head + exact tail, without fma."""
    p = a * b
    t = _SPLITTER * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLITTER * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def det2_compensated(m: np.ndarray) -> complex:
    """Determinant with compensated products.

    The naive determinant of a matrix with entries of size s carries a
    rounding error of order eps*s^2, which drowns the actual drift signal
    once transported frames grow large.  Splitting each real product into
    head and tail and summing with math.fsum removes that floor.
    """
    a, b = complex(m[0, 0]), complex(m[0, 1])
    c, d = complex(m[1, 0]), complex(m[1, 1])
    re_terms = []
    im_terms = []
    for u, v, sign in ((a, d, 1.0), (b, c, -1.0)):
        p, e = _two_prod(u.real, v.real)
        re_terms += [sign * p, sign * e]
        p, e = _two_prod(u.imag, v.imag)
        re_terms += [-sign * p, -sign * e]
        p, e = _two_prod(u.real, v.imag)
        im_terms += [sign * p, sign * e]
        p, e = _two_prod(u.imag, v.real)
        im_terms += [sign * p, sign * e]
    return complex(math.fsum(re_terms), math.fsum(im_terms))


def mobius_star(m: np.ndarray, g):
    """Fractional linear action of m on g, with infinity as a value.

    Returns (a11*g + a12)/(a21*g + a22); g may be INF, and the pole of the
    map is sent to INF.
    """
    a, b = complex(m[0, 0]), complex(m[0, 1])
    c, d = complex(m[1, 0]), complex(m[1, 1])
    if is_inf(g):
        if c == 0:
            return INF
        return a / c
    g = complex(g)
    den = c * g + d
    if den == 0:
        return INF
    return (a * g + b) / den


@dataclass(frozen=True)
class H3Point:
    """A point of hyperbolic 3-space in two models at once.

    minkowski is (x0, x1, x2, x3) on the hyperboloid x0^2-x1^2-x2^2-x3^2=1,
    ball is the Poincare ball image (x1,x2,x3)/(1+x0).
    """

    minkowski: np.ndarray
    ball: np.ndarray


def project_h3(f: np.ndarray, tol: Tolerances | None = None) -> H3Point:
    """Project an SL(2,C) element to H^3 via the Hermitian square F F*.

    The determinant gate scales with the squared matrix norm: computing
    ad - bc for a large-entry unimodular matrix loses precision through
    cancellation, so an absolute test would reject accurately computed
    frames far down a trinoid end.
    """
    tol = tol or default_tolerances()
    d = det2_compensated(f)
    if abs(d - 1.0) > tol.det * max(1.0, fro(f) ** 2):
        raise NonSL2Input(f"determinant {d} is not 1 within scaled {tol.det}")
    x = f @ f.conj().T
    x0 = 0.5 * (x[0, 0].real + x[1, 1].real)
    x1 = x[0, 1].real
    x2 = x[0, 1].imag
    x3 = 0.5 * (x[0, 0].real - x[1, 1].real)
    mink = np.array([x0, x1, x2, x3])
    ball = mink[1:] / (1.0 + x0)
    return H3Point(minkowski=mink, ball=ball)


def ball_distance(p: H3Point, q: H3Point) -> float:
    """Euclidean distance of the two ball images (used for agreement tests)."""
    return float(np.linalg.norm(p.ball - q.ball))


def eigenvalues_2x2(m: np.ndarray):
    """Both eigenvalues, ordered by (Re, Im) lexicographically descending.

    The larger-magnitude root of the characteristic polynomial is computed
    first and the other recovered from the determinant, which avoids the
    cancellation in the textbook formula.
    """
    tr = complex(m[0, 0] + m[1, 1])
    d = det2(m)
    sq = np.sqrt(complex(tr * tr - 4.0 * d))
    if abs(tr + sq) >= abs(tr - sq):
        big = 0.5 * (tr + sq)
    else:
        big = 0.5 * (tr - sq)
    if big == 0:
        lams = [0.0 + 0.0j, 0.0 + 0.0j]
    else:
        lams = [big, d / big]
    lams.sort(key=lambda z: (z.real, z.imag), reverse=True)
    return lams[0], lams[1]


def solve_quadratic(a, b, c):
    """Roots of a*z^2 + b*z + c with a != 0, numerically stable.

    The root formula is applied with the sign chosen so b and the square
    root do not cancel; the second root comes from the product c/a.
    Returns an unordered pair.
    """
    a = complex(a)
    b = complex(b)
    c = complex(c)
    if a == 0:
        raise ZeroDivisionError("leading coefficient is zero")
    sq = np.sqrt(b * b - 4.0 * a * c)
    if (b.conjugate() * sq).real >= 0.0:
        qq = -0.5 * (b + sq)
    else:
        qq = -0.5 * (b - sq)
    if qq == 0:
        # b == 0 and discriminant == 0, so both roots vanish
        return 0.0 + 0.0j, 0.0 + 0.0j
    return qq / a, c / qq


def su2_defect(m: np.ndarray) -> float:
    """Frobenius distance of M M* from the identity."""
    return fro(m @ m.conj().T - np.eye(2))


def hermitian_parts(h: np.ndarray):
    """Eigenvalues (ascending) and unitary eigenvectors of a 2x2 Hermitian."""
    w, v = np.linalg.eigh(h)
    return w, v


def hermitian_sqrt(h: np.ndarray) -> np.ndarray:
    """Principal square root of a positive definite Hermitian 2x2 matrix."""
    w, v = np.linalg.eigh(h)
    if w[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]} is not positive")
    return (v * np.sqrt(w)) @ v.conj().T
