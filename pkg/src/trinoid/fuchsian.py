"""Analytic continuation and loop monodromy on the thrice-punctured sphere.

Paths are chains of straight segments and circular arcs.  Transport of the
rank-one matrix system, of the associated scalar equation, and of the
hypergeometric equation all go through the compiled kernel; this module
plans loops that keep clear of every singular point, runs the kernel, and
packages loop transports into a monodromy representation with the defining
relation rho1 rho2 rho3 = 1.
"""

from __future__ import annotations

import cmath
import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._kernel import integrate_path
from .algebra import det2, eigenvalues_2x2, inv2
from .config import Tolerances, default_tolerances
from .errors import EigenvalueMismatch, NonSL2Input, SingularPathPoint, StepUnderflow
from .trinoid_data import HypergeometricParams, TrinoidData

MODE_MATRIX = 0
MODE_SCALAR = 1
MODE_HYPERGEOMETRIC = 2
MODE_MATRIX_W = 3

_DEFAULT_BASE = 0.5 + 0.5j


@dataclass(frozen=True)
class Path:
    """Piecewise path; each piece is ("seg", a, b) or ("arc", center, radius, th0, th1)."""

    pieces: tuple

    def rows(self) -> np.ndarray:
        out = np.zeros((len(self.pieces), 6))
        for i, p in enumerate(self.pieces):
            if p[0] == "seg":
                _, a, b = p
                out[i] = (0.0, a.real, a.imag, b.real, b.imag, 0.0)
            else:
                _, c, r, th0, th1 = p
                out[i] = (1.0, c.real, c.imag, r, th0, th1)
        return out

    @property
    def start(self) -> complex:
        p = self.pieces[0]
        if p[0] == "seg":
            return p[1]
        return p[1] + p[2] * cmath.exp(1j * p[3])

    @property
    def end(self) -> complex:
        p = self.pieces[-1]
        if p[0] == "seg":
            return p[2]
        return p[1] + p[2] * cmath.exp(1j * p[4])

    def length(self) -> float:
        total = 0.0
        for p in self.pieces:
            if p[0] == "seg":
                total += abs(p[2] - p[1])
            else:
                total += p[2] * abs(p[4] - p[3])
        return total

    def reversed(self) -> "Path":
        rev = []
        for p in self.pieces[::-1]:
            if p[0] == "seg":
                rev.append(("seg", p[2], p[1]))
            else:
                rev.append(("arc", p[1], p[2], p[4], p[3]))
        return Path(tuple(rev))

    def sample(self, per_piece: int = 200) -> np.ndarray:
        """Points along the path, for clearance checks and quadrature oracles."""
        pts = []
        ts = np.linspace(0.0, 1.0, per_piece)
        for p in self.pieces:
            if p[0] == "seg":
                pts.append(p[1] + ts * (p[2] - p[1]))
            else:
                ang = p[3] + ts * (p[4] - p[3])
                pts.append(p[1] + p[2] * np.exp(1j * ang))
        return np.concatenate(pts)


def segment(a: complex, b: complex) -> Path:
    return Path((("seg", complex(a), complex(b)),))


def concat(*paths: Path) -> Path:
    pieces = []
    for p in paths:
        pieces.extend(p.pieces)
    return Path(tuple(pieces))


def circle(center: complex, radius: float, start_angle: float = 0.0) -> Path:
    return Path((("arc", complex(center), float(radius), start_angle, start_angle + 2 * math.pi),))


def _piece_distance(piece, x: complex) -> float:
    """Minimum distance from a point to one path piece, computed analytically."""
    if piece[0] == "seg":
        _, a, b = piece
        d = b - a
        L2 = abs(d) ** 2
        if L2 == 0.0:
            return abs(x - a)
        t = ((x - a) * d.conjugate()).real / L2
        t = min(1.0, max(0.0, t))
        return abs(x - (a + t * d))
    _, c, r, th0, th1 = piece
    v = x - c
    if abs(v) == 0.0:
        return r
    ang = cmath.phase(v)
    lo, hi = min(th0, th1), max(th0, th1)
    # is ang (mod 2pi) inside [lo, hi]?
    k = math.floor((lo - ang) / (2 * math.pi))
    cand = ang + 2 * math.pi * (k + 1)
    if lo <= cand <= hi or hi - lo >= 2 * math.pi - 1e-15:
        return abs(abs(v) - r)
    e0 = c + r * cmath.exp(1j * th0)
    e1 = c + r * cmath.exp(1j * th1)
    return min(abs(x - e0), abs(x - e1))


def path_clearance(path: Path, points) -> float:
    """Smallest distance from any path point to any of the given points."""
    best = math.inf
    for piece in path.pieces:
        for x in points:
            d = _piece_distance(piece, complex(x))
            if d < best:
                best = d
    return best


def validate_path(path: Path, singular_points, clearance: float):
    c = path_clearance(path, singular_points)
    if c < clearance:
        raise SingularPathPoint(
            f"path comes within {c:.3g} of a singular point, clearance is {clearance:.3g}"
        )


@dataclass(frozen=True)
class PathPlan:
    """Base point plus one positively oriented loop around each of 0 and 1."""

    base_point: complex
    loops: tuple[Path, Path]
    singular_points: tuple
    clearance: float


def _min_pairwise(points) -> float:
    best = math.inf
    pts = list(points)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = abs(pts[i] - pts[j])
            if d < best:
                best = d
    return best if best < math.inf else 1.0


def choose_base_point(singular_points, clearance: float) -> complex:
    """Default base point, or a grid fallback when it sits too close.

    The fallback maximizes the minimum distance to the singular set over a
    coarse grid, breaking ties toward the default.
    """
    floor = max(0.1, 1.2 * clearance)
    if min(abs(_DEFAULT_BASE - s) for s in singular_points) >= floor:
        return _DEFAULT_BASE
    best = None
    best_key = None
    for xi in range(-20, 31):
        for yi in range(-20, 21):
            z = complex(0.1 * xi, 0.1 * yi)
            dmin = min(abs(z - s) for s in singular_points)
            key = (dmin, -abs(z - _DEFAULT_BASE))
            if best_key is None or key > best_key:
                best, best_key = z, key
    return best


def _build_loop(base, center, other_puncture, singular_points, radius_factor, clearance):
    """Route base -> circle entry, a full turn, and back, respecting clearance.

    The radius starts at radius_factor times the distance to the other
    puncture; the loop may legitimately enclose apparent singular points,
    so only the other puncture constrains the radius while the clearance
    margin is enforced against every singular point.  If the default
    approach ray or radius violates clearance the builder shrinks the
    radius and rotates the entry point until a clean route appears.
    """
    r0 = radius_factor * abs(center - other_puncture)
    phi0 = cmath.phase(base - center)
    for shrink in range(10):
        r = r0 * 0.75**shrink
        for rot in range(12):
            phi = phi0 + rot * (math.pi / 6.0)
            entry = center + r * cmath.exp(1j * phi)
            path = Path(
                (
                    ("seg", base, entry),
                    ("arc", center, r, phi, phi + 2 * math.pi),
                    ("seg", entry, base),
                )
            )
            others = [s for s in singular_points if s != center]
            if path_clearance(path, others) >= clearance and r >= clearance:
                return path
    raise SingularPathPoint(
        f"no loop around {center} stays {clearance:.3g} away from {singular_points}"
    )


def make_path_plan(
    data,
    base_point: complex | None = None,
    radius_factor: float | None = None,
    tol: Tolerances | None = None,
) -> PathPlan:
    """Plan the two monodromy loops for trinoid data or an explicit point set.

    data may be a TrinoidData (its punctures, umbilics and Gauss-map pole
    are all kept clear of) or a bare sequence of finite singular points
    that must include 0 and 1.
    """
    tol = tol or default_tolerances()
    if radius_factor is None:
        radius_factor = tol.loop_radius_factor
    if isinstance(data, TrinoidData):
        singular = data.finite_singular_points()
    else:
        singular = tuple(complex(s) for s in data)
    clearance = tol.clearance_factor * _min_pairwise(singular)
    if base_point is None:
        base = choose_base_point(singular, clearance)
    else:
        base = complex(base_point)
        if min(abs(base - s) for s in singular) < clearance:
            raise SingularPathPoint(f"base point {base} violates clearance {clearance:.3g}")
    loop0 = _build_loop(base, 0.0 + 0.0j, 1.0 + 0.0j, singular, radius_factor, clearance)
    loop1 = _build_loop(base, 1.0 + 0.0j, 0.0 + 0.0j, singular, radius_factor, clearance)
    return PathPlan(base_point=base, loops=(loop0, loop1), singular_points=singular, clearance=clearance)


def run_kernel(path: Path, mode: int, params: np.ndarray, u0: np.ndarray, rtol: float, stats: dict | None = None) -> np.ndarray:
    """Low-level transport along a validated path; fills stats if given."""
    rows = np.ascontiguousarray(path.rows())
    u0_flat = np.ascontiguousarray(u0, dtype=np.complex128).reshape(4)
    status, u, err, drift, nsteps = integrate_path(rows, mode, params, u0_flat, rtol)
    if status == 1:
        raise StepUnderflow(
            "step size underflow during transport; the path passes too close to a singular point"
        )
    if stats is not None:
        stats["err_estimate"] = stats.get("err_estimate", 0.0) + err
        stats["det_drift"] = max(stats.get("det_drift", 0.0), drift)
        stats["n_steps"] = stats.get("n_steps", 0) + nsteps
    return u.reshape(2, 2)


def singular_points_w_chart(data: TrinoidData) -> tuple:
    """Images of the singular set under z -> 1/z, with w = 0 for infinity."""
    images = [0.0 + 0.0j]
    for s in data.finite_singular_points():
        if abs(s) > 1e-12:
            images.append(1.0 / s)
    return tuple(images)


def integrate_matrix_ode(
    data: TrinoidData,
    path: Path,
    f0: np.ndarray,
    tol_ode: float | None = None,
    tol: Tolerances | None = None,
    chart: str = "z",
    clearance: float | None = None,
    stats: dict | None = None,
) -> np.ndarray:
    """Transport a frame of the rank-one system along a path.

    chart "z" is the standard chart; chart "w" integrates the same system
    in w = 1/z (the path is then given in w coordinates), which is how the
    end at infinity is reached without leaving bounded coordinates.  The
    default clearance is the loop-planning one; surface sampling passes a
    smaller explicit margin because its paths approach the punctures on
    purpose.
    """
    tol = tol or default_tolerances()
    rtol = tol.ode if tol_ode is None else tol_ode
    f0 = np.asarray(f0, dtype=complex)
    if abs(det2(f0) - 1.0) > 100.0 * tol.det:
        raise NonSL2Input(f"initial frame determinant {det2(f0)} is too far from 1")
    if chart == "z":
        mode = MODE_MATRIX
        singular = data.finite_singular_points()
    elif chart == "w":
        mode = MODE_MATRIX_W
        singular = singular_points_w_chart(data)
    else:
        raise ValueError(f"chart must be 'z' or 'w', got {chart!r}")
    if clearance is None:
        clearance = tol.clearance_factor * _min_pairwise(singular)
    validate_path(path, singular, clearance)
    return run_kernel(path, mode, data.kernel_params(), f0, rtol, stats)


def integrate_scalar_ode(
    data: TrinoidData,
    path: Path,
    init: np.ndarray | None = None,
    tol_ode: float | None = None,
    tol: Tolerances | None = None,
    stats: dict | None = None,
) -> np.ndarray:
    """Transfer matrix of the scalar equation along a path.

    Columns of the result are the transported (value, derivative) states of
    the two solutions whose initial states are the columns of init (the
    identity by default, i.e. (1,0) and (0,1) at the path start).
    """
    tol = tol or default_tolerances()
    rtol = tol.ode if tol_ode is None else tol_ode
    u0 = np.eye(2, dtype=complex) if init is None else np.asarray(init, dtype=complex)
    validate_path(
        path,
        data.finite_singular_points(),
        tol.clearance_factor * _min_pairwise(data.finite_singular_points()),
    )
    out = run_kernel(path, MODE_SCALAR, data.kernel_params(), u0, rtol, stats)
    if init is None:
        return out
    return out @ inv2(np.asarray(init, dtype=complex))


class Source(enum.Enum):
    MATRIX_ODE = "MatrixODE"
    SCALAR_ODE = "ScalarODE"
    HYPERGEOMETRIC = "Hypergeometric"
    FAMILY = "Family"


@dataclass(frozen=True)
class MonodromyRep:
    """Loop transports around 0 and 1, with rho3 closing the relation.

    err_estimate accumulates the integrator's local error estimates over
    both loops; det_drift is the largest observed determinant deviation.
    eigenvalue_defect is the distance of the computed eigenvalues from the
    predicted ones (NaN when no prediction applies, as for the
    hypergeometric source).
    """

    rho1: np.ndarray
    rho2: np.ndarray
    rho3: np.ndarray
    source: Source
    err_estimate: float
    det_drift: float
    eigenvalue_defect: float


def _eigenvalue_defect(rho, b_angle: float) -> float:
    lam = eigenvalues_2x2(rho)
    t1 = -cmath.exp(1j * b_angle)
    t2 = -cmath.exp(-1j * b_angle)
    d1 = max(abs(lam[0] - t1), abs(lam[1] - t2))
    d2 = max(abs(lam[0] - t2), abs(lam[1] - t1))
    return min(d1, d2)


def monodromy(
    data: TrinoidData,
    plan: PathPlan | None = None,
    source: Source = Source.MATRIX_ODE,
    tol_ode: float | None = None,
    tol: Tolerances | None = None,
) -> MonodromyRep:
    """Monodromy representation from the two planned loops.

    The third generator is defined through the relation rho1 rho2 rho3 = 1
    rather than by a loop in another chart; its eigenvalues are still
    checked against the prediction for the third half-angle, and a failure
    of any eigenvalue check beyond the warning tolerance raises a
    warning, not an error.
    """
    tol = tol or default_tolerances()
    if plan is None:
        plan = make_path_plan(data, tol=tol)
    if source is Source.MATRIX_ODE:
        mode = MODE_MATRIX
    elif source is Source.SCALAR_ODE:
        mode = MODE_SCALAR
    else:
        raise ValueError("use hypergeometric_monodromy for the hypergeometric source")
    stats: dict = {}
    rtol = tol.ode if tol_ode is None else tol_ode
    params = data.kernel_params()
    rhos = []
    for loop in plan.loops:
        validate_path(loop, plan.singular_points, plan.clearance)
        rhos.append(run_kernel(loop, mode, params, np.eye(2, dtype=complex), rtol, stats))
    rho1, rho2 = rhos
    rho3 = inv2(rho1 @ rho2)
    defect = max(
        _eigenvalue_defect(rho, b) for rho, b in zip((rho1, rho2, rho3), data.angles)
    )
    if defect > tol.eigenvalue_warn:
        warnings.warn(
            f"monodromy eigenvalues deviate from the predicted ones by {defect:.3g}",
            EigenvalueMismatch,
        )
    return MonodromyRep(
        rho1=rho1,
        rho2=rho2,
        rho3=rho3,
        source=source,
        err_estimate=stats.get("err_estimate", 0.0),
        det_drift=stats.get("det_drift", 0.0),
        eigenvalue_defect=defect,
    )


def hypergeometric_monodromy(
    params: HypergeometricParams,
    plan: PathPlan | None = None,
    tol_ode: float | None = None,
    tol: Tolerances | None = None,
) -> MonodromyRep:
    """Loop transports of the hypergeometric equation around 0 and 1.

    The raw transfer matrices have determinant exp(-2 pi i c) around 0 in
    general; each is normalized by a square root of its determinant so the
    result lands in SL(2, C).  All downstream comparisons are projective,
    so the sign ambiguity of the root is harmless.
    """
    tol = tol or default_tolerances()
    rtol = tol.ode if tol_ode is None else tol_ode
    if plan is None:
        plan = make_path_plan([0.0, 1.0], tol=tol)
    kparams = np.array([params.a, params.b, params.c, 0.0, 0.0, 0.0, 0.0])
    stats: dict = {}
    rhos = []
    for loop in plan.loops:
        validate_path(loop, plan.singular_points, plan.clearance)
        raw = run_kernel(loop, MODE_HYPERGEOMETRIC, kparams, np.eye(2, dtype=complex), rtol, stats)
        rhos.append(raw / np.sqrt(det2(raw)))
    rho1, rho2 = rhos
    rho3 = inv2(rho1 @ rho2)
    return MonodromyRep(
        rho1=rho1,
        rho2=rho2,
        rho3=rho3,
        source=Source.HYPERGEOMETRIC,
        err_estimate=stats.get("err_estimate", 0.0),
        det_drift=0.0,
        eigenvalue_defect=float("nan"),
    )


def projective_intertwiner(m1: MonodromyRep, m2: MonodromyRep, tol: Tolerances | None = None):
    """Invertible P with P rho_j P^{-1} = eps_j rho'_j, or None.

    Solved as a linear null-space problem in the four entries of P for each
    of the four sign patterns; candidate intertwiners are validated by the
    actual conjugation residual.
    """
    tol = tol or default_tolerances()
    eye = np.eye(2)
    rng = np.random.default_rng(170)
    for e1 in (1.0, -1.0):
        for e2 in (1.0, -1.0):
            rows = []
            for rho, rho2, eps in ((m1.rho1, m2.rho1, e1), (m1.rho2, m2.rho2, e2)):
                rows.append(np.kron(eye, rho.T) - eps * np.kron(rho2, eye))
            system = np.vstack(rows)
            _, sv, vh = np.linalg.svd(system)
            null_mask = sv <= tol.null_sv * max(1.0, sv[0])
            null_dim = int(np.sum(null_mask)) + (4 - len(sv))
            if null_dim == 0:
                continue
            basis = vh.conj()[4 - null_dim :]
            candidates = [basis[i] for i in range(null_dim)]
            if null_dim >= 2:
                for _ in range(20):
                    w = rng.standard_normal(null_dim) + 1j * rng.standard_normal(null_dim)
                    candidates.append(w @ basis)
            for vec in candidates:
                p = vec.reshape(2, 2)
                if abs(det2(p)) < 1e-8 * np.linalg.norm(p) ** 2:
                    continue
                p = p / np.sqrt(det2(p))
                ok = True
                for rho, rho_other, eps in (
                    (m1.rho1, m2.rho1, e1),
                    (m1.rho2, m2.rho2, e2),
                ):
                    resid = p @ rho @ inv2(p) - eps * rho_other
                    if np.linalg.norm(resid) > tol.projective * max(1.0, np.linalg.norm(rho_other)):
                        ok = False
                        break
                if ok:
                    return p, (e1, e2)
    return None


def projective_equivalence(m1: MonodromyRep, m2: MonodromyRep, tol: Tolerances | None = None) -> bool:
    """Whether two representations agree up to conjugation and signs."""
    return projective_intertwiner(m1, m2, tol) is not None


def apparent_point_check(
    data: TrinoidData,
    tol_ode: float | None = None,
    tol: Tolerances | None = None,
) -> dict:
    """Verify that the non-puncture singular points carry no monodromy.

    The umbilics and the Gauss-map pole are removable for the matrix
    system, and the pole is an apparent singular point of the scalar
    equation, so small loops around them must transport to the identity
    (up to sign for the scalar equation).  Returns the defects and an
    overall flag; callers report rather than raise on failure.
    """
    tol = tol or default_tolerances()
    rtol = tol.ode if tol_ode is None else tol_ode
    params = data.kernel_params()
    singular = data.finite_singular_points()
    out: dict = {}
    checks = (("q1", data.q.q1), ("q2", data.q.q2), ("pole", data.q.pole))
    for name, center in checks:
        others = [s for s in singular if abs(s - center) > 1e-13]
        radius = 0.25 * min(abs(s - center) for s in others)
        loop = circle(center, radius)
        p = run_kernel(loop, MODE_MATRIX, params, np.eye(2, dtype=complex), rtol)
        out[name] = float(np.linalg.norm(p - np.eye(2)))
    others = [s for s in singular if abs(s - data.q.pole) > 1e-13]
    radius = 0.25 * min(abs(s - data.q.pole) for s in others)
    loop = circle(data.q.pole, radius)
    t = run_kernel(loop, MODE_SCALAR, params, np.eye(2, dtype=complex), rtol)
    out["pole_scalar"] = float(
        min(np.linalg.norm(t - np.eye(2)), np.linalg.norm(t + np.eye(2)))
    )
    out["ok"] = all(v <= tol.apparent for k, v in out.items() if k != "ok")
    return out
