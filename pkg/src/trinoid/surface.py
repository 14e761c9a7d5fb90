"""Immersion builder: sampling grids, frame transport, and mesh assembly.

The surface is produced in four stages.  A SampleGrid covers the thrice
punctured sphere with one polar annulus per puncture plus a triangulated
core, and carries a spanning tree of integration edges rooted at a base
point.  transport_frame solves the frame equation dF = A F along the tree.
recover_weierstrass differentiates the transported frame numerically and
extracts the induced (g, omega) data, which the defining differentials
must reproduce; this is the main integrity oracle.  build_mesh applies a
unitarizing conjugator and projects to the Poincare ball.

Transport inside an annulus does not use the raw z chart: the connection
has double poles at the punctures, so the step count would grow like the
inverse square of the radius.  Instead the frame is written as
F = P(x) diag(1, x - p) V with P = [[G, 1], [1, 0]], which turns the
system into dV = B V dzeta in the logarithmic chart zeta = log(x - p)
with B bounded down the whole neck (kernel mode 4).  Per edge the V
transfer is rescaled by its exact determinant exp(-dzeta), making the
assembled F transfer unimodular by construction.  The end at infinity is
handled in the x = 1/z chart through conjugation by [[0, 1], [1, 0]].
"""

from __future__ import annotations

import cmath
import math
import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay

from .algebra import det2, det2_compensated, fro, inv2, project_h3, solve_quadratic
from .config import Tolerances, default_tolerances
from .errors import EmptyIntersection, NonSL2Input, NullStructureViolation, StepUnderflow
from .fuchsian import Path, run_kernel, segment, validate_path
from .trinoid_data import TrinoidData

_BASE_POINT = 0.5 + 0.5j
_INNER_RADIUS = 1e-3
_SIGMA = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

# Central finite-difference weights on eleven points (order ten).  The
# first derivative uses the antisymmetric weights, the second derivative
# the symmetric ones plus the center weight.
_FD_FIRST = (5.0 / 6.0, -5.0 / 21.0, 5.0 / 84.0, -5.0 / 504.0, 1.0 / 1260.0)
_FD_SECOND_CENTER = -5269.0 / 1800.0
_FD_SECOND = (5.0 / 3.0, -5.0 / 21.0, 5.0 / 126.0, -5.0 / 1008.0, 1.0 / 3150.0)


# ---------------------------------------------------------------------------
# per-end charts and gauge data


@dataclass(frozen=True)
class EndChart:
    """Local description of one puncture neighbourhood.

    For the punctures at 0 and 1 the chart coordinate is z itself; for the
    end at infinity it is x = 1/z and transported frames are conjugated by
    the index swap.  kernel_params packs the two rational functions of the
    gauge-fixed system as polynomial coefficients for kernel mode 4.
    """

    end: int
    puncture: complex
    inverted: bool
    r_out: float
    r_in: float
    kernel_params: np.ndarray
    phat: complex
    square_gap: complex

    def chart_gauss(self, x: complex) -> complex:
        """Gauss map of the frame system expressed in this chart."""
        if self.inverted:
            num = x * (4.0 - 2.0 * self.phat * x)
            den = (self.square_gap * x - 2.0 * self.phat) * x + 4.0
            return num / den
        den = 2.0 * x - self.phat
        return x + self.square_gap / (2.0 * den)

    def to_global(self, x: complex) -> complex:
        return 1.0 / x if self.inverted else x


def _pack6(coeffs) -> np.ndarray:
    """Pack up to six complex coefficients (highest degree first)."""
    out = np.zeros(12)
    shift = 6 - len(coeffs)
    if shift < 0:
        raise ValueError("polynomial degree exceeds the kernel's capacity")
    for i, c in enumerate(coeffs):
        c = complex(c)
        out[2 * (shift + i)] = c.real
        out[2 * (shift + i) + 1] = c.imag
    return out


def _gauge_params(end: int, c3: float, p: complex, s: complex) -> tuple[complex, np.ndarray]:
    """Chart puncture and packed mode-4 parameters for one end.

    qf is the curvature function times the squared chart distance to the
    puncture and gp the chart Gauss-map derivative; both stay bounded on
    the annulus, which is the whole point of the gauge.
    """
    if end == 0:
        p0 = 0.0 + 0.0j
        qf_num = [4.0 * c3, -4.0 * c3 * p, c3 * p * p]
        qf_den = [8.0, -16.0, 8.0]
    elif end == 1:
        p0 = 1.0 + 0.0j
        qf_num = [4.0 * c3, -4.0 * c3 * p, c3 * p * p]
        qf_den = [8.0, 0.0, 0.0]
    else:
        p0 = 0.0 + 0.0j
        qf_num = [
            c3 * s * s,
            -4.0 * c3 * p * s,
            c3 * (4.0 * p * p + 8.0 * s),
            -16.0 * c3 * p,
            16.0 * c3,
        ]
        qf_den = [32.0, -64.0, 32.0]
    if end == 2:
        gp_num = [4.0 * p * p - 4.0 * s, -16.0 * p, 16.0]
        gp_den = [s * s, -4.0 * p * s, 4.0 * p * p + 8.0 * s, -16.0 * p, 16.0]
    else:
        gp_num = [4.0, -4.0 * p, p * p - s]
        gp_den = [4.0, -4.0 * p, p * p]
    params = np.concatenate(
        [
            np.array([p0.real, p0.imag]),
            _pack6(qf_num),
            _pack6(qf_den),
            _pack6(gp_num),
            _pack6(gp_den),
        ]
    )
    return p0, params


def end_charts(data: TrinoidData, tol: Tolerances | None = None) -> tuple[EndChart, EndChart, EndChart]:
    """Chart records for the three ends, with safe annulus radii.

    The outer radius keeps 55% clearance from the other punctures and 25%
    from the poles of the chart Gauss-map derivative (the point where the
    scalar reduction has its apparent singularity, and its images under
    inversion), so the gauge-fixed system stays uniformly regular.
    """
    tol = tol or default_tolerances()
    c3 = data.hopf.c[2]
    p = data.q.total
    s = data.q.square_gap
    pole_dist = [abs(0.5 * p), abs(0.5 * p - 1.0)]
    roots = solve_quadratic(s, -2.0 * p, 4.0 + 0.0j)
    finite = [abs(r) for r in roots if np.isfinite(r) and abs(r) > 0.0]
    pole_dist.append(min(finite) if finite else math.inf)
    charts = []
    for e in range(3):
        r_out = min(0.45, 0.75 * pole_dist[e])
        r_in = _INNER_RADIUS
        if r_out < 8.0 * r_in:
            raise ValueError(
                f"end {e + 1}: the Gauss-map pole sits at distance {pole_dist[e]:.3g} "
                "from the puncture, leaving no room for an annulus"
            )
        p0, params = _gauge_params(e, c3, p, s)
        charts.append(
            EndChart(
                end=e,
                puncture=p0,
                inverted=(e == 2),
                r_out=r_out,
                r_in=r_in,
                kernel_params=params,
                phat=p,
                square_gap=s,
            )
        )
    return tuple(charts)


# ---------------------------------------------------------------------------
# sampling grid


@dataclass(frozen=True)
class GridEdge:
    """One spanning-tree edge; a and b are chart points for the transport.

    kind "segment" integrates the raw system between z points a and b;
    "ring_arc" and "spoke" integrate the gauge-fixed system between the
    log-chart points a and b of the given end.
    """

    child: int
    parent: int
    kind: str
    end: int = -1
    a: complex = 0j
    b: complex = 0j


@dataclass(frozen=True)
class SampleGrid:
    """Vertices, spanning tree and triangulation of the sampling domain."""

    vertices: np.ndarray
    edges: tuple
    faces: np.ndarray
    rings: int
    sectors: int
    charts: tuple
    zeta: np.ndarray
    vertex_end: np.ndarray
    vertex_ring: np.ndarray
    vertex_sector: np.ndarray
    base_index: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def annulus_index(self, end: int, ring: int, sector: int) -> int:
        ns = self.sectors
        return (end * self.rings + ring) * ns + sector % ns


def _segment_edge(child, parent, za, zb, clearance):
    validate_path(segment(za, zb), (0.0 + 0.0j, 1.0 + 0.0j), clearance)
    return GridEdge(child=child, parent=parent, kind="segment", a=complex(za), b=complex(zb))


def sample_grid(
    data: TrinoidData,
    rings: int = 8,
    sectors: int = 48,
    tol: Tolerances | None = None,
) -> SampleGrid:
    """Polar annuli around the three punctures plus a triangulated core.

    Ring radii decrease geometrically from the clipped outer radius to
    1e-3, which roughly equidistributes mesh edge lengths in the blowing
    up end metric.  The core is a triangular lattice bounded by the outer
    annulus circles, triangulated together with the outermost rings so the
    two parts share vertices.  The spanning tree enters each annulus once
    through its outer ring and covers the core breadth-first.
    """
    tol = tol or default_tolerances()
    rings = int(rings)
    sectors = int(sectors)
    if rings < 2:
        raise ValueError("need at least two rings per end")
    if sectors < 3:
        raise ValueError("need at least three vertices per ring")
    charts = end_charts(data, tol)
    nr, ns = rings, sectors
    n_ann = 3 * nr * ns

    zeta = np.full(n_ann, np.nan + 0j, dtype=complex)
    vend = np.full(n_ann, -1, dtype=np.int64)
    vring = np.full(n_ann, -1, dtype=np.int64)
    vsec = np.full(n_ann, -1, dtype=np.int64)
    verts = np.zeros(n_ann, dtype=complex)
    dtheta = 2.0 * math.pi / ns
    for ch in charts:
        ratio = math.log(ch.r_in / ch.r_out) / (nr - 1)
        for k in range(nr):
            logr = math.log(ch.r_out) + ratio * k
            for i in range(ns):
                idx = (ch.end * nr + k) * ns + i
                zt = complex(logr, dtheta * i)
                zeta[idx] = zt
                vend[idx] = ch.end
                vring[idx] = k
                vsec[idx] = i
                verts[idx] = ch.to_global(ch.puncture + cmath.exp(zt))

    base_index = n_ann
    r_big = 1.0 / charts[2].r_out
    h = 2.8 * r_big / ns
    margin = 0.45 * h
    lattice = []
    rows = int(math.floor(r_big / (h * math.sqrt(3.0) / 2.0))) + 1
    for j in range(-rows, rows + 1):
        y = j * h * math.sqrt(3.0) / 2.0
        off = 0.5 * h if j % 2 else 0.0
        cols = int(math.floor((r_big + h) / h)) + 1
        for i in range(-cols, cols + 1):
            z = complex(i * h + off, y)
            if abs(z) > r_big - margin:
                continue
            if abs(z) < charts[0].r_out + margin:
                continue
            if abs(z - 1.0) < charts[1].r_out + margin:
                continue
            if abs(z - _BASE_POINT) < 0.35 * h:
                continue
            lattice.append(z)

    all_verts = np.concatenate([verts, [_BASE_POINT], np.array(lattice, dtype=complex)])
    zeta = np.concatenate([zeta, np.full(1 + len(lattice), np.nan + 0j)])
    vend = np.concatenate([vend, np.full(1 + len(lattice), -1, dtype=np.int64)])
    vring = np.concatenate([vring, np.full(1 + len(lattice), -1, dtype=np.int64)])
    vsec = np.concatenate([vsec, np.full(1 + len(lattice), -1, dtype=np.int64)])

    # triangulate the core over the outer rings, the base point and the lattice
    ring0_ids = [(e * nr) * ns + i for e in range(3) for i in range(ns)]
    local_ids = ring0_ids + [base_index] + list(range(base_index + 1, len(all_verts)))
    pts = np.column_stack(
        [all_verts[local_ids].real, all_verts[local_ids].imag]
    )
    tri = Delaunay(pts)
    local_to_global = np.array(local_ids, dtype=np.int64)
    core_faces = []
    for simplex in tri.simplices:
        gids = local_to_global[simplex]
        c = all_verts[gids].mean()
        if abs(c) <= charts[0].r_out or abs(c - 1.0) <= charts[1].r_out:
            continue
        if abs(c) >= r_big:
            continue
        core_faces.append(gids)

    faces = []
    for e in range(3):
        for k in range(nr - 1):
            for i in range(ns):
                a = (e * nr + k) * ns + i
                b = (e * nr + k) * ns + (i + 1) % ns
                cc = (e * nr + k + 1) * ns + (i + 1) % ns
                d = (e * nr + k + 1) * ns + i
                faces.append((a, b, cc))
                faces.append((a, cc, d))
    faces.extend(tuple(f) for f in core_faces)
    faces = np.array(faces, dtype=np.int64)

    clearance = tol.clearance_factor
    edges = []
    for ch in charts:
        anchor = (ch.end * nr) * ns
        edges.append(_segment_edge(anchor, base_index, _BASE_POINT, all_verts[anchor], clearance))
        for i in range(ns - 1):
            a = (ch.end * nr) * ns + i
            edges.append(
                GridEdge(child=a + 1, parent=a, kind="ring_arc", end=ch.end, a=zeta[a], b=zeta[a + 1])
            )
        for k in range(1, nr):
            for i in range(ns):
                child = (ch.end * nr + k) * ns + i
                parent = (ch.end * nr + k - 1) * ns + i
                edges.append(
                    GridEdge(
                        child=child, parent=parent, kind="spoke", end=ch.end,
                        a=zeta[parent], b=zeta[child],
                    )
                )

    # breadth-first tree over the surviving core triangulation
    adj: dict[int, set] = {}
    for f in core_faces:
        for u, v in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            adj.setdefault(int(u), set()).add(int(v))
            adj.setdefault(int(v), set()).add(int(u))
    sources = [base_index] + ring0_ids
    seen = set(sources)
    queue = deque(sources)
    while queue:
        u = queue.popleft()
        for v in sorted(adj.get(u, ())):
            if v in seen or v < base_index:
                continue
            seen.add(v)
            edges.append(_segment_edge(v, u, all_verts[u], all_verts[v], clearance))
            queue.append(v)
    unreachable = [v for v in range(base_index + 1, len(all_verts)) if v not in seen]
    if unreachable:
        raise ValueError(
            f"{len(unreachable)} core vertices are not reachable through the "
            "triangulation; the lattice spacing is too coarse for this geometry"
        )

    return SampleGrid(
        vertices=all_verts,
        edges=tuple(edges),
        faces=faces,
        rings=nr,
        sectors=ns,
        charts=charts,
        zeta=zeta,
        vertex_end=vend,
        vertex_ring=vring,
        vertex_sector=vsec,
        base_index=base_index,
    )


# ---------------------------------------------------------------------------
# frame transport


def _p_matrix(g: complex) -> np.ndarray:
    return np.array([[g, 1.0], [1.0, 0.0]], dtype=complex)


def _p_inverse(g: complex) -> np.ndarray:
    return np.array([[0.0, 1.0], [1.0, -g]], dtype=complex)


def _swap(m: np.ndarray) -> np.ndarray:
    """Conjugation by the index swap [[0,1],[1,0]]."""
    return np.array([[m[1, 1], m[1, 0]], [m[0, 1], m[0, 0]]], dtype=complex)


def _assemble_transfer(ch: EndChart, za: complex, zb: complex, t_v: np.ndarray) -> np.ndarray:
    """Turn a log-chart V transfer into the frame transfer between chart points.

    The V system has trace -1, so its transfer determinant is exactly
    exp(-(zb - za)); rescaling by the measured determinant removes the
    integrator's determinant drift, and the frame transfer then has unit
    determinant up to rounding.
    """
    xi_a = cmath.exp(za)
    xi_b = cmath.exp(zb)
    target = cmath.exp(-(zb - za))
    t_v = t_v * cmath.sqrt(target / det2(t_v))
    ga = ch.chart_gauss(ch.puncture + xi_a)
    gb = ch.chart_gauss(ch.puncture + xi_b)
    left = _p_matrix(gb) @ np.diag([1.0 + 0.0j, xi_b])
    right = np.diag([1.0 + 0.0j, 1.0 / xi_a]) @ _p_inverse(ga)
    m = left @ t_v @ right
    return _swap(m) if ch.inverted else m


@dataclass
class FrameTransport:
    """Transported frame at every grid vertex plus the ring transfer data.

    frames[v] is the solution of dF = A F with F = identity at the base
    point, continued along the spanning tree; it is one branch choice over
    the tree.  ring_arcs[e][j] is the frame transfer from sector j to j+1
    on the outer ring of end e (index j = sectors-1 closes the ring), and
    spokes[e][k-1][j] steps from ring k-1 to ring k at sector j.  Both are
    2 pi periodic in the sector index by construction, which is what makes
    branch-consistent continuation around a ring a pure matrix product.
    """

    grid: SampleGrid
    data: TrinoidData
    frames: np.ndarray
    ring_arcs: np.ndarray
    spokes: np.ndarray
    rtol: float = 1e-13
    stats: dict = field(default_factory=dict)
    _ext_cache: dict = field(default_factory=dict, repr=False)

    def frame(self, v: int) -> np.ndarray:
        return self.frames[v]

    def extended_ring(self, end: int, ring: int) -> tuple[np.ndarray, int]:
        """Frames along one ring continued one full turn both ways.

        Returns (values, offset): values[offset + j] is the analytic
        continuation of the frame to sector j for j in
        [-sectors-10, 2*sectors+10), reducing to the tree values on
        [0, sectors).
        """
        key = (end, ring)
        if key in self._ext_cache:
            return self._ext_cache[key]
        ns = self.grid.sectors
        off = ns + 10
        total = 3 * ns + 20
        if ring == 0:
            vals = np.empty((total, 2, 2), dtype=complex)
            anchor = self.grid.annulus_index(end, 0, 0)
            vals[off] = self.frames[anchor]
            for j in range(1, 2 * ns + 10):
                vals[off + j] = self.ring_arcs[end][(j - 1) % ns] @ vals[off + j - 1]
            for j in range(-1, -ns - 11, -1):
                vals[off + j] = inv2(self.ring_arcs[end][j % ns]) @ vals[off + j + 1]
        else:
            prev, _ = self.extended_ring(end, ring - 1)
            vals = np.empty((total, 2, 2), dtype=complex)
            for j in range(-ns - 10, 2 * ns + 10):
                vals[off + j] = self.spokes[end][ring - 1][j % ns] @ prev[off + j]
        self._ext_cache[key] = (vals, off)
        return vals, off

    def branch_frame(self, v: int, winding: int = 1) -> np.ndarray:
        """Frame at vertex v reached with extra windings around its puncture.

        Positive winding continues once more in the positive sector
        direction; the result differs from frames[v] by the ring monodromy,
        so comparing the two probes well-definedness of derived quantities.
        """
        end = int(self.grid.vertex_end[v])
        if end < 0:
            raise ValueError("branch continuation is defined for annulus vertices only")
        if abs(int(winding)) != 1:
            raise ValueError("only single windings are stored")
        ring = int(self.grid.vertex_ring[v])
        sec = int(self.grid.vertex_sector[v])
        vals, off = self.extended_ring(end, ring)
        return vals[off + sec + int(winding) * self.grid.sectors]


def transport_frame(
    data: TrinoidData,
    grid: SampleGrid,
    tol_ode: float | None = None,
    tol: Tolerances | None = None,
) -> FrameTransport:
    """Integrate the frame equation along the spanning tree from the base.

    The transport tolerance is the monodromy tolerance tightened by the
    configured factor, since mesh positions accumulate error over paths a
    few dozen edges deep.  Raises with the offending edge identified if the
    integrator stalls, and checks det F = 1 at every vertex afterwards.
    """
    tol = tol or default_tolerances()
    rtol = (tol_ode if tol_ode is not None else tol.ode) * tol.transport_tol_factor
    params0 = data.kernel_params()
    nr, ns = grid.rings, grid.sectors
    nv = grid.n_vertices
    frames = np.zeros((nv, 2, 2), dtype=complex)
    frames[grid.base_index] = np.eye(2)
    ring_arcs = np.zeros((3, ns, 2, 2), dtype=complex)
    spokes = np.zeros((3, max(nr - 1, 1), ns, 2, 2), dtype=complex)
    eye = np.eye(2, dtype=complex)
    stats: dict = {}

    def _run(path: Path, mode: int, params, edge_desc: str) -> np.ndarray:
        try:
            return run_kernel(path, mode, params, eye, rtol, stats)
        except StepUnderflow as exc:
            raise StepUnderflow(f"transport stalled on {edge_desc}: {exc}") from exc

    for edge in grid.edges:
        if edge.kind == "segment":
            t = _run(
                segment(edge.a, edge.b), 0, params0,
                f"segment edge {edge.parent}->{edge.child}",
            )
        else:
            ch = grid.charts[edge.end]
            t_v = _run(
                segment(edge.a, edge.b), 4, ch.kernel_params,
                f"{edge.kind} edge {edge.parent}->{edge.child} (end {edge.end + 1})",
            )
            t = _assemble_transfer(ch, edge.a, edge.b, t_v)
            if edge.kind == "ring_arc":
                ring_arcs[edge.end][int(grid.vertex_sector[edge.parent])] = t
            else:
                ring = int(grid.vertex_ring[edge.child])
                spokes[edge.end][ring - 1][int(grid.vertex_sector[edge.child])] = t
        frames[edge.child] = t @ frames[edge.parent]

    # one extra arc per end closes the outer ring across the seam
    for ch in grid.charts:
        a = grid.zeta[grid.annulus_index(ch.end, 0, ns - 1)]
        b = grid.zeta[grid.annulus_index(ch.end, 0, 0)] + 2.0j * math.pi
        t_v = _run(segment(a, b), 4, ch.kernel_params, f"seam arc (end {ch.end + 1})")
        ring_arcs[ch.end][ns - 1] = _assemble_transfer(ch, a, b, t_v)

    # The determinant of a large-entry frame is an ill-conditioned 2x2
    # evaluation (terms of size |F|^2 cancel to 1), so the conservation gate
    # scales with the squared Frobenius norm of each frame.
    det_defect = max(
        abs(det2_compensated(frames[v]) - 1.0) / max(1.0, fro(frames[v]) ** 2)
        for v in range(nv)
    )
    stats["max_det_defect"] = det_defect
    if det_defect > tol.det:
        raise NonSL2Input(
            f"transported frame determinant drifted to {det_defect:.3g} "
            f"(relative to squared frame norm), above {tol.det:.3g}"
        )
    return FrameTransport(
        grid=grid, data=data, frames=frames, ring_arcs=ring_arcs, spokes=spokes,
        rtol=rtol, stats=stats,
    )


# ---------------------------------------------------------------------------
# Weierstrass recovery


@dataclass(frozen=True)
class WeierstrassData:
    """Per-vertex induced data of the immersion.

    g and omega are the entries of F^{-1} dF/dz per its rank-one shape,
    dg the z derivative of g, and gauss_ratio the quotient of the first
    column entries of dF/dz, which must reproduce the hyperbolic Gauss
    map.  numeric marks vertices where everything came from finite
    differences of the transported frame (annulus rings); on core vertices
    the derivative comes from the defining connection, so those entries
    are consistency-free diagnostics.  null_defect measures how far
    F^{-1} dF/dz is from its required nilpotent rank-one shape.
    """

    g: np.ndarray
    omega: np.ndarray
    dg: np.ndarray
    gauss_ratio: np.ndarray
    numeric: np.ndarray
    null_defect: np.ndarray


def _connection_value(data: TrinoidData, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """The defining connection A(z) and its z derivative."""
    kap = data.hopf.c[2]
    den = 2.0 * z - data.q.total
    w = z - 1.0
    kap = kap * den * den / (8.0 * z * z * w * w)
    g = data.gauss(z)
    gp = data.gauss.deriv(z)
    n_g = np.array([[g, -g * g], [1.0, -g]], dtype=complex)
    n_gp = np.array([[gp, -2.0 * g * gp], [0.0, -gp]], dtype=complex)
    dlog = 4.0 / den - 2.0 / z - 2.0 / w
    return kap * n_g, kap * (dlog * n_g + n_gp)


def _micro_frames(
    ch: EndChart, f0: np.ndarray, zeta0: complex, delta: float, rtol: float
) -> list:
    """Frames at eleven points spaced delta in angle around one vertex.

    Each neighbour is reached by integrating the gauge-fixed system over a
    short log-chart segment starting from the vertex value, so the stencil
    input is transported data, not an evaluation of the connection.
    """
    vals = [None] * 11
    vals[5] = f0
    for side in (1, -1):
        prev = f0
        z_prev = zeta0
        for m in range(1, 6):
            z_next = zeta0 + 1j * side * m * delta
            t_v = run_kernel(segment(z_prev, z_next), 4, ch.kernel_params, np.eye(2), rtol)
            prev = _assemble_transfer(ch, z_prev, z_next, t_v) @ prev
            vals[5 + side * m] = prev
            z_prev = z_next
    return vals


def recover_weierstrass(
    frames: FrameTransport,
    data: TrinoidData | None = None,
    tol: Tolerances | None = None,
) -> WeierstrassData:
    """Extract (g, omega) from the transported frame and check its shape.

    On annulus vertices dF/dz and d2F/dz2 come from eleven-point stencils
    in the angular direction over frames integrated to micro-offsets of
    the vertex (spacing about one third of the grid spacing, where the
    order-ten truncation error drops below the shape tolerance with room
    to spare).  Only transported values enter, so agreement of omega dg
    with the defining quadratic differential is a genuine end-to-end test
    of the transport machinery.  F^{-1} dF/dz must be trace-free with
    determinant zero; a relative defect beyond the null_structure
    tolerance raises NullStructureViolation.  dg comes from the same two
    derivatives through d(F^{-1}F') = F^{-1}F'' - (F^{-1}F')^2, which
    avoids stacking stencils.  The subtractions in that identity lose
    roughly the squared frame norm in precision, so dg degrades far down
    an end when the half-angles are large and the frame grows fast; the
    pointwise residual of omega times dg against the defining quadratic
    differential makes any such loss visible per vertex.
    """
    data = data or frames.data
    tol = tol or default_tolerances()
    grid = frames.grid
    nr, ns = grid.rings, grid.sectors
    nv = grid.n_vertices
    g = np.zeros(nv, dtype=complex)
    omega = np.zeros(nv, dtype=complex)
    dg = np.zeros(nv, dtype=complex)
    ratio = np.zeros(nv, dtype=complex)
    numeric = np.zeros(nv, dtype=bool)
    defect = np.zeros(nv)
    delta = min(2.0 * math.pi / (3.0 * ns), 2.0 * math.pi / 144.0)

    for ch in grid.charts:
        for k in range(nr):
            for i in range(ns):
                vi = grid.annulus_index(ch.end, k, i)
                zeta0 = grid.zeta[vi]
                xi = cmath.exp(zeta0)
                vals = _micro_frames(ch, frames.frames[vi], zeta0, delta, frames.rtol)
                f_th = np.zeros((2, 2), dtype=complex)
                f_thth = _FD_SECOND_CENTER * vals[5]
                for m in range(1, 6):
                    f_th = f_th + _FD_FIRST[m - 1] * (vals[5 + m] - vals[5 - m])
                    f_thth = f_thth + _FD_SECOND[m - 1] * (vals[5 + m] + vals[5 - m])
                f_th /= delta
                f_thth /= delta * delta
                if ch.inverted:
                    zdot = -1j / xi
                    zddot = -1.0 / xi
                else:
                    zdot = 1j * xi
                    zddot = -xi
                f_z = f_th / zdot
                f_zz = (f_thth * zdot - f_th * zddot) / zdot**3
                f_inv = inv2(vals[5])
                m_rec = f_inv @ f_z
                om = m_rec[1, 0]
                gg = m_rec[0, 0] / om
                scale = fro(m_rec)
                dd = max(abs(m_rec[0, 1] + gg * gg * om), abs(m_rec[1, 1] + gg * om))
                c = 0 if abs(f_z[1, 0]) >= abs(f_z[1, 1]) else 1
                m_z = f_inv @ f_zz - m_rec @ m_rec
                g[vi] = gg
                omega[vi] = om
                dg[vi] = (m_z[0, 0] * om - m_rec[0, 0] * m_z[1, 0]) / (om * om)
                ratio[vi] = f_z[0, c] / f_z[1, c]
                defect[vi] = dd / scale if scale > 0.0 else math.inf
                numeric[vi] = True

    for v in range(nv):
        if numeric[v]:
            continue
        z = grid.vertices[v]
        a_val, a_der = _connection_value(data, z)
        f_here = frames.frames[v]
        f_inv = inv2(f_here)
        m = f_inv @ a_val @ f_here
        mp = f_inv @ a_der @ f_here
        om = m[1, 0]
        g[v] = m[0, 0] / om
        omega[v] = om
        dg[v] = (mp[0, 0] * m[1, 0] - m[0, 0] * mp[1, 0]) / (om * om)
        ratio[v] = data.gauss(z)
        defect[v] = 0.0

    worst = float(np.max(defect[numeric])) if numeric.any() else 0.0
    if worst > tol.null_structure:
        v_bad = int(np.argmax(np.where(numeric, defect, -1.0)))
        raise NullStructureViolation(
            f"frame derivative at vertex {v_bad} (z = {grid.vertices[v_bad]:.4g}) "
            f"violates the rank-one shape by {worst:.3g}, above {tol.null_structure:.3g}"
        )
    return WeierstrassData(
        g=g, omega=omega, dg=dg, gauss_ratio=ratio, numeric=numeric, null_defect=defect
    )


# ---------------------------------------------------------------------------
# mesh assembly


@dataclass(frozen=True)
class SurfaceMesh:
    """Triangle mesh of the immersion in the Poincare ball.

    positions holds ball coordinates, minkowski the hyperboloid lift;
    diagnostics carries per-vertex scalars: abs_g, conformal_factor
    (the induced metric density against |dz|^2), abs_hopf, and quality
    (log10 of the relative omega dg residual where it was measured,
    -16 elsewhere).
    """

    positions: np.ndarray
    minkowski: np.ndarray
    faces: np.ndarray
    diagnostics: dict
    normals: np.ndarray | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    def h3_point(self, v: int):
        from .algebra import H3Point

        return H3Point(minkowski=self.minkowski[v], ball=self.positions[v])


def build_mesh(
    data: TrinoidData,
    conjugator: np.ndarray,
    grid: SampleGrid,
    transport: FrameTransport | None = None,
    weier: WeierstrassData | None = None,
    tol: Tolerances | None = None,
) -> SurfaceMesh:
    """Project the unitarized frame to the Poincare ball over the grid.

    The frame is multiplied on the right by the inverse of the conjugator:
    with a chosen so that a rho a^{-1} is unitary for every monodromy
    generator rho, continuation around a puncture turns F a^{-1} into
    F a^{-1} (a rho a^{-1}), a right rotation, which the Hermitian-square
    projection ignores.  That is exactly the well-definedness mechanism
    the doubled-path checks probe.
    """
    tol = tol or default_tolerances()
    transport = transport or transport_frame(data, grid, tol=tol)
    weier = weier or recover_weierstrass(transport, data, tol)
    right = inv2(np.asarray(conjugator, dtype=complex))
    nv = grid.n_vertices
    ball = np.zeros((nv, 3))
    mink = np.zeros((nv, 4))
    for v in range(nv):
        pt = project_h3(transport.frames[v] @ right, tol)
        ball[v] = pt.ball
        mink[v] = pt.minkowski
    radius = np.linalg.norm(ball, axis=1)
    if radius.max() >= 1.0:
        raise ValueError("a mesh position escaped the unit ball")
    hopf_abs = np.array([abs(data.hopf(z)) for z in grid.vertices])
    resid = np.abs(weier.omega * weier.dg - np.array([data.hopf(z) for z in grid.vertices]))
    rel = np.where(hopf_abs > 0.0, resid / hopf_abs, np.inf)
    quality = np.full(nv, -16.0)
    mask = weier.numeric & (rel > 1e-16)
    quality[mask] = np.log10(rel[mask])
    diagnostics = {
        "abs_g": np.abs(weier.g),
        "conformal_factor": (1.0 + np.abs(weier.g) ** 2) ** 2 * np.abs(weier.omega) ** 2,
        "abs_hopf": hopf_abs,
        "quality": quality,
    }
    return SurfaceMesh(positions=ball, minkowski=mink, faces=grid.faces, diagnostics=diagnostics)


def well_definedness_defect(
    transport: FrameTransport,
    conjugator: np.ndarray,
    vertex: int,
    winding: int = 1,
    tol: Tolerances | None = None,
) -> float:
    """Ball distance between the two branches of the mesh point at a vertex.

    The frame is continued to the same grid point once more around the
    enclosing puncture; with a unitarizing conjugator the projected point
    must not move, without one it generically does, so this one number is
    the positive and the negative control in one.
    """
    tol = tol or default_tolerances()
    right = inv2(np.asarray(conjugator, dtype=complex))
    p = project_h3(transport.frames[vertex] @ right, tol).ball
    q = project_h3(transport.branch_frame(vertex, winding) @ right, tol).ball
    return float(np.linalg.norm(p - q))


def second_fundamental_form(g, omega_density, hopf_value):
    """Coefficients (h11, h12, h22) of h = -Q - conj(Q) + ds^2.

    In real coordinates z = x + i y the form is h11 dx^2 + 2 h12 dx dy +
    h22 dy^2 with the metric density E = (1+|g|^2)^2 |omega|^2.  h is
    proportional to the metric exactly where the quadratic differential
    vanishes, which is the umbilic detector.
    """
    g = np.asarray(g, dtype=complex)
    omega_density = np.asarray(omega_density, dtype=complex)
    q = np.asarray(hopf_value, dtype=complex)
    e_metric = (1.0 + np.abs(g) ** 2) ** 2 * np.abs(omega_density) ** 2
    h11 = e_metric - 2.0 * q.real
    h12 = 2.0 * q.imag
    h22 = e_metric + 2.0 * q.real
    if h11.ndim == 0:
        return float(h11), float(h12), float(h22)
    return h11, h12, h22


# ---------------------------------------------------------------------------
# profile curves


@dataclass(frozen=True)
class ProfileCurve:
    """Plane section of the mesh: the longest chain plus all the others.

    points2d are coordinates in an orthonormal frame of the cutting plane,
    t the arclength parameter normalized to [0, 1] (including the closing
    edge when the chain is a cycle).
    """

    points2d: np.ndarray
    points3d: np.ndarray
    t: np.ndarray
    closed: bool
    chains: tuple


def _chain_crossings(positions: np.ndarray, faces: np.ndarray, signed: np.ndarray):
    """Assemble plane crossing points into ordered chains.

    Each mesh edge crossed by the plane yields one interpolated point;
    each face crossed twice links its two points.  Nodes therefore have
    degree at most two and the link graph decomposes into open chains and
    cycles, walked deterministically.
    """
    cross_point: dict = {}
    links: dict = {}

    def edge_key(i, j):
        return (i, j) if i < j else (j, i)

    for f in faces:
        keys = []
        for i, j in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
            si, sj = signed[i], signed[j]
            if si * sj < 0.0:
                key = edge_key(int(i), int(j))
                if key not in cross_point:
                    tpar = si / (si - sj)
                    cross_point[key] = positions[i] + tpar * (positions[j] - positions[i])
                keys.append(key)
        if len(keys) == 2:
            links.setdefault(keys[0], []).append(keys[1])
            links.setdefault(keys[1], []).append(keys[0])

    chains = []
    visited = set()
    endpoints = sorted(k for k, nb in links.items() if len(nb) == 1)
    starts = endpoints + sorted(links.keys())
    for start in starts:
        if start in visited or start not in links:
            continue
        chain = [start]
        visited.add(start)
        closed = False
        while True:
            nxt = [n for n in links[chain[-1]] if n not in visited]
            if not nxt:
                closed = len(links[chain[-1]]) == 2 and len(chain) > 2 and chain[0] in links[chain[-1]]
                break
            chain.append(nxt[0])
            visited.add(nxt[0])
        pts = np.array([cross_point[k] for k in chain])
        if len(pts) >= 2:
            chains.append((pts, closed))
    return chains


def profile_curve(
    data: TrinoidData,
    conjugator: np.ndarray,
    plane_normal,
    resolution: int = 8,
    mesh: SurfaceMesh | None = None,
    tol: Tolerances | None = None,
) -> ProfileCurve:
    """Intersect the surface with a plane through the ball origin.

    resolution sets the ring count of a freshly sampled grid (with six
    sectors per ring) when no mesh is supplied.  Raises EmptyIntersection
    when no mesh face crosses the plane.
    """
    tol = tol or default_tolerances()
    n = np.asarray(plane_normal, dtype=float)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise ValueError("plane normal must be nonzero")
    n = n / norm
    if mesh is None:
        grid = sample_grid(data, rings=int(resolution), sectors=6 * int(resolution), tol=tol)
        mesh = build_mesh(data, conjugator, grid, tol=tol)
    signed = mesh.positions @ n
    signed = np.where(signed == 0.0, 1e-15, signed)
    chains = _chain_crossings(mesh.positions, mesh.faces, signed)
    if not chains:
        raise EmptyIntersection("the cutting plane misses the sampled surface")

    def arclength(pts, closed):
        d = np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()
        if closed:
            d += np.linalg.norm(pts[0] - pts[-1])
        return d

    pts3, closed = max(chains, key=lambda c: arclength(*c))
    seglen = np.linalg.norm(np.diff(pts3, axis=0), axis=1)
    total = seglen.sum() + (np.linalg.norm(pts3[0] - pts3[-1]) if closed else 0.0)
    t = np.concatenate([[0.0], np.cumsum(seglen)]) / (total if total > 0.0 else 1.0)
    helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    pts2 = np.column_stack([pts3 @ e1, pts3 @ e2])
    return ProfileCurve(
        points2d=pts2,
        points3d=pts3,
        t=t,
        closed=closed,
        chains=tuple(c[0] for c in chains),
    )


# ---------------------------------------------------------------------------
# export


def export_obj(mesh: SurfaceMesh, path) -> None:
    """Wavefront OBJ with ball coordinates at nine significant digits."""
    with open(path, "w", encoding="ascii") as fh:
        for p in mesh.positions:
            fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def export_ply(mesh: SurfaceMesh, path, quality: bool = True) -> None:
    """Binary little-endian PLY, float64 positions, optional quality scalar."""
    nv = mesh.n_vertices
    nf = len(mesh.faces)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {nv}"]
    header += ["property float64 x", "property float64 y", "property float64 z"]
    if quality:
        header.append("property float64 quality")
    header += [f"element face {nf}", "property list uchar int32 vertex_indices", "end_header"]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if quality:
            block = np.column_stack([mesh.positions, mesh.diagnostics["quality"]])
        else:
            block = mesh.positions
        fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
        for f in mesh.faces:
            fh.write(struct.pack("<B3i", 3, int(f[0]), int(f[1]), int(f[2])))


def export_profile_csv(curve: ProfileCurve, path) -> None:
    """CSV rows t,x,y along the primary chain."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("t,x,y\n")
        for ti, (x, y) in zip(curve.t, curve.points2d):
            fh.write(f"{ti:.9g},{x:.9g},{y:.9g}\n")
