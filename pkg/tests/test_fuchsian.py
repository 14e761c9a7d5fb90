"""Path plumbing, transport oracles, and loop monodromy."""

import cmath
import math

import numpy as np
import numpy.testing as npt
import pytest

from trinoid.errors import SingularPathPoint, StepUnderflow
from trinoid.fuchsian import (
    Path,
    Source,
    apparent_point_check,
    choose_base_point,
    circle,
    concat,
    hypergeometric_monodromy,
    integrate_matrix_ode,
    integrate_scalar_ode,
    make_path_plan,
    monodromy,
    path_clearance,
    projective_equivalence,
    projective_intertwiner,
    segment,
    validate_path,
)
from trinoid.trinoid_data import build_trinoid_data, hypergeometric_params

SYM23 = (2 * math.pi / 3,) * 3
SYM12 = (math.pi / 2,) * 3
C1 = (2 * math.pi, math.pi / 2, math.pi / 2)
C2 = (3 * math.pi,) * 3


def _rand_sl2(rng):
    while True:
        m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        d = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        if abs(d) > 0.1:
            return m / np.sqrt(d)


def test_path_endpoints_length_reversal():
    s = segment(0.0, 1.0 + 1.0j)
    assert s.start == 0.0
    assert s.end == 1.0 + 1.0j
    npt.assert_allclose(s.length(), math.sqrt(2.0))

    c = circle(0.5j, 2.0, start_angle=0.3)
    assert abs(c.start - c.end) < 1e-15
    npt.assert_allclose(c.length(), 4.0 * math.pi)

    p = concat(s, segment(1.0 + 1.0j, 2.0))
    assert p.start == 0.0
    assert p.end == 2.0
    r = p.reversed()
    assert r.start == 2.0
    assert r.end == 0.0
    npt.assert_allclose(r.length(), p.length())


def test_path_clearance_analytic():
    # circle of radius 1 about 0: distance to an outside point is |x| - 1
    npt.assert_allclose(path_clearance(circle(0.0, 1.0), [3.0]), 2.0)
    npt.assert_allclose(path_clearance(circle(0.0, 1.0), [0.0]), 1.0)
    # segment [0,1]: interior projection and endpoint clamp
    npt.assert_allclose(path_clearance(segment(0.0, 1.0), [0.5 + 1.0j]), 1.0)
    npt.assert_allclose(path_clearance(segment(0.0, 1.0), [-1.0]), 1.0)
    # quarter arc from angle 0 to pi/2: the point -1 sees the endpoint i
    quarter = Path((("arc", 0.0 + 0.0j, 1.0, 0.0, math.pi / 2),))
    npt.assert_allclose(path_clearance(quarter, [-1.0]), math.sqrt(2.0))


def test_validate_path_raises():
    with pytest.raises(SingularPathPoint):
        validate_path(segment(0.0, 1.0), [0.5 + 0.01j], clearance=0.05)
    # clearance satisfied: no raise
    validate_path(segment(0.0, 1.0), [0.5 + 0.2j], clearance=0.05)


def test_choose_base_point_default_and_fallback():
    assert choose_base_point([0.0, 1.0], 0.05) == 0.5 + 0.5j
    # the default sits on the singular set: fallback must move away and
    # keep at least the default's clearance floor from every point
    pts = [0.0, 1.0, 0.5 + 0.5j]
    z = choose_base_point(pts, 0.05)
    assert z != 0.5 + 0.5j
    assert min(abs(z - s) for s in pts) >= 0.1


def test_make_path_plan_geometry():
    data = build_trinoid_data(SYM23)
    plan = make_path_plan(data)
    assert plan.base_point == 0.5 + 0.5j
    for loop in plan.loops:
        assert loop.start == plan.base_point
        assert loop.end == plan.base_point
        assert path_clearance(loop, plan.singular_points) >= plan.clearance - 1e-12
        arcs = [p for p in loop.pieces if p[0] == "arc"]
        assert len(arcs) == 1
        # positively oriented full turn
        npt.assert_allclose(arcs[0][4] - arcs[0][3], 2 * math.pi)


def test_base_point_override_and_rejection():
    data = build_trinoid_data(SYM23)
    plan = make_path_plan(data, base_point=0.6 + 0.4j)
    assert plan.base_point == 0.6 + 0.4j
    with pytest.raises(SingularPathPoint):
        make_path_plan(data, base_point=1e-8 + 0.0j)


def test_zero_length_and_reversal_transport():
    data = build_trinoid_data(SYM23)
    z0 = 0.5 + 0.5j
    p0 = integrate_matrix_ode(data, segment(z0, z0), np.eye(2, dtype=complex))
    npt.assert_allclose(p0, np.eye(2), atol=1e-15)

    out = segment(z0, 2.0 + 1.0j)
    back = out.reversed()
    p = integrate_matrix_ode(data, concat(out, back), np.eye(2, dtype=complex))
    npt.assert_allclose(p, np.eye(2), atol=1e-9)


def test_det_conservation_long_path():
    # trace-free coefficient matrix conserves det along any admissible path;
    # a radius-3 circle has length 6*pi < 20 and clears every singular point
    data = build_trinoid_data(SYM23)
    loop = circle(0.5, 3.0)
    p = integrate_matrix_ode(data, loop, np.eye(2, dtype=complex))
    d = p[0, 0] * p[1, 1] - p[0, 1] * p[1, 0]
    assert abs(d - 1.0) < 1e-9


def test_scalar_wronskian_abel():
    # Abel's identity: det T = exp(-integral of r) for X'' + r X' + s X = 0
    data = build_trinoid_data(SYM23)
    a, b = 0.5 + 0.5j, 2.0 + 1.0j
    t = integrate_scalar_ode(data, segment(a, b))
    det_t = t[0, 0] * t[1, 1] - t[0, 1] * t[1, 0]
    p = data.q.total
    ts = np.linspace(0.0, 1.0, 4001)
    zs = a + ts * (b - a)
    r = 2.0 / zs + 2.0 / (zs - 1.0) - 4.0 / (2.0 * zs - p)
    integral = np.trapezoid(r, zs)
    npt.assert_allclose(det_t, np.exp(-integral), atol=1e-8)


def test_transfer_concatenation_order():
    data = build_trinoid_data(SYM23)
    p1 = segment(0.5 + 0.5j, 2.0 + 1.0j)
    p2 = segment(2.0 + 1.0j, 0.4 + 1.4j)
    t1 = integrate_scalar_ode(data, p1)
    t2 = integrate_scalar_ode(data, p2)
    t12 = integrate_scalar_ode(data, concat(p1, p2))
    npt.assert_allclose(t12, t2 @ t1, atol=1e-8)

    m1 = integrate_matrix_ode(data, p1, np.eye(2, dtype=complex))
    m2 = integrate_matrix_ode(data, p2, np.eye(2, dtype=complex))
    m12 = integrate_matrix_ode(data, concat(p1, p2), np.eye(2, dtype=complex))
    npt.assert_allclose(m12, m2 @ m1, atol=1e-8)


def test_monodromy_traces_and_invariants():
    # tr rho_j = -2 cos(B_j): equals 1 at B = 2pi/3 and 0 at B = pi/2
    for angles, expected_tr in ((SYM23, 1.0), (SYM12, 0.0)):
        data = build_trinoid_data(angles)
        rep = monodromy(data)
        for rho in (rep.rho1, rep.rho2, rep.rho3):
            npt.assert_allclose(np.trace(rho), expected_tr, atol=1e-6)
            d = rho[0, 0] * rho[1, 1] - rho[0, 1] * rho[1, 0]
            assert abs(d - 1.0) < 1e-8
        npt.assert_allclose(rep.rho1 @ rep.rho2 @ rep.rho3, np.eye(2), atol=1e-7)
        assert rep.eigenvalue_defect < 1e-6
        assert rep.det_drift < 1e-9


def test_loop_homotopy_invariance():
    data = build_trinoid_data(SYM23)
    rep_a = monodromy(data, plan=make_path_plan(data, radius_factor=0.25))
    rep_b = monodromy(data, plan=make_path_plan(data, radius_factor=0.15))
    npt.assert_allclose(rep_a.rho1, rep_b.rho1, atol=1e-8)
    npt.assert_allclose(rep_a.rho2, rep_b.rho2, atol=1e-8)


def test_step_halving_convergence():
    data = build_trinoid_data(SYM23)
    plan = make_path_plan(data)
    rep = monodromy(data, plan=plan, tol_ode=1e-8)
    rep_half = monodromy(data, plan=plan, tol_ode=5e-9)
    diff = max(
        np.max(np.abs(a - b))
        for a, b in ((rep.rho1, rep_half.rho1), (rep.rho2, rep_half.rho2))
    )
    assert diff < 10.0 * rep.err_estimate


def test_scalar_and_matrix_agree_projectively():
    for angles in (SYM23, SYM12, C1, C2):
        data = build_trinoid_data(angles)
        plan = make_path_plan(data)
        rep_m = monodromy(data, plan=plan, source=Source.MATRIX_ODE)
        rep_s = monodromy(data, plan=plan, source=Source.SCALAR_ODE)
        assert projective_equivalence(rep_m, rep_s), angles


def test_projective_equivalence_self_and_conjugate():
    data = build_trinoid_data(SYM23)
    rep = monodromy(data)
    assert projective_equivalence(rep, rep)
    rng = np.random.default_rng(5)
    a = _rand_sl2(rng)
    ai = np.linalg.inv(a)
    twisted = monodromy(data)
    conj = type(rep)(
        rho1=a @ rep.rho1 @ ai,
        rho2=-(a @ rep.rho2 @ ai),
        rho3=twisted.rho3,
        source=rep.source,
        err_estimate=rep.err_estimate,
        det_drift=rep.det_drift,
        eigenvalue_defect=rep.eigenvalue_defect,
    )
    result = projective_intertwiner(rep, conj)
    assert result is not None
    _, signs = result
    assert signs == (1.0, -1.0)


def test_projective_equivalence_rejects_unrelated():
    rep_23 = monodromy(build_trinoid_data(SYM23))
    rep_12 = monodromy(build_trinoid_data(SYM12))
    # traces 1 versus 0: no conjugation-with-signs can match them
    assert not projective_equivalence(rep_23, rep_12)


def test_hypergeometric_trace_match_symmetric():
    # for (a,b,c) = (3/4,1/4,1/2) the loop transports have the same traces
    # as the trinoid monodromy at B = (pi/2)^3, up to the projective sign
    params = hypergeometric_params(SYM12)
    assert (params.a, params.b, params.c) == (0.75, 0.25, 0.5)
    hyp = hypergeometric_monodromy(params)
    rep = monodromy(build_trinoid_data(SYM12))
    for gam, rho in ((hyp.rho1, rep.rho1), (hyp.rho2, rep.rho2), (hyp.rho3, rep.rho3)):
        assert min(
            abs(np.trace(gam) - np.trace(rho)), abs(np.trace(gam) + np.trace(rho))
        ) < 1e-6
        d = gam[0, 0] * gam[1, 1] - gam[0, 1] * gam[1, 0]
        assert abs(d - 1.0) < 1e-8
    npt.assert_allclose(hyp.rho1 @ hyp.rho2 @ hyp.rho3, np.eye(2), atol=1e-7)


def test_hypergeometric_local_eigenvalue():
    # exponents at 0 are {0, 1-c}: some eigenvalue of rho1 matches
    # e^{2 pi i (1-c)} up to the overall sign of the determinant root
    params = hypergeometric_params(SYM23)
    hyp = hypergeometric_monodromy(params)
    lam = np.linalg.eigvals(hyp.rho1)
    target = cmath.exp(2j * math.pi * (1.0 - params.c))
    best = min(min(abs(l - s * target) for l in lam) for s in (1.0, -1.0))
    assert best < 1e-6


def test_hypergeometric_matches_trinoid_irreducible():
    for angles in (SYM23, SYM12):
        rep = monodromy(build_trinoid_data(angles))
        hyp = hypergeometric_monodromy(hypergeometric_params(angles))
        assert projective_equivalence(rep, hyp), angles


def test_c2_projectively_trivial_and_matches_hypergeometric():
    # at B = (3pi)^3 every loop transport is the identity and the
    # hypergeometric side with (a,b,c) = (2,-1,-2) degenerates the same way
    rep = monodromy(build_trinoid_data(C2))
    for rho in (rep.rho1, rep.rho2, rep.rho3):
        npt.assert_allclose(rho, np.eye(2), atol=1e-8)
    hyp = hypergeometric_monodromy(hypergeometric_params(C2))
    for gam in (hyp.rho1, hyp.rho2, hyp.rho3):
        assert min(np.linalg.norm(gam - np.eye(2)), np.linalg.norm(gam + np.eye(2))) < 1e-6
    assert projective_equivalence(rep, hyp)


def test_c1_resonant_monodromy_is_logarithmic():
    # At B = (2pi, pi/2, pi/2) the indicial roots at z = 0 are 1/2 and -3/2.
    # The exponent gap is the integer 2 and the Frobenius recursion for the
    # smaller root is obstructed (the order-2 coefficient equation reduces
    # to 9/2 = 0), so the local monodromy is a genuine Jordan block: this
    # equation has a logarithmic solution at 0.  The hypergeometric
    # counterpart (a,b,c) = (0,-1/2,-1) is solved by X = 1 and by
    # 2(1-z)^{-1/2} + 2(1-z)^{1/2}, both single valued at 0, so its first
    # loop transport is exactly the identity.  The two equations share all
    # local exponents yet are NOT projectively equivalent; the equivalence
    # only returns once the diagonalizable family representation replaces
    # the logarithmic one (see test_unitarize).
    data = build_trinoid_data(C1)
    plan = make_path_plan(data)
    rep_m = monodromy(data, plan=plan, source=Source.MATRIX_ODE)
    rep_s = monodromy(data, plan=plan, source=Source.SCALAR_ODE)

    # Jordan block: eigenvalues are both -1 but the transport is far from -I
    assert np.linalg.norm(rep_m.rho1 + np.eye(2)) > 1.0
    assert rep_m.eigenvalue_defect < 1e-4
    assert projective_equivalence(rep_m, rep_s)

    params = hypergeometric_params(C1)
    assert (params.a, params.b, params.c) == (0.0, -0.5, -1.0)
    hyp = hypergeometric_monodromy(params)
    npt.assert_allclose(hyp.rho1, np.eye(2), atol=1e-6)
    assert not projective_equivalence(rep_s, hyp)


def test_apparent_points_carry_no_monodromy():
    for angles in (SYM23, C1):
        data = build_trinoid_data(angles)
        result = apparent_point_check(data)
        assert result["ok"], result
        for key in ("q1", "q2", "pole", "pole_scalar"):
            assert result[key] < 1e-6


def test_step_underflow_through_singularity():
    # a path straight through z = 0 defeats the step controller; clearance 0
    # disables the geometric pre-check so the integrator itself must bail
    data = build_trinoid_data(SYM23)
    with pytest.raises(StepUnderflow):
        integrate_matrix_ode(
            data,
            segment(0.5 + 0.5j, -0.5 - 0.5j),
            np.eye(2, dtype=complex),
            clearance=0.0,
        )
