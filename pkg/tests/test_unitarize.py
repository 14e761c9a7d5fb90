"""Tests for invariant forms, conjugators, and unitarizer spaces."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from trinoid.algebra import fro, inv2, project_h3, su2_defect
from trinoid.errors import NotPositiveDefinite, NotUnitarizable
from trinoid.fuchsian import MonodromyRep, Source, monodromy, projective_equivalence
from trinoid.moduli import classify
from trinoid.trinoid_data import build_trinoid_data
from trinoid.unitarize import (
    SpaceKind,
    conjugator_from_form,
    family_representation,
    invariant_hermitian_form,
    unitarizer_space,
)

PI = math.pi
SYM23 = (2 * PI / 3, 2 * PI / 3, 2 * PI / 3)   # irreducible, unique trinoid
C1 = (2 * PI, PI / 2, PI / 2)                  # reducible, one-parameter family
C2 = (3 * PI, 3 * PI, 3 * PI)                  # reducible, three-parameter family

_REP_CACHE = {}


def _pipeline_rep(angles):
    if angles not in _REP_CACHE:
        _REP_CACHE[angles] = monodromy(build_trinoid_data(angles))
    return _REP_CACHE[angles]


def _synthetic_rep(rho1, rho2):
    return MonodromyRep(
        rho1=rho1,
        rho2=rho2,
        rho3=inv2(rho1 @ rho2),
        source=Source.MATRIX_ODE,
        err_estimate=0.0,
        det_drift=0.0,
        eigenvalue_defect=0.0,
    )


def _random_su2(rng):
    q = rng.standard_normal(4)
    q = q / np.linalg.norm(q)
    a = q[0] + 1j * q[1]
    b = q[2] + 1j * q[3]
    return np.array([[a, b], [-np.conj(b), np.conj(a)]])


def _random_sl2(rng):
    while True:
        m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        d = complex(np.linalg.det(m))
        if abs(d) > 0.3:
            return m / np.sqrt(d)


def test_su2_rep_has_identity_form():
    rng = np.random.default_rng(7)
    rep = _synthetic_rep(_random_su2(rng), _random_su2(rng))
    h = invariant_hermitian_form(rep)
    assert_allclose(h, np.eye(2), atol=1e-10)


def test_conjugated_su2_recovers_transported_form():
    # If rho_j = A u_j A^-1 with u_j unitary then (A^-1)* A^-1 is invariant,
    # and for a generic pair it is the only invariant form up to scale.
    rng = np.random.default_rng(11)
    for _ in range(5):
        a = _random_sl2(rng)
        ai = inv2(a)
        rep = _synthetic_rep(
            a @ _random_su2(rng) @ ai, a @ _random_su2(rng) @ ai
        )
        h = invariant_hermitian_form(rep)
        target = ai.conj().T @ ai
        target = (2.0 / np.trace(target).real) * target
        assert_allclose(h, target, atol=1e-7)


def test_hyperbolic_generator_not_unitarizable():
    # |eigenvalue| != 1 rules out any conjugate being unitary.
    hyp = np.diag([2.0 + 0j, 0.5 + 0j])
    with pytest.raises(NotUnitarizable):
        invariant_hermitian_form(_synthetic_rep(hyp, np.eye(2, dtype=complex)))
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=complex)
    with pytest.raises(NotUnitarizable):
        invariant_hermitian_form(_synthetic_rep(hyp, rot))


def test_conjugator_from_form_diagonal_and_scale():
    a = conjugator_from_form(np.diag([4.0 + 0j, 0.25 + 0j]))
    assert_allclose(a, np.diag([2.0, 0.5]), atol=1e-14)
    # The determinant normalization makes the result scale invariant.
    b = conjugator_from_form(0.37 * np.diag([4.0 + 0j, 0.25 + 0j]))
    assert_allclose(b, a, atol=1e-14)
    assert_allclose(
        conjugator_from_form(np.eye(2, dtype=complex)), np.eye(2), atol=1e-15
    )


def test_conjugator_from_form_rejects_bad_input():
    with pytest.raises(NotPositiveDefinite):
        conjugator_from_form(np.diag([1.0 + 0j, -1.0 + 0j]))
    with pytest.raises(ValueError):
        conjugator_from_form(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex))


def test_conjugator_round_trip_unitarizes():
    rng = np.random.default_rng(23)
    for _ in range(5):
        conj = _random_sl2(rng)
        ci = inv2(conj)
        rep = _synthetic_rep(
            conj @ _random_su2(rng) @ ci, conj @ _random_su2(rng) @ ci
        )
        a = conjugator_from_form(invariant_hermitian_form(rep))
        ai = inv2(a)
        for rho in (rep.rho1, rep.rho2, rep.rho3):
            assert su2_defect(a @ rho @ ai) < 1e-7


def test_family_representation_c1():
    rep = family_representation(C1)
    assert rep.source is Source.FAMILY
    assert_allclose(rep.rho1, -np.eye(2), atol=1e-15)
    assert_allclose(rep.rho2, np.diag([-1j, 1j]), atol=1e-15)
    assert_allclose(rep.rho3, np.diag([-1j, 1j]), atol=1e-15)
    assert_allclose(rep.rho1 @ rep.rho2 @ rep.rho3, np.eye(2), atol=1e-15)


def test_family_representation_c1_relabeled():
    # The integer angle may sit at any puncture; the diagonal model follows
    # the labeling and still closes the relation with the right eigenvalues.
    for angles in [(PI / 2, 2 * PI, PI / 2), (PI / 2, PI / 2, 2 * PI)]:
        rep = family_representation(angles)
        rhos = (rep.rho1, rep.rho2, rep.rho3)
        assert_allclose(rhos[0] @ rhos[1] @ rhos[2], np.eye(2), atol=1e-15)
        for b, rho in zip(angles, rhos):
            lam = sorted(np.linalg.eigvals(rho), key=lambda z: z.imag)
            want = sorted(
                [-np.exp(1j * b), -np.exp(-1j * b)], key=lambda z: z.imag
            )
            assert_allclose(lam, want, atol=1e-12)


def test_family_representation_c2():
    rep = family_representation(C2)
    for rho in (rep.rho1, rep.rho2, rep.rho3):
        assert_allclose(rho, np.eye(2), atol=1e-15)
    rep = family_representation((2 * PI, 3 * PI, 4 * PI))
    assert_allclose(rep.rho1, -np.eye(2), atol=1e-15)
    assert_allclose(rep.rho2, np.eye(2), atol=1e-15)
    assert_allclose(rep.rho3, -np.eye(2), atol=1e-15)


def test_family_representation_rejects_irreducible():
    with pytest.raises(ValueError):
        family_representation(SYM23)


def test_family_rep_matches_hypergeometric_projectively():
    # The diagonal model and the hypergeometric realization describe the
    # same projective representation for the reducible one-parameter class.
    from trinoid.fuchsian import hypergeometric_monodromy
    from trinoid.trinoid_data import hypergeometric_params

    fam = family_representation(C1)
    hyp = hypergeometric_monodromy(hypergeometric_params(C1))
    assert projective_equivalence(fam, hyp)


def test_invariant_form_solution_space_dimensions():
    # Stack the real-linear invariance system by hand: one dimension of
    # solutions for an irreducible representation, two for the diagonal
    # family model.
    from trinoid.unitarize import _HERM_BASIS, _herm_to_vec

    def nullity(rep):
        rows = np.empty((8, 4))
        for i, rho in enumerate((rep.rho1, rep.rho2)):
            for k, basis in enumerate(_HERM_BASIS):
                image = rho.conj().T @ basis @ rho - basis
                rows[4 * i : 4 * i + 4, k] = _herm_to_vec(image)
        sv = np.linalg.svd(rows, compute_uv=False)
        return int(np.sum(sv <= 1e-7 * max(sv[0], 1.0)))

    assert nullity(_pipeline_rep(SYM23)) == 1
    assert nullity(family_representation(C1)) == 2


def test_unitarizer_space_single_point():
    rep = _pipeline_rep(SYM23)
    space = unitarizer_space(rep, SYM23)
    assert space.kind is SpaceKind.SINGLE_POINT
    assert space.dim == 0
    assert space.dim == classify(SYM23).dimension
    assert abs(complex(np.linalg.det(space.base_conjugator)) - 1.0) < 1e-10
    a = space.sample([])
    assert_allclose(a, space.base_conjugator, atol=1e-15)
    ai = inv2(a)
    for rho in (rep.rho1, rep.rho2, rep.rho3):
        assert su2_defect(a @ rho @ ai) < 1e-6


def test_unitarizer_space_geodesic_line():
    rep = family_representation(C1)
    space = unitarizer_space(rep, C1)
    assert space.kind is SpaceKind.GEODESIC_LINE
    assert space.dim == 1
    assert space.dim == classify(C1).dimension
    base_norm = fro(space.base_conjugator)
    for t in np.linspace(-3.0, 3.0, 21):
        a = space.sample(t)
        ai = inv2(a)
        for rho in (rep.rho1, rep.rho2, rep.rho3):
            assert su2_defect(a @ rho @ ai) < 1e-6
        # The parameter origin is the norm-minimal point on the line.
        assert fro(a) >= base_norm - 1e-12
    assert_allclose(space.sample(0.0), space.base_conjugator, atol=1e-15)


def test_unitarizer_space_all_of_h3():
    rep = _pipeline_rep(C2)
    space = unitarizer_space(rep, C2)
    assert space.kind is SpaceKind.ALL_OF_H3
    assert space.dim == 3
    assert space.dim == classify(C2).dimension
    assert_allclose(space.base_conjugator, np.eye(2), atol=1e-15)
    rng = np.random.default_rng(31)
    for _ in range(20):
        p = rng.uniform(-0.4, 0.4, size=3)
        a = space.sample(p)
        ai = inv2(a)
        for rho in (rep.rho1, rep.rho2, rep.rho3):
            assert su2_defect(a @ rho @ ai) < 1e-6
        # The chart inverts the ball projection exactly.
        assert_allclose(project_h3(a).ball, p, atol=1e-10)
    with pytest.raises(ValueError):
        space.sample([1.0, 0.0, 0.0])


def test_unitarizer_space_sample_shape_checked():
    space = unitarizer_space(family_representation(C1), C1)
    with pytest.raises(ValueError):
        space.sample([0.1, 0.2])


def test_unitarizer_space_equivariance_single_point():
    # Conjugating the representation by A moves the unique unitarizing
    # point by A: the Hermitian squares are related by congruence.
    rng = np.random.default_rng(41)
    rep = _pipeline_rep(SYM23)
    a1 = unitarizer_space(rep, SYM23).base_conjugator
    conj = _random_sl2(rng)
    ci = inv2(conj)
    rep2 = _synthetic_rep(conj @ rep.rho1 @ ci, conj @ rep.rho2 @ ci)
    a2 = unitarizer_space(rep2, SYM23).base_conjugator
    left = a2.conj().T @ a2
    right = ci.conj().T @ (a1.conj().T @ a1) @ ci
    assert_allclose(left / np.trace(left), right / np.trace(right), atol=1e-6)


def test_unitarizer_space_equivariance_geodesic_line():
    # Conjugating by A maps the geodesic of conjugators onto the geodesic
    # of the original: pulled back by A, every sample still unitarizes the
    # diagonal model, and its Hermitian square is diagonal in the model's
    # eigenbasis (here the standard basis).
    rng = np.random.default_rng(43)
    fam = family_representation(C1)
    conj = _random_sl2(rng)
    ci = inv2(conj)
    rep2 = _synthetic_rep(conj @ fam.rho1 @ ci, conj @ fam.rho2 @ ci)
    space2 = unitarizer_space(rep2, C1)
    assert space2.kind is SpaceKind.GEODESIC_LINE
    for t in np.linspace(-1.0, 1.0, 7):
        pulled = space2.sample(t) @ conj
        pi = inv2(pulled)
        for rho in (fam.rho1, fam.rho2, fam.rho3):
            assert su2_defect(pulled @ rho @ pi) < 1e-6
        q = pulled.conj().T @ pulled
        assert abs(q[0, 1]) < 1e-8 * fro(q)


def test_c1_normal_form_rep_is_not_unitarizable():
    # At this triple the integer-angle puncture of the normal-form equation
    # is resonant: the local solution picks up a logarithm and the loop
    # transport degenerates to a Jordan block.  No conjugate of a
    # nontrivial Jordan block is unitary, so the ODE-sourced representation
    # has no invariant positive definite form.  The trinoid family itself
    # carries the diagonal model tested above instead.
    rep = _pipeline_rep(C1)
    with pytest.raises(NotUnitarizable):
        invariant_hermitian_form(rep)
    with pytest.raises(NotUnitarizable):
        unitarizer_space(rep, C1)


def test_family_rep_form_is_identity():
    h = invariant_hermitian_form(family_representation(C1))
    assert_allclose(h, np.eye(2), atol=1e-14)
