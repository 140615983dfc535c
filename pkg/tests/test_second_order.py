"""Curvature certificates, the constrained quadratic form, and probes."""
from __future__ import annotations

import numpy as np
import pytest

from radoncert.errors import BoundaryAtomError, ConeViolation, DomainError
from radoncert.instances import make_stationary_problem
from radoncert.measures import DiscreteMeasure, Domain
from radoncert.model import Kernel, dual_variable
from radoncert.optimality import active_sets
from radoncert.second_order import (Direction, _cone_min_rayleigh,
                                    check_C_conditions, direction_image,
                                    hessian_certificate, ndc_probe,
                                    recovery_quotient, second_subderivative,
                                    soc_form, soc_min_eig)


@pytest.fixture(scope="module")
def touch():
    # dual touches +alpha at 0.75 with no mass there
    domain = Domain((0.0,), (1.0,))
    kernel = Kernel("gaussian", np.linspace(0.05, 0.95, 15)[:, None], 0.12)
    z = np.array([0.75])
    extra = [(kernel.value(z), 0.5),
             (kernel.jac(z)[:, 0], 0.0),
             (kernel.hess(z)[:, 0, 0], -10.0)]
    problem, u = make_stationary_problem(
        domain, kernel, [[0.3]], [1.0], 0.5,
        hessian_targets=[-12.0], extra_rows=extra)
    return problem, u, active_sets(problem, u)


def test_hessian_certificate_nondegenerate(bundled):
    inst = bundled["nondeg-0"]
    cert = hessian_certificate(inst.problem, inst.u)
    assert cert.passed
    assert cert.per_atom_theta == pytest.approx([14.0, 16.0], rel=1e-6)
    assert cert.theta == pytest.approx(14.0, rel=1e-6)
    assert np.array_equal(cert.signs, np.sign(inst.u.weights))


def test_hessian_certificate_flat_fails(bundled):
    inst = bundled["flat-0"]
    cert = hessian_certificate(inst.problem, inst.u)
    assert abs(cert.theta) <= 1e-6
    assert not cert.passed


def test_hessian_certificate_boundary_atom_raises(bundled):
    inst = bundled["nondeg-0"]
    u = DiscreteMeasure(inst.u.domain, [[0.0]], [1.0])
    with pytest.raises(BoundaryAtomError):
        hessian_certificate(inst.problem, u)


def test_hessian_certificate_empty_measure_vacuous(bundled):
    inst = bundled["nondeg-0"]
    u = DiscreteMeasure(inst.u.domain, np.zeros((0, 1)), np.zeros(0))
    cert = hessian_certificate(inst.problem, u)
    assert cert.passed and cert.theta == float("inf")


def test_direction_image_linear_and_manual(bundled):
    inst = bundled["nondeg-0"]
    prob, u = inst.problem, inst.u
    k = prob.kernel
    d1 = Direction(np.array([1.0, 0.0]), np.zeros((2, 1)))
    assert np.allclose(direction_image(prob, u, d1), k.value(u.positions[0]))
    d2 = Direction(np.zeros(2), np.array([[0.0], [2.0]]))
    assert np.allclose(direction_image(prob, u, d2),
                       2.0 * k.jac(u.positions[1])[:, 0])
    d3 = Direction(np.array([1.0, 0.0]), np.array([[0.0], [2.0]]),
                   mu_plus=((np.array([0.5]), 0.3),))
    assert np.allclose(direction_image(prob, u, d3),
                       direction_image(prob, u, d1)
                       + direction_image(prob, u, d2)
                       + 0.3 * k.value(np.array([0.5])))


def test_soc_form_symmetric_and_bilinear(bundled):
    inst = bundled["nondeg-0"]
    sets = active_sets(inst.problem, inst.u)
    rng = np.random.default_rng(7)
    for _ in range(5):
        d1 = Direction(rng.normal(size=2), rng.normal(size=(2, 1)))
        d2 = Direction(rng.normal(size=2), rng.normal(size=(2, 1)))
        ab = soc_form(inst.problem, inst.u, sets, d1, d2)
        ba = soc_form(inst.problem, inst.u, sets, d2, d1)
        assert ab == pytest.approx(ba, abs=1e-12)
        scaled = Direction(2.0 * d1.c, 2.0 * d1.V)
        assert soc_form(inst.problem, inst.u, sets, scaled, d2) \
            == pytest.approx(2.0 * ab, rel=1e-10, abs=1e-12)


def test_soc_form_rejects_negative_cone_weight(bundled):
    inst = bundled["nondeg-0"]
    sets = active_sets(inst.problem, inst.u)
    bad = Direction(np.zeros(2), np.zeros((2, 1)),
                    mu_plus=((np.array([0.5]), -0.5),))
    ok = Direction(np.zeros(2), np.zeros((2, 1)))
    with pytest.raises(ConeViolation):
        soc_form(inst.problem, inst.u, sets, bad, ok)


def test_soc_form_zero_weight_extra_atom_is_inert(bundled):
    inst = bundled["nondeg-0"]
    sets = active_sets(inst.problem, inst.u)
    d1 = Direction(np.array([0.3, -0.2]), np.array([[0.5], [0.1]]))
    d1z = Direction(d1.c, d1.V, mu_plus=((np.array([0.6]), 0.0),))
    d2 = Direction(np.array([-0.1, 0.4]), np.array([[0.2], [-0.3]]))
    a = soc_form(inst.problem, inst.u, sets, d1, d2)
    b = soc_form(inst.problem, inst.u, sets, d1z, d2)
    assert a == pytest.approx(b, abs=1e-12)


def test_soc_min_eig_single_spike_matches_manual_2x2(bundled):
    # one interior atom, no touching sets: the direction space is exactly
    # (weight, velocity) and the form matrix can be written down by hand
    inst = bundled["nondeg-1"]
    prob, u = inst.problem, inst.u
    sets = active_sets(prob, u)
    assert not sets.has_touching_sets
    x0, w = u.positions[0], float(u.weights[0])
    kv = prob.kernel.value(x0)
    kj = prob.kernel.jac(x0)[:, 0]
    ppp = float(dual_variable(prob, u).hess(x0)[0, 0])
    M = np.array([[kv @ kv, kv @ kj],
                  [kv @ kj, kj @ kj - ppp / w]])
    rep = soc_min_eig(prob, u, sets)
    assert rep.exact and rep.dimension == 2
    assert rep.value == pytest.approx(float(np.min(np.linalg.eigvalsh(M))),
                                      abs=1e-10)


def test_cone_min_rayleigh_vertex_and_interior():
    M = np.array([[1.0, 2.0], [2.0, 1.0]])
    # unconstrained minimum -1 sits at (1, -1)/sqrt(2); with both
    # coordinates cone-constrained the best admissible point is a vertex
    free = _cone_min_rayleigh(M, np.array([False, False]))
    assert free == pytest.approx(-1.0, abs=1e-8)
    both = _cone_min_rayleigh(M, np.array([True, True]))
    assert both == pytest.approx(1.0, abs=1e-8)
    # constraining only one coordinate leaves a sign flip available
    one = _cone_min_rayleigh(M, np.array([False, True]))
    assert one == pytest.approx(-1.0, abs=1e-8)


def test_cone_min_rayleigh_vs_sampled_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(5):
        A = rng.normal(size=(4, 4))
        M = 0.5 * (A + A.T)
        mask = np.array([True, False, True, False])
        got = _cone_min_rayleigh(M, mask)
        X = rng.normal(size=(200_000, 4))
        X[:, mask] = np.abs(X[:, mask])
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        brute = float(np.min(np.einsum("ni,ij,nj->n", X, M, X)))
        assert got <= brute + 1e-6
        assert got >= float(np.min(np.linalg.eigvalsh(M))) - 1e-8


def test_check_C_conditions_nondegenerate(bundled):
    for name in ("nondeg-0", "nondeg-1", "nondeg-2", "nondeg-3", "nondeg-4"):
        inst = bundled[name]
        sets = active_sets(inst.problem, inst.u)
        rep = check_C_conditions(inst.problem, inst.u, sets)
        assert rep.theta_passed and rep.b1, (name, rep)
        assert rep.soc_exact and not rep.sample_relative
        assert rep.c1 and rep.c3 and rep.c4, name
        assert rep.loss_convex


def test_check_C_conditions_flat(bundled):
    inst = bundled["flat-0"]
    sets = active_sets(inst.problem, inst.u)
    rep = check_C_conditions(inst.problem, inst.u, sets)
    assert not rep.theta_passed
    assert not rep.b1
    # the failure is the curvature, not the quadratic form
    assert rep.soc_min_eig > 0.0


def test_check_C_conditions_duplicated_columns(bundled):
    inst = bundled["dup-0"]
    sets = active_sets(inst.problem, inst.u)
    rep = check_C_conditions(inst.problem, inst.u, sets)
    assert rep.theta_passed
    # antialigned kernel columns: the weight pair (1, 1) has zero image
    assert abs(rep.soc_min_eig) <= 1e-8
    assert not rep.b1
    assert abs(rep.c3_min_eig) <= 1e-8 and not rep.c3
    assert rep.c4_min_sv <= 1e-8 and not rep.c4


def test_c3_agrees_with_b1_on_random_designs():
    # with no touching sets and quadratic loss the Gram condition and the
    # full form must reach the same verdict
    domain = Domain((0.0,), (1.0,))
    kernel = Kernel("gaussian", np.linspace(0.05, 0.95, 15)[:, None], 0.12)
    rng = np.random.default_rng(23)
    built = 0
    for _ in range(20):
        n = int(rng.integers(1, 3))
        if n == 1:
            pos = [[float(rng.uniform(0.25, 0.75))]]
        else:
            a = float(rng.uniform(0.15, 0.45))
            pos = [[a], [a + float(rng.uniform(0.3, 0.4))]]
        wts = rng.choice([-1.0, 1.0], size=n) * rng.uniform(0.7, 1.3, size=n)
        hts = [-float(rng.uniform(10.0, 20.0)) for _ in range(n)]
        try:
            problem, u = make_stationary_problem(
                domain, kernel, pos, wts, 0.5, hessian_targets=hts)
        except ValueError:
            continue
        sets = active_sets(problem, u)
        if sets.has_touching_sets:
            continue
        rep = check_C_conditions(problem, u, sets)
        assert rep.b1 == rep.c3, (pos, wts, rep)
        built += 1
    assert built >= 10


def test_second_subderivative_admissible_and_inadmissible(touch):
    problem, u, sets = touch
    dual = dual_variable(problem, u)
    V = np.array([[0.7]])
    d_ok = Direction(np.array([0.2]), V,
                     mu_plus=((sets.i_plus[0], 0.4),))
    val = second_subderivative(problem, u, sets, d_ok)
    manual = -float(V[0] @ dual.hess(u.positions[0]) @ V[0]) / u.weights[0]
    assert val == pytest.approx(manual, rel=1e-9)
    # mass off the detected sets, or on the wrong-signed one, is forbidden
    off = Direction(np.array([0.0]), np.zeros((1, 1)),
                    mu_plus=((np.array([0.6]), 0.4),))
    assert second_subderivative(problem, u, sets, off) == float("inf")
    wrong = Direction(np.array([0.0]), np.zeros((1, 1)),
                      mu_minus=((sets.i_plus[0], 0.4),))
    assert second_subderivative(problem, u, sets, wrong) == float("inf")
    neg = Direction(np.array([0.0]), np.zeros((1, 1)),
                    mu_plus=((sets.i_plus[0], -0.1),))
    assert second_subderivative(problem, u, sets, neg) == float("inf")
    # zero-weight entries anywhere are inert, not inadmissible
    zed = Direction(np.array([0.2]), V,
                    mu_plus=((np.array([0.6]), 0.0),))
    assert second_subderivative(problem, u, sets, zed) \
        == pytest.approx(manual, rel=1e-9)


def test_recovery_quotient_weight_only_vanishes(bundled):
    # pure weight directions carry no curvature: the quotient is rounding
    inst = bundled["nondeg-1"]
    for c in (0.5, -0.3):
        q = recovery_quotient(inst.problem, inst.u, 0, [0.0], c, 1e-2)
        assert abs(q) <= 1e-9


def test_recovery_quotient_first_order_in_t(bundled):
    inst = bundled["nondeg-0"]
    dual = dual_variable(inst.problem, inst.u)
    rng = np.random.default_rng(13)
    for j in range(inst.u.num_atoms):
        w = float(inst.u.weights[j])
        H = dual.hess(inst.u.positions[j])
        for _ in range(3):
            V = rng.normal(size=1)
            c = float(rng.normal())
            target = -float(V @ H @ V) / w
            e1 = abs(recovery_quotient(inst.problem, inst.u, j, V, c, 1e-2)
                     - target)
            e2 = abs(recovery_quotient(inst.problem, inst.u, j, V, c, 5e-3)
                     - target)
            # first order in t: halving t roughly halves the error
            assert e2 < e1
            if e2 > 1e-12:
                assert 1.2 <= e1 / e2 <= 3.0


def test_recovery_quotient_argument_errors(bundled):
    inst = bundled["nondeg-1"]
    with pytest.raises(IndexError):
        recovery_quotient(inst.problem, inst.u, 5, [0.1], 0.0, 1e-2)
    with pytest.raises(ValueError):
        recovery_quotient(inst.problem, inst.u, 0, [0.1], 0.0, -1e-2)
    with pytest.raises(DomainError):
        recovery_quotient(inst.problem, inst.u, 0, [10.0], 0.0, 0.5)


def test_ndc_probe_matches_curvature(bundled):
    for name in ("nondeg-0", "nondeg-3"):
        inst = bundled[name]
        dual = dual_variable(inst.problem, inst.u)
        d = inst.problem.domain.dim
        rng = np.random.default_rng(17)
        for j in range(inst.u.num_atoms):
            lam = float(inst.u.weights[j])
            s = float(np.sign(dual.value(inst.u.positions[j])))
            H = dual.hess(inst.u.positions[j])
            for _ in range(5):
                v = rng.normal(size=d)
                v /= np.linalg.norm(v)
                target = -s * float(v @ H @ v) / (2.0 * abs(lam))
                got = ndc_probe(inst.problem, inst.u, j, v, 1e-3)
                assert got == pytest.approx(target, rel=0.05), (name, j)


def test_ndc_probe_argument_errors(bundled):
    inst = bundled["nondeg-1"]
    with pytest.raises(IndexError):
        ndc_probe(inst.problem, inst.u, 3, [1.0], 1e-3)
    with pytest.raises(ValueError):
        ndc_probe(inst.problem, inst.u, 0, [1.0], 0.0)
    with pytest.raises(DomainError):
        ndc_probe(inst.problem, inst.u, 0, [1.0], 0.99)
