"""Kernels, losses, the dual variable, and scenario loading."""
from __future__ import annotations

import json

import numpy as np
import pytest

from radoncert.errors import ConfigError
from radoncert.measures import DiscreteMeasure, Domain, dirac
from radoncert.model import (Kernel, Loss, Problem, apply_K, dual_variable,
                             lipschitz_embedding_check, load_scenario,
                             objective, uniform_taylor_check)

import oracles

BOX = Domain((0.0,), (1.0,))
BOX2 = Domain((0.0, 0.0), (1.0, 1.0))


def _gauss1d():
    return Kernel("gaussian", np.linspace(0.1, 0.9, 7)[:, None], 0.2)


def _fourier2d():
    f = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 1.0]]) * np.pi
    return Kernel("fourier", f)


@pytest.mark.parametrize("kernel,dom", [(_gauss1d(), BOX),
                                        (_fourier2d(), BOX2)])
def test_kernel_jacobian_and_hessian_match_fd(kernel, dom):
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = dom.sample(rng, 1)[0]
        J = kernel.jac(x)
        H = kernel.hess(x)
        for i in range(kernel.n_components):
            f = lambda z, i=i: kernel.value(z)[i]
            assert np.allclose(J[i], oracles.fd_grad(f, x), atol=1e-6)
            assert np.allclose(H[i], oracles.fd_hess(f, x), atol=1e-4)


def test_kernel_value_batch_consistent():
    k = _gauss1d()
    X = BOX.grid(16)
    V = k.value_batch(X)
    for i in range(0, len(X), 5):
        assert np.allclose(V[i], k.value(X[i]))


def test_kernel_features_match_textbook_formulas():
    k = _gauss1d()
    x = np.array([0.37])
    assert np.allclose(k.value(x), oracles.gaussian_features(
        k.points, k.bandwidth, x))
    kf = _fourier2d()
    x2 = np.array([0.3, 0.6])
    assert np.allclose(kf.value(x2), oracles.fourier_features(kf.points, x2))


@pytest.mark.parametrize("family,beta", [("quadratic", 0.0),
                                         ("nonconvex_demo", 0.4)])
def test_loss_grad_hess_match_fd(family, beta):
    rng = np.random.default_rng(2)
    y_d = rng.normal(size=5)
    loss = Loss(family, y_d, beta=beta)
    for _ in range(8):
        y = rng.normal(size=5)
        g = loss.grad(y)
        H = loss.hess(y)
        assert np.allclose(g, oracles.fd_grad(loss.value, y, h=1e-6),
                           atol=1e-6)
        assert np.allclose(H, oracles.fd_hess(loss.value, y, h=1e-4),
                           atol=1e-4)


def test_quadratic_loss_modulus():
    loss = Loss("quadratic", np.zeros(3))
    assert loss.convexity_modulus == 1.0
    assert Loss("nonconvex_demo", np.zeros(3), beta=0.2).convexity_modulus \
        is None


def test_apply_K_linear_in_measure():
    k = _gauss1d()
    prob = Problem(BOX, k, Loss("quadratic", np.zeros(k.n_components)), 0.5)
    u = dirac(BOX, [0.3], 1.5)
    v = dirac(BOX, [0.7], -0.5)
    lhs = apply_K(prob, u + v)
    assert np.allclose(lhs, apply_K(prob, u) + apply_K(prob, v))
    assert np.allclose(apply_K(prob, u * 2.0), 2.0 * apply_K(prob, u))


def test_objective_matches_direct_recomputation():
    rng = np.random.default_rng(3)
    k = _gauss1d()
    y_d = rng.normal(size=k.n_components)
    for family, beta in [("quadratic", 0.0), ("nonconvex_demo", 0.3)]:
        prob = Problem(BOX, k, Loss(family, y_d, beta=beta), 0.7)
        for _ in range(10):
            n = int(rng.integers(1, 5))
            u = DiscreteMeasure(BOX, rng.random((n, 1)), rng.normal(size=n))
            assert objective(prob, u) == pytest.approx(
                oracles.objective_direct(prob, u), rel=1e-12)


def test_dual_value_matches_direct_and_pairing():
    rng = np.random.default_rng(4)
    k = _gauss1d()
    y_d = rng.normal(size=k.n_components)
    prob = Problem(BOX, k, Loss("quadratic", y_d), 0.5)
    u = DiscreteMeasure(BOX, [[0.25], [0.6]], [1.0, -0.7])
    dual = dual_variable(prob, u)
    for _ in range(10):
        x = BOX.sample(rng, 1)[0]
        assert dual.value(x) == pytest.approx(
            oracles.dual_direct(prob, u, x), rel=1e-12)
    # pairing <p, v> = sum of weights times p at the atoms
    v = DiscreteMeasure(BOX, [[0.1], [0.9]], [0.4, 0.6])
    manual = sum(wj * dual.value(xj) for xj, wj in v.atoms())
    assert dual.pairing(v) == pytest.approx(manual, rel=1e-12)


def test_dual_gradient_hessian_match_fd(bundled):
    # acceptance-grade tolerances: 1e-6 gradient, 1e-4 Hessian
    for name in ("nondeg-0", "nondeg-3"):
        inst = bundled[name]
        dual = dual_variable(inst.problem, inst.u)
        dom = inst.problem.domain
        rng = np.random.default_rng(5)
        # stay a step away from the boundary so central stencils fit
        for _ in range(20):
            x = dom.lower_arr + (dom.upper_arr - dom.lower_arr) * (
                0.01 + 0.98 * rng.random(dom.dim))
            g = dual.grad(x)
            H = dual.hess(x)
            g_fd = oracles.fd_grad(dual.value, x, h=1e-5)
            H_fd = oracles.fd_hess(dual.value, x, h=1e-4)
            scale_g = max(1.0, float(np.linalg.norm(g_fd)))
            scale_H = max(1.0, float(np.linalg.norm(H_fd)))
            assert np.linalg.norm(g - g_fd) / scale_g < 1e-6
            assert np.linalg.norm(H - H_fd) / scale_H < 1e-4


def test_dual_hessian_symmetric(bundled):
    inst = bundled["nondeg-3"]
    dual = dual_variable(inst.problem, inst.u)
    rng = np.random.default_rng(6)
    for _ in range(10):
        x = inst.problem.domain.sample(rng, 1)[0]
        H = dual.hess(x)
        assert np.allclose(H, H.T, atol=1e-13)


# -- scenario files ------------------------------------------------------


def _scenario_dict():
    return {
        "domain": {"lower": [0.0], "upper": [1.0]},
        "kernel": {"family": "gaussian",
                   "centers": [[0.2], [0.5], [0.8]], "bandwidth": 0.2},
        "loss": {"family": "quadratic", "y_d": [0.1, -0.2, 0.3]},
        "alpha": 0.4,
        "measure": {"atoms": [{"x": [0.5], "w": 1.0}]},
    }


def test_load_scenario_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(_scenario_dict()))
    sc = load_scenario(p)
    assert sc.problem.alpha == 0.4
    assert sc.problem.kernel.n_components == 3
    assert sc.measure is not None and sc.measure.num_atoms == 1


def test_load_scenario_toml(tmp_path):
    body = """
alpha = 0.4

[domain]
lower = [0.0]
upper = [1.0]

[kernel]
family = "gaussian"
centers = [[0.2], [0.5], [0.8]]
bandwidth = 0.2

[loss]
family = "quadratic"
y_d = [0.1, -0.2, 0.3]
"""
    p = tmp_path / "s.toml"
    p.write_text(body)
    sc = load_scenario(p)
    assert sc.problem.kernel.family == "gaussian"
    assert sc.measure is None


def test_load_scenario_yd_from_csv(tmp_path):
    d = _scenario_dict()
    d["loss"]["y_d"] = {"csv": "y.csv"}
    (tmp_path / "y.csv").write_text("0.1\n-0.2\n0.3\n")
    p = tmp_path / "s.json"
    p.write_text(json.dumps(d))
    sc = load_scenario(p)
    assert np.allclose(sc.problem.loss.y_d, [0.1, -0.2, 0.3])


def test_load_scenario_missing_field_raises(tmp_path):
    d = _scenario_dict()
    del d["alpha"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    with pytest.raises(ConfigError) as ei:
        load_scenario(p)
    assert "alpha" in str(ei.value)


def test_load_scenario_bad_kernel_family(tmp_path):
    d = _scenario_dict()
    d["kernel"]["family"] = "sinc"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    with pytest.raises(ConfigError):
        load_scenario(p)


def test_problem_rejects_mismatched_yd():
    k = _gauss1d()
    with pytest.raises(ValueError):
        Problem(BOX, k, Loss("quadratic", np.zeros(k.n_components + 1)), 0.5)
    with pytest.raises(ValueError):
        Problem(BOX, k, Loss("quadratic", np.zeros(k.n_components)), -1.0)


# -- geometry property suite ---------------------------------------------


def test_kernel_lipschitz_embedding_on_boxes():
    for kernel, dom in [(_gauss1d(), BOX), (_fourier2d(), BOX2)]:
        rep = lipschitz_embedding_check(dom, kernel.value, kernel.jac,
                                        seed=0, n_pairs=200)
        assert rep.passed, rep


def test_dual_uniform_taylor_expansion(bundled):
    # a C^2 dual admits a positive uniform first-order radius at any eps
    inst = bundled["nondeg-0"]
    dual = dual_variable(inst.problem, inst.u)
    delta = uniform_taylor_check(inst.problem.domain, dual.value, dual.grad,
                                 eps=1e-3, seed=0)
    assert delta > 0.0
    # tighter eps can only shrink the radius
    tighter = uniform_taylor_check(inst.problem.domain, dual.value,
                                   dual.grad, eps=1e-4, seed=0)
    assert 0.0 < tighter <= delta * (1 + 1e-9)
