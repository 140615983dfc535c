"""Construction of stationary test instances with prescribed dual geometry.

For the quadratic loss the dual variable of a candidate u is
p(x) = <k(x), w> with w = y_d - K u, so any linear functional of p is a
linear functional of w.  The factory therefore solves a small least-norm
system for w subject to

    p(x_j) = sign_j * alpha,   grad p(x_j) = 0,   hess p(x_j) = target_j,

plus optional extra rows (higher 1-d derivatives for deliberately flat
instances), sets y_d = K u + w, and verifies |p| <= alpha on a fine grid.
The result is a problem for which u is stationary by construction, with the
curvature at each atom chosen freely: negative definite (certificates hold),
exactly zero (flat, certificates fail), or rank-deficient via parallel
kernel columns (fourier layouts half a period apart).
"""
from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

from .measures import DiscreteMeasure, Domain, measure_to_dict, zero_measure
from .model import Kernel, Loss, Problem, apply_K, dual_variable
from .optimality import global_argmax_abs


@dataclass(frozen=True)
class StationaryInstance:
    tag: str
    problem: Problem
    u: DiscreteMeasure
    degenerate: bool
    notes: str = ""


def gaussian_derivative_row(kernel: Kernel, x: float, order: int) -> np.ndarray:
    """Row of order-th derivatives of the 1-d gaussian components at x."""
    if kernel.family != "gaussian" or kernel.dim != 1:
        raise ValueError("closed-form high derivatives: 1-d gaussian only")
    b2 = kernel.bandwidth ** 2
    c = kernel.points[:, 0]
    z = (float(x) - c) / b2
    k = np.exp(-((float(x) - c) ** 2) / (2.0 * b2))
    if order == 3:
        return (3.0 * z / b2 - z ** 3) * k
    if order == 4:
        return (3.0 / b2 ** 2 - 6.0 * z ** 2 / b2 + z ** 4) * k
    raise ValueError("orders 3 and 4 only")


def make_stationary_problem(domain: Domain, kernel: Kernel, positions, weights,
                            alpha: float, hessian_targets=None,
                            extra_rows=None, grid_check_n: int = 512,
                            bound_tol: float = 1e-9):
    """Least-norm dual design; returns (problem, u).

    hessian_targets: per-atom (d, d) arrays or None entries.  extra_rows:
    list of (coefficient_row, rhs) linear constraints on w.  Raises
    ValueError when the targets are infeasible for the kernel or when the
    designed dual exceeds alpha anywhere on the verification grid.
    """
    u = DiscreteMeasure(domain, np.atleast_2d(np.asarray(positions, float)),
                        np.asarray(weights, float))
    N, d = u.num_atoms, domain.dim
    m = kernel.n_components
    if hessian_targets is None:
        hessian_targets = [None] * N

    rows, rhs = [], []
    signs = np.sign(u.weights)
    for j in range(N):
        x = u.positions[j]
        rows.append(kernel.value(x))
        rhs.append(signs[j] * alpha)
        J = kernel.jac(x)                      # (m, d)
        for a in range(d):
            rows.append(J[:, a])
            rhs.append(0.0)
        H_t = hessian_targets[j]
        if H_t is not None:
            # target is for s_j * hess(p)(x_j); at a negative atom p touches
            # -alpha from above, so the raw curvature there must flip sign
            H_t = np.asarray(H_t, dtype=float) * np.eye(d) \
                if np.ndim(H_t) == 0 else np.asarray(H_t, dtype=float)
            K2 = kernel.hess(x)                # (m, d, d)
            for a in range(d):
                for b in range(a, d):
                    rows.append(K2[:, a, b])
                    rhs.append(signs[j] * H_t[a, b])
    for row, val in (extra_rows or []):
        rows.append(np.asarray(row, dtype=float))
        rhs.append(float(val))

    C = np.asarray(rows)
    r = np.asarray(rhs)
    # Among all duals meeting the constraints, take the one with minimal
    # sampled L2 energy so |p| relaxes toward zero away from the atoms.
    # Sidelobes that still poke above alpha are pressed down by reweighting
    # the offending sample points and re-solving.
    scan = domain.grid(512 if d == 1 else 96)
    G = kernel.value_batch(scan)
    Q0 = 2.0 * (G.T @ G) / G.shape[0] + 1e-9 * np.eye(m)
    if N:
        dist = np.min(np.stack(
            [np.linalg.norm(scan - x[None, :], axis=1) for x in u.positions]),
            axis=0)
    else:
        dist = np.full(scan.shape[0], np.inf)
    near_peak = dist <= 0.08 * domain.diameter()
    w_part, *_ = np.linalg.lstsq(C, r, rcond=None)
    resid = float(np.linalg.norm(C @ w_part - r))
    if resid > 1e-8 * max(1.0, float(np.linalg.norm(r))):
        raise ValueError(
            f"dual design infeasible for this kernel (residual {resid:.3e}); "
            f"{C.shape[0]} constraints vs {m} components")
    # orthonormal basis of the constraint null space; the energy problem is
    # solved in these coordinates so the interpolation rows hold exactly no
    # matter how strong the sidelobe penalties become
    _, sv, Vt = np.linalg.svd(C)
    rank = int(np.sum(sv > 1e-12 * sv[0]))
    Z = Vt[rank:].T
    w = w_part
    level = 0.9 * alpha
    penalties: dict = {}      # scan index -> (weight, signed target level)
    for _ in range(60):
        A = Q0.copy()
        b = np.zeros(m)
        for idx, (wt, tgt) in penalties.items():
            A += wt * np.outer(G[idx], G[idx])
            b -= wt * tgt * G[idx]
        if Z.shape[1]:
            Hz = Z.T @ A @ Z
            gz = Z.T @ (A @ w_part + b)
            z = np.linalg.solve(Hz + 1e-12 * np.eye(Hz.shape[0]), -gz)
            w = w_part + Z @ z
        p_scan = G @ w
        viol = (~near_peak) & (np.abs(p_scan) > alpha * (1.0 - 1e-9))
        if not np.any(viol):
            break
        for idx in np.nonzero(viol)[0]:
            wt, _ = penalties.get(idx, (0.2, 0.0))
            penalties[idx] = (min(wt * 5.0, 1e5),
                              level * np.sign(p_scan[idx]))

    y_d = kernel.value_batch(u.positions).T @ u.weights + w
    problem = Problem(domain, kernel, Loss("quadratic", y_d), alpha)

    dual = dual_variable(problem, u)
    _, pval = global_argmax_abs(dual, grid_check_n)
    if abs(pval) > alpha + bound_tol:
        raise ValueError(
            f"designed dual exceeds the bound: max |p| = {abs(pval):.12g} "
            f"> alpha = {alpha}")
    return problem, u


# ---------------------------------------------------------------------------
# bundled builders


def nondegenerate_instance(idx: int = 0) -> StationaryInstance:
    """Strongly-convex instances whose certificates should all pass.

    Indices 0-2 are one-dimensional with 1-3 atoms, 3-4 two-dimensional.
    """
    alpha = 0.5
    if idx in (0, 1, 2):
        # curvature targets sized so each cap has half-width well under the
        # atom spacing: a cap of depth alpha and curvature -H spans ~ sqrt(alpha/H)
        domain = Domain((0.0,), (1.0,))
        kernel = Kernel("gaussian",
                        np.linspace(0.05, 0.95, 15)[:, None],
                        0.12 + 0.01 * (idx % 3))
        atoms = {
            0: ([[0.35], [0.72]], [1.0, -0.8], [-14.0, -16.0]),
            1: ([[0.42]], [1.2], [-10.0]),
            2: ([[0.22], [0.52], [0.8]], [0.9, -1.1, 0.7],
                [-20.0, -22.0, -20.0]),
        }[idx]
    elif idx in (3, 4):
        domain = Domain((0.0, 0.0), (1.0, 1.0))
        g = np.linspace(0.08, 0.92, 6)
        centers = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        kernel = Kernel("gaussian", centers, 0.18)
        atoms = {
            3: ([[0.32, 0.4], [0.7, 0.64]], [1.0, -0.85],
                [-9.0 * np.eye(2), -10.0 * np.eye(2)]),
            4: ([[0.55, 0.45], [0.2, 0.75]], [1.0, 0.6],
                [-8.0 * np.eye(2), -9.0 * np.eye(2)]),
        }[idx]
    else:
        raise ValueError("nondegenerate instances are indexed 0..4")
    pos, wts, hts = atoms
    problem, u = make_stationary_problem(domain, kernel, pos, wts, alpha,
                                         hessian_targets=hts)
    return StationaryInstance(f"nondegenerate-{idx}", problem, u, False)


def flat_hessian_instance(idx: int = 0) -> StationaryInstance:
    """Single-atom instances with an exactly flat dual top (theta = 0).

    Derivatives of p at the atom vanish through order three and the fourth
    is pushed negative, so p ~ alpha - c h^4: the curvature certificate
    fails while first-order optimality holds.
    """
    if idx not in (0, 1, 2):
        raise ValueError("flat instances are indexed 0..2")
    alpha = 0.5
    domain = Domain((0.0,), (1.0,))
    kernel = Kernel("gaussian", np.linspace(0.05, 0.95, 12)[:, None],
                    0.14 + 0.012 * idx)
    x0 = (0.5, 0.45, 0.55)[idx]
    lam = (1.0, 0.9, -1.0)[idx]
    extra = [
        (gaussian_derivative_row(kernel, x0, 3), 0.0),
        (gaussian_derivative_row(kernel, x0, 4), -np.sign(lam) * 400.0 * alpha),
    ]
    problem, u = make_stationary_problem(
        domain, kernel, [[x0]], [lam], alpha,
        hessian_targets=[0.0], extra_rows=extra)
    return StationaryInstance(f"flat-hessian-{idx}", problem, u, True,
                              notes="dual top is quartic: theta = 0")


def duplicated_columns_instance(idx: int = 0) -> StationaryInstance:
    """Two atoms half a fourier period apart: their kernel columns are
    antiparallel, so the weight direction (1, 1) is invisible to K and the
    rank conditions fail while the curvature certificate passes."""
    if idx not in (0, 1):
        raise ValueError("duplicated-column instances are indexed 0..1")
    alpha = 0.5
    domain = Domain((0.0,), (1.0,))
    kernel = Kernel("fourier", np.asarray([[2.0 * np.pi]]))
    x1 = (0.25, 0.2)[idx]
    scale = (1.0, 0.8)[idx]
    problem, u = make_stationary_problem(
        domain, kernel, [[x1], [x1 + 0.5]], [scale, -scale], alpha,
        grid_check_n=1024, bound_tol=1e-9)
    return StationaryInstance(f"duplicated-columns-{idx}", problem, u, True,
                              notes="kernel columns antiparallel: rank 1 < 2")


def two_spike_recovery_scenario():
    """Noiseless two-spike data with a small regularizer; the minimizer
    keeps two atoms within O(alpha) of the truth.  Returns
    (problem, true_measure)."""
    domain = Domain((0.0,), (1.0,))
    kernel = Kernel("gaussian", np.linspace(0.04, 0.96, 12)[:, None], 0.15)
    truth = DiscreteMeasure(domain, [[0.33], [0.67]], [1.0, 0.75])
    y = kernel.value_batch(truth.positions).T @ truth.weights
    problem = Problem(domain, kernel, Loss("quadratic", y), 1e-5)
    return problem, truth


def null_recovery_scenario():
    """Data too weak for the regularizer: sup_x |<k(x), y_d>| < alpha, so
    the zero measure is the minimizer.  Returns (problem, sup_value)."""
    domain = Domain((0.0,), (1.0,))
    kernel = Kernel("gaussian", np.linspace(0.1, 0.9, 8)[:, None], 0.2)
    y_d = 0.05 * kernel.value(np.asarray([0.45]))
    probe = Problem(domain, kernel, Loss("quadratic", y_d), 1.0)
    dual = dual_variable(probe, zero_measure(domain))
    _, pval = global_argmax_abs(dual, 512)
    sup = abs(pval)
    alpha = 1.25 * sup
    problem = Problem(domain, kernel, Loss("quadratic", y_d), alpha)
    return problem, sup


# ---------------------------------------------------------------------------
# scenario files (consumable by the command-line tool)


def problem_to_config(problem: Problem, u: DiscreteMeasure | None = None,
                      settings: dict | None = None) -> dict:
    ker = problem.kernel
    if ker.family == "gaussian":
        kdict = {"family": "gaussian",
                 "centers": [list(map(float, c)) for c in ker.points],
                 "bandwidth": float(ker.bandwidth)}
    else:
        kdict = {"family": "fourier",
                 "frequencies": [list(map(float, f)) for f in ker.points]}
    data = {
        "domain": {"lower": list(problem.domain.lower),
                   "upper": list(problem.domain.upper)},
        "kernel": kdict,
        "loss": {"family": problem.loss.family,
                 "y_d": [float(v) for v in problem.loss.y_d],
                 "beta": float(problem.loss.beta)},
        "alpha": float(problem.alpha),
    }
    if u is not None:
        data["measure"] = measure_to_dict(u)
    if settings:
        data.update(settings)
    return data


def save_scenario(path, problem: Problem, u: DiscreteMeasure | None = None,
                  settings: dict | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_config(problem, u, settings), fh,
                  indent=2, sort_keys=True)
        fh.write("\n")
