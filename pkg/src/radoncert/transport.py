"""Transport distances between finitely supported measures.

Two quantities are computed, both as small dense LPs on atom locations:

* ``w1``: the 1-Wasserstein distance between two nonnegative measures of
  equal mass (cost = Euclidean distance, full coupling required).
* ``bl_norm``: the flat norm of a signed measure, i.e. the dual-Lipschitz
  norm ``sup { <phi, u> : |phi| <= 1, lip(phi) <= 1 }``.  The primal LP
  couples the positive and the negative part, pays ``min(distance, 2)`` for
  transported mass and 1 per unit of created/destroyed mass.

Couplings are restricted to the atoms of the inputs.  That restriction is
exact here; it is cross-validated against the independent dual LP
(`bl_dual_oracle`) rather than taken on faith — see the test suite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MassError, SignError, UnsupportedDimension
from .measures import DiscreteMeasure, jordan_decompose
from .simplexlp import solve_lp

MASS_TOL = 1e-9
# transported mass can never beat destroying one unit and creating another
COST_CAP = 2.0


@dataclass(frozen=True)
class TransportPlan:
    """Coupling between the atoms of a source and a target measure.

    ``gamma[i, j]`` is the mass moved from source atom i to target atom j.
    Row/column sums never exceed the corresponding weights; for a full
    Wasserstein coupling they match them exactly.
    """

    source_positions: np.ndarray
    source_weights: np.ndarray
    target_positions: np.ndarray
    target_weights: np.ndarray
    gamma: np.ndarray
    cost: float

    def __post_init__(self):
        for name in ("source_positions", "source_weights", "target_positions",
                     "target_weights", "gamma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def validate(self, *, full_coupling: bool, tol: float = 1e-9) -> None:
        if self.gamma.size and np.min(self.gamma) < -1e-12:
            raise SignError("coupling carries negative mass")
        row = self.gamma.sum(axis=1) if self.gamma.size else np.zeros(0)
        col = self.gamma.sum(axis=0) if self.gamma.size else np.zeros(0)
        if np.any(row > self.source_weights + tol) or \
           np.any(col > self.target_weights + tol):
            raise MassError("coupling exceeds its marginals")
        if full_coupling:
            if (np.any(np.abs(row - self.source_weights) > tol)
                    or np.any(np.abs(col - self.target_weights) > tol)):
                raise MassError("coupling does not exhaust its marginals")

    def to_dict(self) -> dict:
        return {
            "source": [{"x": list(map(float, x)), "w": float(w)}
                       for x, w in zip(self.source_positions, self.source_weights)],
            "target": [{"x": list(map(float, x)), "w": float(w)}
                       for x, w in zip(self.target_positions, self.target_weights)],
            "gamma": [[float(v) for v in row] for row in self.gamma],
            "cost": float(self.cost),
        }


def _distance_matrix(P, Q):
    if P.shape[0] == 0 or Q.shape[0] == 0:
        return np.zeros((P.shape[0], Q.shape[0]))
    diff = P[:, None, :] - Q[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def w1(mu: DiscreteMeasure, nu: DiscreteMeasure,
       mass_tol: float = MASS_TOL):
    """1-Wasserstein distance between nonnegative equal-mass measures.

    Returns ``(value, plan)``.  Raises :class:`SignError` for negative
    weights and :class:`MassError` when total masses differ by more than
    ``mass_tol``.  (Within tolerance, the target weights are rescaled to
    match the source mass exactly, so the LP stays feasible.)
    """
    if not mu.is_nonnegative() or not nu.is_nonnegative():
        raise SignError("w1 requires nonnegative measures")
    ma, mb = mu.mass(), nu.mass()
    if abs(ma - mb) > mass_tol:
        raise MassError(f"total masses differ: {ma:.12g} vs {mb:.12g}")

    a = mu.weights.copy()
    b = nu.weights.copy()
    if mb > 0:
        b = b * (ma / mb)
    n1, n2 = a.shape[0], b.shape[0]
    if n1 == 0 or n2 == 0:
        plan = TransportPlan(mu.positions, a, nu.positions, b,
                             np.zeros((n1, n2)), 0.0)
        return 0.0, plan

    D = _distance_matrix(mu.positions, nu.positions)
    c = D.ravel()
    # marginal equalities; one row is redundant and phase 1 drops it
    A_eq = np.zeros((n1 + n2, n1 * n2))
    for i in range(n1):
        A_eq[i, i * n2:(i + 1) * n2] = 1.0
    for j in range(n2):
        A_eq[n1 + j, j::n2] = 1.0
    b_eq = np.concatenate([a, b])

    res = solve_lp(c, A_eq=A_eq, b_eq=b_eq)
    if not res.ok:
        raise MassError(f"transport LP failed: {res.status} {res.message}")
    gamma = res.x.reshape(n1, n2)
    plan = TransportPlan(mu.positions, a, nu.positions, b, gamma, res.fun)
    plan.validate(full_coupling=True, tol=max(1e-9, 10 * mass_tol))
    return float(res.fun), plan


def bl_norm(u: DiscreteMeasure) -> float:
    """Flat norm (bounded-Lipschitz norm) of a signed discrete measure.

    LP over partial couplings gamma between the positive part (masses a_i at
    x_i) and the negative part (masses b_j at y_j):

        min  sum_ij gamma_ij * min(|x_i - y_j|, 2)
             + (sum_i a_i - sum gamma) + (sum_j b_j - sum gamma)
        s.t. row sums <= a, column sums <= b, gamma >= 0.
    """
    u_plus, u_minus = jordan_decompose(u)
    a, b = u_plus.weights, u_minus.weights
    n1, n2 = a.shape[0], b.shape[0]
    total = float(np.sum(a) + np.sum(b))
    if n1 == 0 or n2 == 0:
        return total

    D = np.minimum(_distance_matrix(u_plus.positions, u_minus.positions),
                   COST_CAP)
    # constant part "total" plus (cost - 2) per transported unit
    c = (D - 2.0).ravel()
    A_ub = np.zeros((n1 + n2, n1 * n2))
    for i in range(n1):
        A_ub[i, i * n2:(i + 1) * n2] = 1.0
    for j in range(n2):
        A_ub[n1 + j, j::n2] = 1.0
    b_ub = np.concatenate([a, b])

    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub)
    if not res.ok:
        raise RuntimeError(f"flat-norm LP failed: {res.status} {res.message}")
    return float(res.fun + total)


def bl_dual_oracle(u: DiscreteMeasure, grid_n: int = 32) -> float:
    """Independent dual route to the flat norm.

    Maximizes ``sum_i lambda_i * phi(x_i)`` over test values phi(x_i) with
    ``|phi| <= 1`` and the pairwise Lipschitz constraints
    ``|phi(x_i) - phi(x_j)| <= |x_i - x_j|``.  Any feasible assignment on the
    atoms extends to a 1-Lipschitz function bounded by 1 on the whole box
    (clipped McShane extension), so the atom LP attains the exact supremum;
    ``grid_n`` is kept for interface compatibility and only validated.

    Raises :class:`UnsupportedDimension` for dimension > 2.
    """
    if u.dim > 2:
        raise UnsupportedDimension("dual oracle supports dimension <= 2")
    if int(grid_n) < 2:
        raise ValueError("grid_n must be >= 2")
    n = u.num_atoms
    if n == 0:
        return 0.0

    lam = u.weights
    D = _distance_matrix(u.positions, u.positions)
    # shift phi = psi - 1 so variables are nonnegative; psi in [0, 2]
    rows, rhs = [], []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append(e)
        rhs.append(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            if D[i, j] >= 2.0:
                continue  # implied by |phi| <= 1
            e = np.zeros(n)
            e[i], e[j] = 1.0, -1.0
            rows.append(e.copy())
            rhs.append(D[i, j])
            rows.append(-e)
            rhs.append(D[i, j])

    res = solve_lp(-lam, A_ub=np.asarray(rows), b_ub=np.asarray(rhs))
    if not res.ok:
        raise RuntimeError(f"dual LP failed: {res.status} {res.message}")
    return float(-res.fun - np.sum(lam))


def check_w1_bl_identity(u: DiscreteMeasure, tol: float = 1e-9,
                         mass_tol: float = MASS_TOL) -> None:
    """For zero-mass u on a domain of diameter <= 2 the flat norm coincides
    with the Wasserstein distance between the Jordan parts; verify that.

    Raises :class:`MassError` when u is not balanced, ValueError when the
    domain is too wide, AssertionError when the identity fails numerically.
    """
    if abs(u.mass()) > mass_tol:
        raise MassError(f"measure has nonzero total mass {u.mass():.3e}")
    if u.domain.diameter() > 2.0 + 1e-12:
        raise ValueError("identity requires a domain of diameter <= 2")
    u_plus, u_minus = jordan_decompose(u)
    bl = bl_norm(u)
    wval, _ = w1(u_plus, u_minus, mass_tol=mass_tol)
    if abs(bl - wval) > tol:
        raise AssertionError(
            f"flat norm {bl:.15g} differs from W1 {wval:.15g} by more than {tol}")
