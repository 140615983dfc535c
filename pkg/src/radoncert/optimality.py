"""First-order optimality checks and active-set geometry.

Everything here works off the dual variable p of a candidate minimizer:
stationarity pins p to +-alpha on the support, |p| <= alpha globally, and
the duality pairing <p, u> to alpha * ||u||_TV.  The active-set detector
additionally localizes the near-touching sets I+- = {p = +-alpha} away from
the support and measures the slack sigma left elsewhere.

Scans are dense-grid plus local ascent; adequate for the low-dimensional
(d <= 2) instances this package targets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistentStationarity
from .measures import DiscreteMeasure
from .model import DualVariable, Problem, dual_variable

# fixed internal seed: scans must be reproducible run-to-run
_SCAN_SEED = 12345
_GRID_POINT_CAP = 2_000_000


def _effective_grid_n(domain, grid_n: int) -> int:
    # keep the full mesh below the point cap in higher dimensions
    n = int(grid_n)
    while (n + 1) ** domain.dim > _GRID_POINT_CAP and n > 2:
        n //= 2
    return max(n, 2)


def ascend(dual: DualVariable, sign: float, x0, max_iter: int = 100):
    """Local maximization of sign * p from x0, projected into the box.

    Newton steps when the local curvature is negative definite, gradient
    ascent with backtracking otherwise.  Returns (x, sign * p(x)).
    """
    dom = dual.problem.domain
    x = dom.project(np.asarray(x0, dtype=float))
    fx = sign * dual.value(x)
    for _ in range(max_iter):
        g = sign * dual.grad(x)
        newton = None
        H = sign * dual.hess(x)
        try:
            if np.max(np.linalg.eigvalsh(H)) < -1e-14:
                newton = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            newton = None

        moved = False
        for direction in ([newton] if newton is not None else []) + [g]:
            norm = np.linalg.norm(direction)
            if norm == 0.0:
                continue
            t = 1.0
            for _ in range(40):
                xn = dom.project(x + t * direction)
                fn = sign * dual.value(xn)
                if fn > fx + 1e-18:
                    x, fx, moved = xn, fn, True
                    break
                t *= 0.5
            if moved:
                break
        if not moved:
            break
        # stop once the projected gradient vanishes
        pg = dom.project(x + sign * dual.grad(x)) - x
        if np.linalg.norm(pg) <= 1e-13:
            break
    return x, fx


def global_argmax_abs(dual: DualVariable, grid_n: int = 128, top_k: int = 5):
    """Global maximizer of |p|: dense grid, then ascent from the best cells
    of each sign.  Returns (x, p(x))."""
    n = _effective_grid_n(dual.problem.domain, grid_n)
    X = dual.problem.domain.grid(n)
    vals = dual.value_batch(X)
    best_x, best_abs, best_val = X[0], -np.inf, 0.0
    for sign in (1.0, -1.0):
        order = np.argsort(-sign * vals, kind="stable")[:top_k]
        for i in order:
            x, f = ascend(dual, sign, X[i])
            if f > best_abs:
                best_abs, best_x, best_val = f, x, sign * f
    return best_x, float(best_val)


# ---------------------------------------------------------------------------
# first-order report


@dataclass(frozen=True)
class FirstOrderReport:
    """Outcome of the stationarity check, worst slack per condition."""

    alpha: float
    tol: float
    grid_n: int
    max_abs_dual: float
    argmax: tuple
    bound_slack: float        # max |p| - alpha         (want <= tol)
    worst_atom_gap: float     # max_j |p(x_j) - s_j a|  (want <= tol)
    pairing_gap: float        # alpha ||u|| - <p, u>    (want <= tol)
    bound_ok: bool
    atoms_ok: bool
    pairing_ok: bool
    passed: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "tol": self.tol,
            "grid_n": self.grid_n,
            "max_abs_dual": self.max_abs_dual,
            "argmax": list(self.argmax),
            "bound_slack": self.bound_slack,
            "worst_atom_gap": self.worst_atom_gap,
            "pairing_gap": self.pairing_gap,
            "bound_ok": self.bound_ok,
            "atoms_ok": self.atoms_ok,
            "pairing_ok": self.pairing_ok,
            "passed": self.passed,
        }


def check_first_order(problem: Problem, u: DiscreteMeasure,
                      grid_n: int = 128, tol: float = 1e-6) -> FirstOrderReport:
    """Verify the stationarity system of the candidate u.

    (a) max |p| over the box (grid + refinement) <= alpha + tol,
    (b) p(x_j) = sign(weight_j) * alpha within tol at every atom,
    (c) <p, u> >= alpha * ||u||_TV - tol.
    """
    alpha = problem.alpha
    dual = dual_variable(problem, u)
    xstar, pstar = global_argmax_abs(dual, grid_n)
    bound_slack = abs(pstar) - alpha

    worst_atom = 0.0
    if u.num_atoms:
        pv = dual.value_batch(u.positions)
        worst_atom = float(np.max(np.abs(pv - np.sign(u.weights) * alpha)))
    pairing_gap = alpha * u.tv_norm() - dual.pairing(u)

    bound_ok = bound_slack <= tol
    atoms_ok = worst_atom <= tol
    pairing_ok = pairing_gap <= tol
    return FirstOrderReport(
        alpha=alpha, tol=tol, grid_n=grid_n,
        max_abs_dual=float(abs(pstar)), argmax=tuple(map(float, xstar)),
        bound_slack=float(bound_slack), worst_atom_gap=worst_atom,
        pairing_gap=float(pairing_gap),
        bound_ok=bound_ok, atoms_ok=atoms_ok, pairing_ok=pairing_ok,
        passed=bool(bound_ok and atoms_ok and pairing_ok))


# ---------------------------------------------------------------------------
# active sets


@dataclass(frozen=True)
class ActiveSets:
    """Support data of a stationary candidate.

    support_* describe the atoms (A); i_plus / i_minus hold refined local
    maximizers of +-p that touch the bound alpha outside the support balls;
    sigma is the slack alpha - max |p| away from all of those; r0 the radius
    on which the local quadratic bound around each atom was verified.
    """

    support_positions: np.ndarray
    support_weights: np.ndarray
    support_signs: np.ndarray
    i_plus: np.ndarray
    i_minus: np.ndarray
    sigma: float
    r0: float
    theta: float
    per_atom_theta: np.ndarray
    act_tol: float
    grid_n: int

    def __post_init__(self):
        for name in ("support_positions", "support_weights", "support_signs",
                     "i_plus", "i_minus", "per_atom_theta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def has_touching_sets(self) -> bool:
        return bool(self.i_plus.shape[0] or self.i_minus.shape[0])

    def to_dict(self) -> dict:
        return {
            "support": [{"x": list(map(float, x)), "w": float(w), "sign": float(s)}
                        for x, w, s in zip(self.support_positions,
                                           self.support_weights,
                                           self.support_signs)],
            "i_plus": [list(map(float, x)) for x in self.i_plus],
            "i_minus": [list(map(float, x)) for x in self.i_minus],
            "sigma": float(self.sigma),
            "r0": float(self.r0),
            "theta": float(self.theta) if np.isfinite(self.theta) else "inf",
            "per_atom_theta": [float(t) for t in self.per_atom_theta],
            "act_tol": self.act_tol,
            "grid_n": self.grid_n,
        }


def _ball_directions(dim: int, n_random: int = 16) -> np.ndarray:
    rng = np.random.default_rng(_SCAN_SEED)
    dirs = [np.eye(dim), -np.eye(dim)]
    extra = rng.normal(size=(n_random, dim))
    extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.concatenate(dirs + [extra], axis=0)


def _quadratic_bound_holds(dual, centers, signs, theta_plus, r, alpha) -> bool:
    dirs = _ball_directions(centers.shape[1])
    fracs = np.array([1.0, 0.75, 0.5, 0.25])
    for x0, s in zip(centers, signs):
        pts = (x0[None, None, :]
               + r * fracs[:, None, None] * dirs[None, :, :]).reshape(-1, centers.shape[1])
        inside = [dual.problem.domain.contains(p) for p in pts]
        pts = pts[np.asarray(inside)]
        if pts.shape[0] == 0:
            return False
        q = s * dual.value_batch(pts)
        dist2 = np.sum((pts - x0[None, :]) ** 2, axis=1)
        if np.any(q < alpha / 2 - 1e-12):
            return False
        if np.any(q > alpha - (theta_plus / 4.0) * dist2 + 1e-12):
            return False
    return True


def _dedupe_points(points, values, tol):
    """Greedy cluster keeping the best-valued representative; deterministic."""
    if not points:
        return []
    order = np.argsort(-np.asarray(values), kind="stable")
    kept = []
    for i in order:
        p = points[i]
        if all(np.linalg.norm(p - q) > tol for q in kept):
            kept.append(p)
    kept.sort(key=lambda p: tuple(p))
    return kept


def active_sets(problem: Problem, u: DiscreteMeasure, grid_n: int = 128,
                act_tol: float = 1e-6) -> ActiveSets:
    """Detect the support data and the touching sets of a stationary u.

    Raises :class:`InconsistentStationarity` when an atom fails to saturate
    the dual bound within act_tol.  The sigma slack excludes radius-r0 balls
    around the atoms and around each detected I+- candidate (same radius
    for both; any radius below the separation would do).
    """
    alpha = problem.alpha
    dual = dual_variable(problem, u)
    d = problem.domain.dim
    n = _effective_grid_n(problem.domain, grid_n)
    X = problem.domain.grid(n)
    vals = dual.value_batch(X)
    spacing = float(np.max((problem.domain.upper_arr
                            - problem.domain.lower_arr) / n))

    N = u.num_atoms
    if N:
        pv = dual.value_batch(u.positions)
        low = np.abs(pv) < alpha - act_tol
        if np.any(low):
            j = int(np.nonzero(low)[0][0])
            raise InconsistentStationarity(
                f"atom {j} at {u.positions[j].tolist()} has |p| = "
                f"{abs(pv[j]):.9g} < alpha - act_tol = {alpha - act_tol:.9g}")
        signs = np.sign(pv)
        signs[signs == 0] = np.sign(u.weights)[signs == 0]
        hessians = [dual.hess(x) for x in u.positions]
        per_atom_theta = np.array(
            [-np.max(np.linalg.eigvalsh(s * H))
             for s, H in zip(signs, hessians)])
        theta = float(np.min(per_atom_theta))
    else:
        signs = np.zeros(0)
        per_atom_theta = np.zeros(0)
        theta = float("inf")

    # radius on which the quadratic envelope around each atom is verified
    if N:
        rmax = min(u.min_pairwise_distance() / 2.0, u.min_boundary_distance())
        r0 = 0.0
        if rmax > 0 and np.isfinite(rmax):
            theta_plus = max(theta, 0.0) if np.isfinite(theta) else 0.0
            r = rmax
            while r > 1e-9 * rmax:
                if _quadratic_bound_holds(dual, u.positions, signs,
                                          theta_plus, r, alpha):
                    r0 = r
                    break
                r /= 2.0
    else:
        r0 = 0.0

    def outside_support(pts):
        if N == 0 or r0 == 0.0:
            return np.ones(pts.shape[0], dtype=bool)
        keep = np.ones(pts.shape[0], dtype=bool)
        for x0 in u.positions:
            keep &= np.linalg.norm(pts - x0[None, :], axis=1) > r0
        return keep

    free = outside_support(X)
    dedupe_tol = max(2.0 * spacing, 1e-8)

    candidates = {1.0: [], -1.0: []}
    for sign in (1.0, -1.0):
        sv = sign * vals
        sv_masked = np.where(free, sv, -np.inf)
        order = np.argsort(-sv_masked, kind="stable")[:10]
        pts, refined = [], []
        for i in order:
            if not np.isfinite(sv_masked[i]):
                continue
            x, f = ascend(dual, sign, X[i])
            if f < alpha - act_tol:
                continue
            if not outside_support(x[None, :])[0]:
                continue
            pts.append(x)
            refined.append(f)
        candidates[sign] = _dedupe_points(pts, refined, dedupe_tol)

    i_plus = np.asarray(candidates[1.0]) if candidates[1.0] else np.zeros((0, d))
    i_minus = np.asarray(candidates[-1.0]) if candidates[-1.0] else np.zeros((0, d))

    # slack away from the support balls and the touching candidates
    excl = free.copy()
    r_excl = r0 if r0 > 0 else 2.0 * spacing
    for z in list(i_plus) + list(i_minus):
        excl &= np.linalg.norm(X - z[None, :], axis=1) > r_excl
    if np.any(excl):
        rest = np.abs(vals[excl])
        best = float(np.max(rest))
        # refine from the top cells, discarding ascents that re-enter
        idx_pool = np.nonzero(excl)[0]
        sub = np.argsort(-np.abs(vals[excl]), kind="stable")[:5]
        for i in idx_pool[sub]:
            for sign in (1.0, -1.0):
                x, f = ascend(dual, sign, X[i])
                far = outside_support(x[None, :])[0] and all(
                    np.linalg.norm(x - z) > r_excl
                    for z in list(i_plus) + list(i_minus))
                if far:
                    best = max(best, abs(sign * f))
        sigma = alpha - best
    else:
        sigma = alpha
    return ActiveSets(
        support_positions=u.positions.copy(), support_weights=u.weights.copy(),
        support_signs=signs, i_plus=i_plus, i_minus=i_minus,
        sigma=float(sigma), r0=float(r0), theta=theta,
        per_atom_theta=per_atom_theta, act_tol=act_tol, grid_n=grid_n)
