"""Second-order certificates for sparse stationary points.

The objects here decide the structural side of the no-gap equivalence: a
curvature certificate at every atom (the dual Hessian pushed below -theta),
plus positivity of the constrained quadratic form

    b(mu, mu) = <K mu, hess loss(K u) K mu>
                - sum_j (1/weight_j) V_j . hess p(x_j) V_j

over directions mu that combine weight changes c_j and position velocities
V_j at the atoms with sign-constrained mass on the touching sets I+-.
Difference-quotient probes (`recovery_quotient`, `ndc_probe`) tie the
abstract form back to objective differences along explicit perturbations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryAtomError, ConeViolation, DomainError
from .measures import DiscreteMeasure
from .model import Problem, apply_K, dual_variable
from .optimality import ActiveSets

THETA_TOL = 1e-8
PD_TOL = 1e-10


def _as_atoms(entries, dim):
    """Normalize [(pos, w), ...] to (k, d) positions and (k,) weights."""
    if entries is None or len(entries) == 0:
        return np.zeros((0, dim)), np.zeros(0)
    P = np.atleast_2d(np.asarray([np.atleast_1d(e[0]) for e in entries],
                                 dtype=float))
    W = np.asarray([e[1] for e in entries], dtype=float)
    return P, W


@dataclass(frozen=True)
class Direction:
    """Perturbation direction at a stationary candidate with N atoms.

    c: weight changes (N,); V: position velocities (N, d); mu_plus and
    mu_minus: extra point masses [(position, weight), ...] intended for the
    touching sets I+ and I-.  Both weight lists must be nonnegative; the
    minus block enters the direction measure negatively.
    """

    c: np.ndarray
    V: np.ndarray
    mu_plus: tuple = field(default_factory=tuple)
    mu_minus: tuple = field(default_factory=tuple)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        V = np.asarray(self.V, dtype=float)
        if V.ndim == 1:
            V = V[:, None] if c.shape[0] == V.shape[0] else np.atleast_2d(V)
        for arr in (c, V):
            arr.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "V", V)
        if V.shape[0] != c.shape[0]:
            raise ValueError("c and V must agree on the number of atoms")
        object.__setattr__(self, "mu_plus", tuple(
            (tuple(map(float, np.atleast_1d(p))), float(w))
            for p, w in self.mu_plus))
        object.__setattr__(self, "mu_minus", tuple(
            (tuple(map(float, np.atleast_1d(p))), float(w))
            for p, w in self.mu_minus))

    def validate_cone(self, tol: float = 0.0) -> None:
        for _, w in self.mu_plus:
            if w < -tol:
                raise ConeViolation(f"mu_plus weight {w} is negative")
        for _, w in self.mu_minus:
            if w < -tol:
                raise ConeViolation(f"mu_minus weight {w} is negative")

    def is_zero(self, tol: float = 0.0) -> bool:
        return (np.all(np.abs(self.c) <= tol)
                and np.all(np.abs(self.V) <= tol)
                and all(abs(w) <= tol for _, w in self.mu_plus)
                and all(abs(w) <= tol for _, w in self.mu_minus))


def direction_image(problem: Problem, u: DiscreteMeasure,
                    direction: Direction) -> np.ndarray:
    """Observation-space image of the lifted direction:
    sum_j c_j k(x_j) + sum_j Dk(x_j) V_j + K mu_plus - K mu_minus."""
    ker = problem.kernel
    y = np.zeros(ker.n_components)
    if u.num_atoms:
        y += ker.value_batch(u.positions).T @ direction.c
        for x, v in zip(u.positions, direction.V):
            y += ker.jac(x) @ v
    Pp, Wp = _as_atoms(direction.mu_plus, problem.domain.dim)
    if Wp.shape[0]:
        y += ker.value_batch(Pp).T @ Wp
    Pm, Wm = _as_atoms(direction.mu_minus, problem.domain.dim)
    if Wm.shape[0]:
        y -= ker.value_batch(Pm).T @ Wm
    return y


# ---------------------------------------------------------------------------
# curvature certificate


@dataclass(frozen=True)
class HessianCertificate:
    theta: float
    per_atom_theta: np.ndarray
    hessians: np.ndarray          # (N, d, d) dual Hessians at the atoms
    signs: np.ndarray
    theta_tol: float
    passed: bool

    def to_dict(self) -> dict:
        finite = np.isfinite(self.theta)
        return {
            "theta": float(self.theta) if finite else "inf",
            "per_atom_theta": [float(t) for t in self.per_atom_theta],
            "signs": [float(s) for s in self.signs],
            "theta_tol": self.theta_tol,
            "passed": self.passed,
        }


def hessian_certificate(problem: Problem, u: DiscreteMeasure,
                        theta_tol: float = THETA_TOL,
                        boundary_tol: float = 1e-8) -> HessianCertificate:
    """Largest theta with sign_j * hess p(x_j) <= -theta * Id at every atom.

    Interior certificate: raises :class:`BoundaryAtomError` when an atom
    sits within boundary_tol of the domain boundary.  With no atoms the
    certificate is vacuous (theta = inf, passed).
    """
    dual = dual_variable(problem, u)
    N = u.num_atoms
    if N == 0:
        return HessianCertificate(float("inf"), np.zeros(0),
                                  np.zeros((0, problem.domain.dim,
                                            problem.domain.dim)),
                                  np.zeros(0), theta_tol, True)
    for j, x in enumerate(u.positions):
        if problem.domain.boundary_distance(x) <= boundary_tol:
            raise BoundaryAtomError(
                f"atom {j} at {x.tolist()} is within {boundary_tol} of the "
                "boundary; the interior curvature certificate does not apply")
    pv = dual.value_batch(u.positions)
    signs = np.sign(pv)
    signs[signs == 0] = np.sign(u.weights)[signs == 0]
    H = np.stack([dual.hess(x) for x in u.positions])
    per_atom = np.array([-np.max(np.linalg.eigvalsh(s * Hj))
                         for s, Hj in zip(signs, H)])
    theta = float(np.min(per_atom))
    return HessianCertificate(theta, per_atom, H, signs, theta_tol,
                              bool(theta > theta_tol))


# ---------------------------------------------------------------------------
# the quadratic form and its cone-constrained minimum eigenvalue


def soc_form(problem: Problem, u: DiscreteMeasure, sets: ActiveSets,
             dir1: Direction, dir2: Direction) -> float:
    """Symmetric bilinear form behind the second-order condition."""
    dir1.validate_cone()
    dir2.validate_cone()
    dual = dual_variable(problem, u)
    HL = problem.loss.hess(apply_K(problem, u))
    y1 = direction_image(problem, u, dir1)
    y2 = direction_image(problem, u, dir2)
    val = float(y1 @ HL @ y2)
    for j, x in enumerate(u.positions):
        Hj = dual.hess(x)
        val -= (dir1.V[j] @ Hj @ dir2.V[j]) / u.weights[j]
    return val


def _basis_directions(problem, u, sets, extra_plus=None, extra_minus=None):
    """Canonical basis of the direction space: weight coords, position
    coords, then one coordinate per I+- candidate atom (cone-constrained)."""
    N, d = u.num_atoms, problem.domain.dim
    dirs, cone = [], []
    for j in range(N):
        c = np.zeros(N)
        c[j] = 1.0
        dirs.append(Direction(c, np.zeros((N, d))))
        cone.append(False)
    for j in range(N):
        for a in range(d):
            V = np.zeros((N, d))
            V[j, a] = 1.0
            dirs.append(Direction(np.zeros(N), V))
            cone.append(False)
    plus = [np.asarray(z, dtype=float) for z in sets.i_plus]
    if extra_plus is not None:
        plus += [np.asarray(z, dtype=float) for z in extra_plus]
    minus = [np.asarray(z, dtype=float) for z in sets.i_minus]
    if extra_minus is not None:
        minus += [np.asarray(z, dtype=float) for z in extra_minus]
    for z in plus:
        dirs.append(Direction(np.zeros(N), np.zeros((N, d)),
                              mu_plus=((z, 1.0),)))
        cone.append(True)
    for z in minus:
        dirs.append(Direction(np.zeros(N), np.zeros((N, d)),
                              mu_minus=((z, 1.0),)))
        cone.append(True)
    return dirs, np.asarray(cone, dtype=bool)


def _assemble_form(problem, u, sets, dirs):
    dual = dual_variable(problem, u)
    HL = problem.loss.hess(apply_K(problem, u))
    images = np.stack([direction_image(problem, u, dr) for dr in dirs])
    M = images @ HL @ images.T
    Hs = [dual.hess(x) for x in u.positions]
    for a, da in enumerate(dirs):
        for b in range(a, len(dirs)):
            db = dirs[b]
            corr = 0.0
            for j in range(u.num_atoms):
                corr -= (da.V[j] @ Hs[j] @ db.V[j]) / u.weights[j]
            M[a, b] += corr
            if b != a:
                M[b, a] += corr
    return 0.5 * (M + M.T)


def _cone_min_rayleigh(M, cone_mask, tol=1e-10, max_iter=20000):
    """Minimum of x.Mx over the unit sphere intersected with the cone
    {x_i >= 0 for cone coordinates}, by shifted projected power iteration
    from a deterministic set of starts."""
    n = M.shape[0]
    shift = float(np.linalg.norm(M, 2)) + 1.0
    B = shift * np.eye(n) - M

    def project(x):
        y = x.copy()
        y[cone_mask] = np.maximum(y[cone_mask], 0.0)
        nrm = np.linalg.norm(y)
        return y / nrm if nrm > 0 else y

    starts = [np.eye(n)[i] for i in range(n)]
    starts.append(np.ones(n) / np.sqrt(n))
    rng = np.random.default_rng(0)
    for _ in range(5):
        starts.append(project(rng.normal(size=n)))
    best = np.inf
    for x0 in starts:
        x = project(np.asarray(x0, dtype=float))
        if np.linalg.norm(x) == 0:
            continue
        for _ in range(max_iter):
            xn = project(B @ x)
            if np.linalg.norm(xn) == 0:
                break
            if np.linalg.norm(xn - x) <= tol:
                x = xn
                break
            x = xn
        best = min(best, float(x @ M @ x))
    return best


@dataclass(frozen=True)
class ConeEigReport:
    value: float
    exact: bool          # dense eigensolve (no cone) vs projected iteration
    dimension: int

    def to_dict(self) -> dict:
        return {"value": self.value, "exact": self.exact,
                "dimension": self.dimension}


def soc_min_eig(problem: Problem, u: DiscreteMeasure, sets: ActiveSets,
                ipm_samples=None, tol: float = 1e-10) -> ConeEigReport:
    """Minimum of the quadratic form over the unit sphere of the sampled
    direction space, respecting the sign cone on I+- coordinates.

    `ipm_samples` optionally appends extra (plus_points, minus_points)
    candidate atoms to the I+- blocks.  Without cone-constrained
    coordinates the value is an exact dense eigensolve; otherwise a
    deterministic projected power iteration.
    """
    extra_plus = extra_minus = None
    if ipm_samples is not None:
        extra_plus, extra_minus = ipm_samples
    dirs, cone = _basis_directions(problem, u, sets, extra_plus, extra_minus)
    if not dirs:
        return ConeEigReport(float("inf"), True, 0)
    M = _assemble_form(problem, u, sets, dirs)
    if not np.any(cone):
        return ConeEigReport(float(np.min(np.linalg.eigvalsh(M))), True,
                             M.shape[0])
    return ConeEigReport(_cone_min_rayleigh(M, cone, tol=tol), False,
                         M.shape[0])


# ---------------------------------------------------------------------------
# consolidated structural report


@dataclass(frozen=True)
class SecondOrderReport:
    theta: float
    theta_passed: bool
    soc_min_eig: float
    soc_exact: bool
    b1: bool
    c1_min: float
    c1: bool
    c3_min_eig: float
    c3: bool
    c4_min_sv: float
    c4: bool
    kernel_gram_min_eig: float
    sample_relative: bool     # I+- sampled: SOC verdict relative to samples
    loss_convex: bool
    notes: tuple

    def to_dict(self) -> dict:
        def num(v):
            return float(v) if np.isfinite(v) else ("inf" if v > 0 else "-inf")
        return {
            "theta": num(self.theta),
            "theta_passed": self.theta_passed,
            "soc_min_eig": num(self.soc_min_eig),
            "soc_exact": self.soc_exact,
            "b1": self.b1,
            "c1_min": num(self.c1_min),
            "c1": self.c1,
            "c3_min_eig": num(self.c3_min_eig),
            "c3": self.c3,
            "c4_min_sv": num(self.c4_min_sv),
            "c4": self.c4,
            "kernel_gram_min_eig": num(self.kernel_gram_min_eig),
            "sample_relative": self.sample_relative,
            "loss_convex": self.loss_convex,
            "notes": list(self.notes),
        }


def check_C_conditions(problem: Problem, u: DiscreteMeasure,
                       sets: ActiveSets, theta_tol: float = THETA_TOL,
                       pd_tol: float = PD_TOL) -> SecondOrderReport:
    """Full structural verdict: curvature certificate, the constrained
    quadratic form (B1), and the simplified conditions C1/C3/C4.

    C1 drops the position block (weights + I+- only); C3 asks for positive
    definiteness of the kernel Gram matrix in the loss metric (equivalent
    only when I+- is empty); C4 for full column rank of the kernel matrix
    (equivalent for strongly convex loss).  Verdicts always include the
    curvature certificate.
    """
    cert = hessian_certificate(problem, u, theta_tol=theta_tol)
    full = soc_min_eig(problem, u, sets)
    b1 = bool(cert.passed and full.value > pd_tol)

    N, d = u.num_atoms, problem.domain.dim
    # weight + I+- block for C1
    dirs, cone = _basis_directions(problem, u, sets)
    keep = [i for i, dr in enumerate(dirs) if np.all(dr.V == 0.0)]
    if keep:
        M = _assemble_form(problem, u, sets, [dirs[i] for i in keep])
        mask = cone[keep]
        if np.any(mask):
            c1_min = _cone_min_rayleigh(M, mask)
        else:
            c1_min = float(np.min(np.linalg.eigvalsh(M)))
    else:
        c1_min = float("inf")
    c1 = bool(cert.passed and c1_min > pd_tol)

    if N:
        Kmat = problem.kernel.value_batch(u.positions).T   # (m, N)
        HL = problem.loss.hess(apply_K(problem, u))
        gram = Kmat.T @ HL @ Kmat
        c3_min = float(np.min(np.linalg.eigvalsh(0.5 * (gram + gram.T))))
        svals = np.linalg.svd(Kmat, compute_uv=False)
        c4_min = float(svals[-1]) if svals.size else 0.0
        rank_tol = max(Kmat.shape) * np.finfo(float).eps * float(svals[0]) \
            if svals.size else 0.0
        c4 = bool(cert.passed and c4_min > max(rank_tol, pd_tol))
    else:
        c3_min, c4_min = float("inf"), float("inf")
        c4 = cert.passed
    c3 = bool(cert.passed and c3_min > pd_tol)

    notes = []
    if sets.has_touching_sets:
        notes.append("I+- nonempty: SOC verdict is sample-relative and C3 "
                     "equivalence does not apply")
    if problem.loss.convexity_modulus is None:
        notes.append("loss is not convex: C-conditions are informational only")
    return SecondOrderReport(
        theta=cert.theta, theta_passed=cert.passed,
        soc_min_eig=full.value, soc_exact=full.exact, b1=b1,
        c1_min=c1_min, c1=c1, c3_min_eig=c3_min, c3=c3,
        c4_min_sv=c4_min, c4=c4, kernel_gram_min_eig=c3_min,
        sample_relative=bool(sets.has_touching_sets),
        loss_convex=problem.loss.convexity_modulus is not None,
        notes=tuple(notes))


# ---------------------------------------------------------------------------
# second subderivative and difference-quotient probes


def second_subderivative(problem: Problem, u: DiscreteMeasure,
                         sets: ActiveSets, direction: Direction,
                         snap_tol: float = 1e-7) -> float:
    """Value of the second-order expansion term of the regularizer:
    -sum_j (1/weight_j) V_j . hess p(x_j) V_j for admissible directions,
    +inf otherwise.

    Admissible means: mu_plus atoms sit on (within snap_tol of) detected I+
    candidates, mu_minus atoms on I- candidates, and both carry nonnegative
    weights.  Infinity is a value here, not an error.
    """
    for _, w in list(direction.mu_plus) + list(direction.mu_minus):
        if w < 0:
            return float("inf")

    def on(candidates, z):
        z = np.asarray(z, dtype=float)
        return any(np.linalg.norm(z - np.asarray(q)) <= snap_tol
                   for q in candidates)

    for z, w in direction.mu_plus:
        if w > 0 and not on(sets.i_plus, z):
            return float("inf")
    for z, w in direction.mu_minus:
        if w > 0 and not on(sets.i_minus, z):
            return float("inf")

    dual = dual_variable(problem, u)
    val = 0.0
    for j, x in enumerate(u.positions):
        val -= (direction.V[j] @ dual.hess(x) @ direction.V[j]) / u.weights[j]
    return float(val)


def recovery_quotient(problem: Problem, u: DiscreteMeasure, j: int,
                      V, c: float, t: float) -> float:
    """Exact difference quotient of the regularizer along the recovery
    perturbation of atom j: weight bump c plus position velocity V.

    The perturbed single atom is (w_j + t c) delta at x_j + tt * V with
    tt = t / (w_j + t c); the quotient

        [alpha(|w_j + t c| - |w_j|) - t <p, mu_t>] / (t^2 / 2)

    uses the exact TV norm and the cached dual variable, no finite
    differencing of the objective.  Converges at rate O(t) to
    -(1/w_j) V . hess p(x_j) V for a stationary u.
    """
    if not 0 <= j < u.num_atoms:
        raise IndexError(f"atom index {j} out of range")
    if t <= 0:
        raise ValueError("t must be positive")
    V = np.atleast_1d(np.asarray(V, dtype=float))
    lam = float(u.weights[j])
    x = u.positions[j]
    new_w = lam + t * c
    if abs(new_w) < 1e-12:
        raise ValueError("t c cancels the atom weight; pick a smaller t")
    x_new = x + (t / new_w) * V
    if not problem.domain.contains(x_new):
        raise DomainError(f"shifted atom {x_new.tolist()} leaves the domain")

    dual = dual_variable(problem, u)
    g_diff = problem.alpha * (abs(new_w) - abs(lam))
    pairing = c * dual.value(x) + new_w * (dual.value(x_new) - dual.value(x)) / t
    return float((g_diff - t * pairing) / (t * t / 2.0))


def ndc_probe(problem: Problem, u: DiscreteMeasure, j: int, v,
              t: float) -> float:
    """Curvature probe splitting atom j symmetrically:
    mu_t = w_j (delta_{x - (t/w_j) v} - 2 delta_x + delta_{x + (t/w_j) v}) / (2t).

    Returns [G(u + t mu_t) - G(u)] / t^2 - <p, mu_t> / t with G the TV term;
    the total-variation difference vanishes for small t and the value tends
    to -sign_j hess p(x_j)[v, v] / (2 |w_j|) as t -> 0.
    """
    if not 0 <= j < u.num_atoms:
        raise IndexError(f"atom index {j} out of range")
    if t <= 0:
        raise ValueError("t must be positive")
    v = np.atleast_1d(np.asarray(v, dtype=float))
    lam = float(u.weights[j])
    x = u.positions[j]
    h = (t / lam) * v
    x_minus, x_plus = x - h, x + h
    for xx in (x_minus, x_plus):
        if not problem.domain.contains(xx):
            raise DomainError(f"probe point {xx.tolist()} leaves the domain")

    dual = dual_variable(problem, u)
    perturbed = u.with_atom(x, -lam).with_atom(x_minus, lam / 2.0) \
                 .with_atom(x_plus, lam / 2.0)
    g_term = problem.alpha * (perturbed.tv_norm() - u.tv_norm())
    second_diff = dual.value(x_minus) - 2.0 * dual.value(x) + dual.value(x_plus)
    pairing = lam * second_diff / (2.0 * t)
    return float(g_term / (t * t) - pairing / t)
