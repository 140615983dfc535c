"""Forward model, objective, and the dual variable.

A problem instance is ``min_u  loss(K u) + alpha * ||u||_TV`` where the
observation map K integrates a vector of smooth kernel components against
the measure: ``(K u)_i = sum_j weight_j * k_i(position_j)``.

The dual variable ``p(x) = -<k(x), grad loss(K u)>`` drives every
certificate in this package; its gradient and Hessian come from
differentiating the kernel components analytically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json
import os

import numpy as np

from .errors import ConfigError
from .measures import DiscreteMeasure, Domain, measure_from_dict


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class Kernel:
    """Vector of C^2 kernel components on R^d.

    family "gaussian": component i is exp(-|x - c_i|^2 / (2 b^2)) with
    centers c_i = points[i] and bandwidth b.

    family "fourier": for each frequency w_i = points[i] there are two
    components cos(w_i . x) and sin(w_i . x) (cosines first, then sines).
    """

    family: str
    points: np.ndarray
    bandwidth: float = 1.0

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        P.setflags(write=False)
        object.__setattr__(self, "points", P)
        if self.family not in ("gaussian", "fourier"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian" and not self.bandwidth > 0:
            raise ValueError("gaussian kernel needs bandwidth > 0")

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def n_components(self) -> int:
        p = self.points.shape[0]
        return p if self.family == "gaussian" else 2 * p

    # all evaluations are batched: X has shape (n, d)

    def value_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.family == "gaussian":
            diff = X[:, None, :] - self.points[None, :, :]
            sq = np.sum(diff * diff, axis=-1)
            return np.exp(-sq / (2.0 * self.bandwidth ** 2))
        phase = X @ self.points.T
        return np.concatenate([np.cos(phase), np.sin(phase)], axis=1)

    def value(self, x) -> np.ndarray:
        return self.value_batch(np.atleast_2d(x))[0]

    def jac(self, x) -> np.ndarray:
        """Component gradients at a single point, shape (n_components, d)."""
        x = np.asarray(x, dtype=float)
        if self.family == "gaussian":
            diff = self.points - x[None, :]          # c_i - x
            vals = self.value(x)
            return vals[:, None] * diff / self.bandwidth ** 2
        phase = self.points @ x
        dcos = -np.sin(phase)[:, None] * self.points
        dsin = np.cos(phase)[:, None] * self.points
        return np.concatenate([dcos, dsin], axis=0)

    def hess(self, x) -> np.ndarray:
        """Component Hessians at a single point, shape (n_components, d, d)."""
        x = np.asarray(x, dtype=float)
        d = self.dim
        if self.family == "gaussian":
            diff = self.points - x[None, :]
            vals = self.value(x)
            b2 = self.bandwidth ** 2
            outer = diff[:, :, None] * diff[:, None, :] / b2 ** 2
            return vals[:, None, None] * (outer - np.eye(d)[None] / b2)
        phase = self.points @ x
        outer = self.points[:, :, None] * self.points[:, None, :]
        hcos = -np.cos(phase)[:, None, None] * outer
        hsin = -np.sin(phase)[:, None, None] * outer
        return np.concatenate([hcos, hsin], axis=0)


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class Loss:
    """Smooth data-fit term on the observation space.

    family "quadratic": 0.5 |y - y_d|^2 (strongly convex, modulus 1).

    family "nonconvex_demo": 0.5 |y - y_d|^2 - beta * exp(-|y - y_d|^2 / 2),
    a quadratic plus a smooth concave dip at y_d; loses convexity at
    moderate residuals once beta > 1.
    """

    family: str
    y_d: np.ndarray
    beta: float = 0.5

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y_d, dtype=float))
        y.setflags(write=False)
        object.__setattr__(self, "y_d", y)
        if self.family not in ("quadratic", "nonconvex_demo"):
            raise ValueError(f"unknown loss family {self.family!r}")

    @property
    def convexity_modulus(self):
        """Strong-convexity modulus, or None when not globally convex."""
        return 1.0 if self.family == "quadratic" else None

    def value(self, y) -> float:
        r = np.asarray(y, dtype=float) - self.y_d
        s = float(r @ r)
        if self.family == "quadratic":
            return 0.5 * s
        return 0.5 * s - self.beta * np.exp(-0.5 * s)

    def grad(self, y) -> np.ndarray:
        r = np.asarray(y, dtype=float) - self.y_d
        if self.family == "quadratic":
            return r
        g = np.exp(-0.5 * float(r @ r))
        return (1.0 + self.beta * g) * r

    def hess(self, y) -> np.ndarray:
        m = self.y_d.shape[0]
        if self.family == "quadratic":
            return np.eye(m)
        r = np.asarray(y, dtype=float) - self.y_d
        g = np.exp(-0.5 * float(r @ r))
        return (1.0 + self.beta * g) * np.eye(m) \
            - self.beta * g * np.outer(r, r)


# ---------------------------------------------------------------------------
# problem and dual variable


@dataclass(frozen=True)
class Problem:
    domain: Domain
    kernel: Kernel
    loss: Loss
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kernel.dim != self.domain.dim:
            raise ValueError("kernel dimension does not match the domain")
        if self.loss.y_d.shape[0] != self.kernel.n_components:
            raise ValueError("loss target length does not match the kernel")


def apply_K(problem: Problem, u: DiscreteMeasure) -> np.ndarray:
    """Observation vector K u."""
    if u.num_atoms == 0:
        return np.zeros(problem.kernel.n_components)
    return problem.kernel.value_batch(u.positions).T @ u.weights


def objective(problem: Problem, u: DiscreteMeasure) -> float:
    return problem.loss.value(apply_K(problem, u)) + problem.alpha * u.tv_norm()


@dataclass(frozen=True)
class DualVariable:
    """p(x) = -<k(x), residual> with residual = grad loss(K u), cached."""

    problem: Problem
    residual: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.residual, dtype=float).copy()
        r.setflags(write=False)
        object.__setattr__(self, "residual", r)

    def value_batch(self, X) -> np.ndarray:
        return -(self.problem.kernel.value_batch(X) @ self.residual)

    def value(self, x) -> float:
        return float(self.value_batch(np.atleast_2d(x))[0])

    def grad(self, x) -> np.ndarray:
        return -(self.problem.kernel.jac(x).T @ self.residual)

    def hess(self, x) -> np.ndarray:
        H = -np.einsum("m,mij->ij", self.residual, self.problem.kernel.hess(x))
        return 0.5 * (H + H.T)

    def pairing(self, u: DiscreteMeasure) -> float:
        """<p, u> = sum_j weight_j p(position_j)."""
        if u.num_atoms == 0:
            return 0.0
        return float(self.value_batch(u.positions) @ u.weights)


def dual_variable(problem: Problem, u: DiscreteMeasure) -> DualVariable:
    return DualVariable(problem, problem.loss.grad(apply_K(problem, u)))


# ---------------------------------------------------------------------------
# geometry checks: Lipschitz embedding and uniform first-order expansion


@dataclass(frozen=True)
class LipschitzReport:
    max_quotient: float
    grad_bound: float
    passed: bool


def _sample_base_points(domain: Domain, rng: np.random.Generator,
                        n_random: int = 64) -> np.ndarray:
    per_axis = max(2, int(round(81 ** (1.0 / domain.dim))))
    pts = [domain.grid(per_axis - 1)]
    pts.append(domain.sample(rng, n_random))
    return np.concatenate(pts, axis=0)


def lipschitz_embedding_check(domain: Domain, f, grad_f, *, seed: int = 0,
                              n_pairs: int = 2000) -> LipschitzReport:
    """Sampled check that difference quotients of f never exceed the
    sup-norm of its derivative on the box (Lipschitz constant C = 1 for a
    convex box).  f may be scalar or vector valued; grad_f then returns the
    gradient or the Jacobian and the bound uses the spectral norm."""
    rng = np.random.default_rng(seed)
    base = _sample_base_points(domain, rng, n_random=256)
    grad_bound = max(float(np.linalg.norm(np.atleast_2d(
        np.asarray(grad_f(x), dtype=float)), ord=2)) for x in base)
    X = domain.sample(rng, n_pairs)
    Y = domain.sample(rng, n_pairs)
    worst = 0.0
    for x, y in zip(X, Y):
        h = float(np.linalg.norm(y - x))
        if h < 1e-12:
            continue
        q = float(np.linalg.norm(np.asarray(f(y), dtype=float)
                                 - np.asarray(f(x), dtype=float))) / h
        worst = max(worst, q)
    passed = worst <= grad_bound * (1 + 1e-9) + 1e-9
    return LipschitzReport(worst, grad_bound, passed)


def _taylor_holds(domain, f, grad_f, eps, delta, rng, n_dirs=8):
    base = _sample_base_points(domain, rng, n_random=48)
    d = domain.dim
    for x in base:
        fx = float(f(x))
        gx = np.asarray(grad_f(x), dtype=float)
        dirs = rng.normal(size=(n_dirs, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        for u in dirs:
            for frac in (1.0, 0.5, 0.25, rng.uniform(0.05, 1.0)):
                y = domain.project(x + delta * frac * u)
                h = float(np.linalg.norm(y - x))
                if h < 1e-14:
                    continue
                rem = abs(float(f(y)) - fx - float(gx @ (y - x)))
                if rem > eps * h + 1e-12:
                    return False
    return True


def uniform_taylor_check(domain: Domain, f, grad_f, eps: float, *,
                         seed: int = 0, max_bisect: int = 40) -> float:
    """Largest sampled radius delta such that the first-order Taylor
    remainder of f stays below eps * |y - x| for all checked pairs with
    |y - x| <= delta.

    Dyadic descent from the domain diameter followed by bisection against
    the first failing radius.  Sampled, not exhaustive: the result certifies
    the checked pairs only.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng = np.random.default_rng(seed)
    delta = domain.diameter()
    if _taylor_holds(domain, f, grad_f, eps, delta, rng):
        return delta
    lo = None
    hi = delta
    while delta > 1e-8 * domain.diameter():
        delta *= 0.5
        if _taylor_holds(domain, f, grad_f, eps, delta, rng):
            lo = delta
            break
        hi = delta
    if lo is None:
        return 0.0
    for _ in range(max_bisect):
        if hi - lo <= 1e-4 * lo:
            break
        mid = 0.5 * (lo + hi)
        if _taylor_holds(domain, f, grad_f, eps, mid, rng):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# scenario files


@dataclass(frozen=True)
class Scenario:
    """A problem plus optional reference measure and tool settings."""

    problem: Problem
    measure: DiscreteMeasure | None = None
    settings: dict = field(default_factory=dict)


def _need(data: dict, key: str, path: str):
    if key not in data:
        raise ConfigError(f"missing required field '{key}'", field=key, path=path)
    return data[key]


def _build_problem(data: dict, path: str, base_dir: str) -> Problem:
    dom = _need(data, "domain", path)
    try:
        domain = Domain(tuple(dom["lower"]), tuple(dom["upper"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad domain: {exc}", field="domain", path=path)

    ker = _need(data, "kernel", path)
    family = ker.get("family")
    try:
        if family == "gaussian":
            kernel = Kernel("gaussian", np.asarray(ker["centers"], dtype=float),
                            float(ker.get("bandwidth", 1.0)))
        elif family == "fourier":
            kernel = Kernel("fourier", np.asarray(ker["frequencies"], dtype=float))
        else:
            raise ConfigError(f"unknown kernel family {family!r}",
                              field="kernel.family", path=path)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad kernel: {exc}", field="kernel", path=path)

    los = _need(data, "loss", path)
    try:
        y_d = los["y_d"]
        if isinstance(y_d, dict):
            csv = y_d.get("csv")
            if csv is None:
                raise ConfigError("y_d dict must carry a 'csv' path",
                                  field="loss.y_d", path=path)
            y_d = np.loadtxt(os.path.join(base_dir, csv), delimiter=",")
        loss = Loss(los.get("family", "quadratic"),
                    np.asarray(y_d, dtype=float).ravel(),
                    beta=float(los.get("beta", 0.5)))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"bad loss: {exc}", field="loss", path=path)

    try:
        return Problem(domain, kernel, loss, float(_need(data, "alpha", path)))
    except ValueError as exc:
        raise ConfigError(str(exc), field="alpha", path=path)


def load_scenario(path) -> Scenario:
    """Read a problem scenario from a JSON or TOML file.

    Schema: domain {lower, upper}, kernel {family, centers|frequencies,
    bandwidth}, loss {family, y_d (inline array or {"csv": relpath}), beta},
    alpha; optional measure {"atoms": [...]}; anything else is returned
    unparsed in ``settings``.
    """
    path = str(path)
    try:
        if path.endswith(".toml"):
            try:
                import tomllib
            except ImportError:  # python < 3.11
                import tomli as tomllib
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        else:
            with open(path) as fh:
                data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=path)
    except ValueError as exc:
        raise ConfigError(f"cannot parse config: {exc}", path=path)

    problem = _build_problem(data, path, os.path.dirname(os.path.abspath(path)))
    measure = None
    if "measure" in data:
        try:
            measure = measure_from_dict(problem.domain, data["measure"])
        except Exception as exc:
            raise ConfigError(f"bad measure: {exc}", field="measure", path=path)
    known = {"domain", "kernel", "loss", "alpha", "measure"}
    settings = {k: v for k, v in data.items() if k not in known}
    return Scenario(problem, measure, settings)


def load_problem(path) -> Problem:
    return load_scenario(path).problem
