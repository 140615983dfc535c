"""Empirical probing of quadratic growth in the bounded-Lipschitz distance.

A certified stationary measure should satisfy J(u) - J(u0) >= gamma *
BL(u - u0)^2 on a neighborhood.  This module emits structured perturbation
families around u0, evaluates the exact objective gap and BL distance of
each, and reports the worst ratio.  Degenerate problems reveal themselves
through ratios that collapse as the perturbation radius shrinks; healthy
ones keep the minimum ratio bounded away from zero.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .measures import DiscreteMeasure
from .model import Problem, objective
from .optimality import ActiveSets
from .transport import bl_norm

BL_SKIP_TOL = 1e-12
GAP_SLACK = 1e-12


class Perturbation(NamedTuple):
    """A candidate measure u' together with its family tag and radius."""

    tag: str
    radius: float
    measure: DiscreteMeasure


@dataclass(frozen=True)
class GrowthConfig:
    """Knobs for the perturbation sampler.

    eps: neighborhood radius; None picks half the smallest relevant length
    scale of u (pairwise atom distance, boundary distance, exclusion radius
    of the active-set report).  radii overrides the log-spaced default.
    """

    eps: float | None = None
    radii: tuple | None = None
    n_radii: int = 8
    seed: int = 0
    n_random_dirs: int = 2
    n_random_points: int = 3
    gamma_tol: float = 1e-8
    threads: int | None = None


@dataclass(frozen=True)
class GrowthEntry:
    tag: str
    radius: float
    bl_distance: float
    objective_gap: float
    ratio: float


@dataclass(frozen=True)
class GrowthReport:
    """Sampled ratios gap / BL^2 around a stationary candidate.

    gamma_hat is the minimum ratio over all retained samples; it estimates
    the growth constant from below on the sampled set, nothing more.
    """

    samples: tuple
    gamma_hat: float
    eps: float
    verdict: bool
    gamma_tol: float
    min_gap: float
    skipped: tuple

    def csv_rows(self):
        """(bl_distance, gap) pairs for external plotting."""
        return [(e.bl_distance, e.objective_gap) for e in self.samples]

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "eps": self.eps,
            "verdict": bool(self.verdict),
            "gamma_tol": self.gamma_tol,
            "min_gap": self.min_gap,
            "n_samples": len(self.samples),
            "skipped": list(self.skipped),
            "samples": [
                {"tag": e.tag, "radius": e.radius,
                 "bl_distance": e.bl_distance,
                 "objective_gap": e.objective_gap, "ratio": e.ratio}
                for e in self.samples
            ],
        }


def default_eps(u: DiscreteMeasure, sets: ActiveSets | None = None) -> float:
    """Half the smallest length scale that keeps perturbations local."""
    scales = [u.domain.diameter() / 4.0]
    if u.num_atoms:
        pair = u.min_pairwise_distance()
        if np.isfinite(pair):
            scales.append(pair)
        scales.append(u.min_boundary_distance())
    if sets is not None and np.isfinite(sets.r0) and sets.r0 > 0:
        scales.append(sets.r0)
    eps = 0.5 * min(s for s in scales if s > 0)
    return float(eps)


def _radii(config: GrowthConfig, eps: float) -> tuple:
    if config.radii is not None:
        return tuple(float(r) for r in config.radii)
    return tuple(np.geomspace(eps / 100.0, eps, config.n_radii))


def sample_perturbations(u: DiscreteMeasure,
                         sets: ActiveSets | None = None,
                         config: GrowthConfig | None = None) -> list:
    """Deterministic list of perturbed measures around u.

    Families: weight bumps on single atoms and atom pairs, position shifts
    of whole atoms, new atoms at near-active candidate points and at seeded
    random points, the symmetric second-difference splitter, and fractional
    mass splits.  Directions and random points are drawn once and shared
    across all radii so per-tag ratio decay is meaningful.
    """
    config = config or GrowthConfig()
    eps = config.eps if config.eps is not None else default_eps(u, sets)
    radii = _radii(config, eps)
    rng = np.random.default_rng(config.seed)
    dom = u.domain
    d = dom.dim
    N = u.num_atoms

    # shared direction set: +/- axes, then seeded unit vectors
    dirs = []
    for a in range(d):
        e = np.zeros(d)
        e[a] = 1.0
        dirs.append(e.copy())
        dirs.append(-e)
    for _ in range(config.n_random_dirs):
        v = rng.normal(size=d)
        dirs.append(v / np.linalg.norm(v))
    rand_pts = [dom.sample(rng, 1)[0] for _ in range(config.n_random_points)]

    out: list[Perturbation] = []

    def emit(tag, h, m):
        if m is not None:
            out.append(Perturbation(tag, float(h), m))

    def shifted(xj, lam, h, v):
        # move the whole atom; None if the target leaves the box
        z = xj + h * v
        if not dom.contains(z):
            return None
        return u.with_atom(xj, -lam).with_atom(z, lam)

    for h in radii:
        for j in range(N):
            xj = u.positions[j]
            lam = u.weights[j]
            for sgn in (1.0, -1.0):
                emit(f"weight{j}{'+' if sgn > 0 else '-'}", h,
                     u.with_atom(xj, sgn * h))
            for i_v, v in enumerate(dirs):
                emit(f"shift{j}d{i_v}", h, shifted(xj, lam, h, v))
            for i_v, v in enumerate(dirs[::2]):
                lo, hi = xj - h * v, xj + h * v
                if dom.contains(lo) and dom.contains(hi):
                    m = (u.with_atom(xj, -lam)
                          .with_atom(lo, 0.5 * lam).with_atom(hi, 0.5 * lam))
                    emit(f"split{j}d{i_v}", h, m)
            for beta in (0.25, 0.5):
                v = dirs[0]
                z = xj + h * v
                if dom.contains(z):
                    m = u.with_atom(xj, -beta * lam).with_atom(z, beta * lam)
                    emit(f"frac{j}b{beta}", h, m)
        for j in range(N):
            for k in range(j + 1, N):
                for a in (1.0, -1.0):
                    for b in (1.0, -1.0):
                        m = (u.with_atom(u.positions[j], 0.5 * h * a)
                              .with_atom(u.positions[k], 0.5 * h * b))
                        emit(f"pair{j},{k}{a:+.0f}{b:+.0f}", h, m)
        if sets is not None:
            for i_z, z in enumerate(sets.i_plus):
                emit(f"insert-plus{i_z}", h, u.with_atom(np.asarray(z), h))
            for i_z, z in enumerate(sets.i_minus):
                emit(f"insert-minus{i_z}", h, u.with_atom(np.asarray(z), -h))
        for i_z, z in enumerate(rand_pts):
            emit(f"insert-rand{i_z}+", h, u.with_atom(z, h))
            emit(f"insert-rand{i_z}-", h, u.with_atom(z, -h))

    return out


def _n_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    return max(1, int(os.environ.get("RADON_CERT_THREADS", "1")))


def growth_ratio(problem: Problem, u: DiscreteMeasure,
                 samples: Sequence, gamma_tol: float = 1e-8,
                 eps: float | None = None,
                 threads: int | None = None) -> GrowthReport:
    """Evaluate gap / BL^2 for every sample and assemble the report.

    Samples may be Perturbation tuples or bare measures (tagged by index).
    Samples closer than BL_SKIP_TOL to u are skipped and listed in the
    report.  The verdict passes iff gamma_hat exceeds gamma_tol and no
    sample sits below J(u) by more than a float tolerance.
    """
    tagged = []
    for i, s in enumerate(samples):
        if isinstance(s, Perturbation):
            tagged.append(s)
        else:
            tagged.append(Perturbation(f"sample{i}", float("nan"), s))
    J0 = objective(problem, u)

    def one(pt: Perturbation):
        diff = pt.measure - u
        if diff.num_atoms == 0:
            return None
        bl = bl_norm(diff)
        if bl < BL_SKIP_TOL:
            return None
        gap = objective(problem, pt.measure) - J0
        return GrowthEntry(pt.tag, pt.radius, bl, gap, gap / bl ** 2)

    n = _n_threads(threads)
    if n > 1 and len(tagged) > 1:
        with ThreadPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(one, tagged))
    else:
        results = [one(pt) for pt in tagged]

    entries = [e for e in results if e is not None]
    skipped = tuple(pt.tag for pt, e in zip(tagged, results) if e is None)
    entries.sort(key=lambda e: (e.tag, e.radius))
    if eps is None:
        eps = max((e.bl_distance for e in entries), default=0.0)
    kept = [e for e in entries if e.bl_distance <= eps + BL_SKIP_TOL]
    gamma_hat = min((e.ratio for e in kept), default=float("inf"))
    min_gap = min((e.objective_gap for e in kept), default=0.0)
    verdict = bool(gamma_hat > gamma_tol and min_gap >= -GAP_SLACK)
    return GrowthReport(tuple(entries), float(gamma_hat), float(eps),
                        verdict, float(gamma_tol), float(min_gap), skipped)


def growth_report(problem: Problem, u: DiscreteMeasure,
                  sets: ActiveSets | None = None,
                  config: GrowthConfig | None = None) -> GrowthReport:
    """Sample perturbations and score them in one call."""
    config = config or GrowthConfig()
    samples = sample_perturbations(u, sets, config)
    return growth_ratio(problem, u, samples, gamma_tol=config.gamma_tol,
                        threads=config.threads)


def gamma_by_radius(report: GrowthReport) -> dict:
    """Minimum sampled ratio at each perturbation radius."""
    out: dict = {}
    for e in report.samples:
        if np.isnan(e.radius):
            continue
        out[e.radius] = min(out.get(e.radius, float("inf")), e.ratio)
    return out


RATIO_FLOOR = 1e-12


def decay_slope(report: GrowthReport, tail: int = 4) -> float:
    """Power-law exponent of min-ratio vs radius over the smallest radii.

    Near zero for a healthy instance; ~2 when curvature is absent and the
    ratio collapses quadratically.  A ratio at or below RATIO_FLOOR means
    an exact flat direction: returns inf.
    """
    gbr = gamma_by_radius(report)
    if not gbr:
        return 0.0
    radii = sorted(gbr, reverse=True)[-tail:]
    ratios = [gbr[r] for r in radii]
    if any(r <= RATIO_FLOOR for r in ratios):
        return float("inf")
    if len(radii) < 2:
        return 0.0
    slope, _ = np.polyfit(np.log(radii), np.log(ratios), 1)
    return float(slope)
