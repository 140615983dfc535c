"""Finitely supported signed measures on a compact box.

The basic value type is :class:`DiscreteMeasure`: a finite list of weighted
point masses living in a :class:`Domain`.  Construction always canonicalizes
(atoms merged within ``merge_tol``, negligible weights dropped, positions in
lexicographic order), so two measures representing the same combination of
point masses compare equal atom-by-atom.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import DomainError

# Canonicalization defaults; see canonicalize().
MERGE_TOL = 1e-9
WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned compact box ``prod_i [lower_i, upper_i]``, dimension >= 1."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(hi) or len(lo) == 0:
            raise ValueError("lower/upper must have equal positive length")
        if not all(np.isfinite(lo)) or not all(np.isfinite(hi)):
            raise ValueError("domain bounds must be finite")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("domain requires lower < upper in every axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lower_arr(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def upper_arr(self) -> np.ndarray:
        return np.asarray(self.upper)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper_arr - self.lower_arr))

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower_arr - tol)
                    and np.all(x <= self.upper_arr + tol))

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower_arr, self.upper_arr)

    def boundary_distance(self, x) -> float:
        """Distance from x to the boundary of the box (0 outside)."""
        x = np.asarray(x, dtype=float)
        gaps = np.minimum(x - self.lower_arr, self.upper_arr - x)
        return float(max(np.min(gaps), 0.0))

    def grid(self, n: int) -> np.ndarray:
        """Regular grid with ``n + 1`` points per axis, shape ``(m, dim)``.

        Grids for n and 2n are nested, which keeps grid-scan maxima monotone
        under refinement.
        """
        if n < 1:
            raise ValueError("grid resolution must be >= 1")
        axes = [np.linspace(a, b, n + 1) for a, b in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n uniform points in the box, shape (n, dim)."""
        return rng.uniform(self.lower_arr, self.upper_arr, size=(n, self.dim))


def _canonical_atoms(domain, positions, weights, merge_tol, weight_tol):
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    if positions.size == 0:
        return (np.zeros((0, domain.dim)), np.zeros(0))
    if positions.shape[0] != weights.shape[0]:
        raise ValueError("positions and weights length mismatch")
    if positions.shape[1] != domain.dim:
        raise ValueError(
            f"atom dimension {positions.shape[1]} != domain dimension {domain.dim}")
    if not (np.all(np.isfinite(positions)) and np.all(np.isfinite(weights))):
        raise ValueError("atom data must be finite")
    for x in positions:
        if not domain.contains(x):
            raise DomainError(f"atom at {x.tolist()} lies outside the domain")

    n = positions.shape[0]
    # Union-find merge of positions within merge_tol (n is small everywhere
    # in this package, so the quadratic pass is fine).
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if merge_tol > 0:
        for i in range(n):
            for j in range(i + 1, n):
                if np.linalg.norm(positions[i] - positions[j]) <= merge_tol:
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[rj] = ri
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    merged_pos, merged_w = [], []
    for members in groups.values():
        w = float(np.sum(weights[members]))
        if abs(w) <= weight_tol:
            continue
        if len(members) == 1:
            # untouched: no arithmetic may perturb a lone atom's position
            rep = positions[members[0]]
        else:
            # weight-averaged representative keeps merges order-independent
            aw = np.abs(weights[members])
            rep = (np.average(positions[members], axis=0, weights=aw)
                   if np.sum(aw) > 0 else np.mean(positions[members], axis=0))
            rep = domain.project(rep)
        merged_pos.append(rep)
        merged_w.append(w)

    if not merged_pos:
        return (np.zeros((0, domain.dim)), np.zeros(0))
    P = np.asarray(merged_pos)
    W = np.asarray(merged_w)
    order = np.lexsort(P.T[::-1])  # lexicographic by coordinates
    return (P[order], W[order])


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite weighted sum of point masses on a box domain.

    Always stored canonically: positions merged within ``merge_tol``, weights
    with modulus <= ``weight_tol`` dropped, atoms sorted lexicographically by
    position.  Arrays are read-only; treat instances as immutable values.
    """

    domain: Domain
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    merge_tol: float = MERGE_TOL
    weight_tol: float = WEIGHT_TOL

    def __post_init__(self):
        P, W = _canonical_atoms(self.domain, self.positions, self.weights,
                                self.merge_tol, self.weight_tol)
        P.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "positions", P)
        object.__setattr__(self, "weights", W)

    # -- basic queries ----------------------------------------------------

    @property
    def num_atoms(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return self.domain.dim

    def mass(self) -> float:
        """Total (signed) mass u(domain)."""
        return float(np.sum(self.weights))

    def tv_norm(self) -> float:
        """Total variation norm: sum of |weight| over atoms."""
        return float(np.sum(np.abs(self.weights)))

    def is_nonnegative(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.weights >= -tol))

    def atoms(self):
        """Iterate over (position, weight) pairs."""
        return list(zip(self.positions, self.weights))

    def min_pairwise_distance(self) -> float:
        """Smallest distance between distinct atoms (inf when < 2 atoms)."""
        n = self.num_atoms
        if n < 2:
            return float("inf")
        best = float("inf")
        for i in range(n - 1):
            d = np.linalg.norm(self.positions[i + 1:] - self.positions[i], axis=1)
            best = min(best, float(np.min(d)))
        return best

    def min_boundary_distance(self) -> float:
        """Smallest distance from an atom to the domain boundary (inf if empty)."""
        if self.num_atoms == 0:
            return float("inf")
        return min(self.domain.boundary_distance(x) for x in self.positions)

    # -- algebra ----------------------------------------------------------

    def _binary(self, other, sign):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        if self.domain != other.domain:
            raise ValueError("measures live on different domains")
        P = np.concatenate([self.positions, other.positions], axis=0) \
            if (self.num_atoms or other.num_atoms) else np.zeros((0, self.dim))
        W = np.concatenate([self.weights, sign * other.weights])
        return DiscreteMeasure(self.domain, P, W)

    def __add__(self, other):
        return self._binary(other, +1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return DiscreteMeasure(self.domain, self.positions, -self.weights)

    def __mul__(self, c):
        c = float(c)
        return DiscreteMeasure(self.domain, self.positions, c * self.weights)

    __rmul__ = __mul__

    def with_atom(self, x, w) -> "DiscreteMeasure":
        """New measure with one extra point mass of weight w at x."""
        P = np.concatenate([self.positions, np.atleast_2d(np.asarray(x, float))])
        W = np.concatenate([self.weights, [float(w)]])
        return DiscreteMeasure(self.domain, P, W)

    def allclose(self, other, tol: float = 1e-12) -> bool:
        if self.num_atoms != other.num_atoms:
            return False
        if self.num_atoms == 0:
            return True
        return bool(np.allclose(self.positions, other.positions, atol=tol)
                    and np.allclose(self.weights, other.weights, atol=tol))


# -- module-level operations ---------------------------------------------


def canonicalize(domain: Domain, atoms, merge_tol: float = MERGE_TOL,
                 weight_tol: float = WEIGHT_TOL) -> DiscreteMeasure:
    """Build a canonical measure from raw (position, weight) pairs.

    Atoms closer than ``merge_tol`` (Euclidean) are merged with summed
    weights; atoms with |weight| <= ``weight_tol`` are dropped; the result is
    ordered lexicographically by position.  Raises :class:`DomainError` for
    positions outside the domain.
    """
    if len(atoms) == 0:
        return DiscreteMeasure(domain, np.zeros((0, domain.dim)), np.zeros(0))
    P = np.asarray([a[0] if np.ndim(a[0]) else [a[0]] for a in atoms], dtype=float)
    W = np.asarray([a[1] for a in atoms], dtype=float)
    return DiscreteMeasure(domain, P, W, merge_tol=merge_tol, weight_tol=weight_tol)


def tv_norm(u: DiscreteMeasure) -> float:
    return u.tv_norm()


def jordan_decompose(u: DiscreteMeasure):
    """Split u into nonnegative parts (u_plus, u_minus) with u = u_plus - u_minus.

    Both parts carry nonnegative weights; their supports are disjoint because
    u is canonical.
    """
    pos = u.weights > 0
    neg = ~pos
    u_plus = DiscreteMeasure(u.domain, u.positions[pos], u.weights[pos])
    u_minus = DiscreteMeasure(u.domain, u.positions[neg], -u.weights[neg])
    return u_plus, u_minus


def zero_measure(domain: Domain) -> DiscreteMeasure:
    return DiscreteMeasure(domain, np.zeros((0, domain.dim)), np.zeros(0))


def dirac(domain: Domain, x, w: float = 1.0) -> DiscreteMeasure:
    return DiscreteMeasure(domain, np.atleast_2d(np.asarray(x, float)),
                           np.asarray([w], float))


# -- serialization --------------------------------------------------------


def measure_to_dict(u: DiscreteMeasure) -> dict:
    return {"atoms": [{"x": [float(v) for v in x], "w": float(w)}
                      for x, w in u.atoms()]}


def measure_from_dict(domain: Domain, data: dict) -> DiscreteMeasure:
    atoms = data.get("atoms")
    if atoms is None:
        raise ValueError("measure dict lacks an 'atoms' key")
    pairs = [(np.asarray(a["x"], dtype=float), float(a["w"])) for a in atoms]
    return canonicalize(domain, pairs)


def save_measure(path, u: DiscreteMeasure) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_dict(u), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_measure(path, domain: Domain) -> DiscreteMeasure:
    with open(path) as fh:
        return measure_from_dict(domain, json.load(fh))
