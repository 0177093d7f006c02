"""Configurations of tangent horospheres and their validation."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..h3geom import INFINITY, BoundaryPoint, Isometry


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Horosphere:
    """A horosphere: Euclidean sphere tangent to the boundary, or a horizontal plane.

    ``end`` is the ideal point; for a finite end ``size`` is the Euclidean
    radius, for the end at infinity it is the plane height z = size.
    """

    end: BoundaryPoint
    size: float

    def __post_init__(self):
        if self.size <= 0:
            raise ConfigError("horosphere size must be positive")

    @property
    def is_plane(self) -> bool:
        return self.end.is_infinity

    def top_point(self) -> np.ndarray:
        if self.is_plane:
            raise ConfigError("plane horosphere has no top point")
        e = self.end.as_array()
        return np.array([e[0], e[1], 2.0 * self.size])

    def normalizing_chart(self) -> Isometry:
        """Isometry sending this horosphere to the plane z = 1."""
        if self.is_plane:
            return Isometry.dilation(1.0 / self.size)
        return (
            Isometry.inversion()
            @ Isometry.dilation(1.0 / (2.0 * self.size))
            @ Isometry.translation(-self.end.as_array())
        )

    def shrunk(self, eta: float) -> "Horosphere":
        """Consistent radius reduction: the horoball shrinks toward its end."""
        if self.is_plane:
            return replace(self, size=self.size * (1.0 + eta))
        return replace(self, size=self.size / (1.0 + eta))


def tangency_gap(h1: Horosphere, h2: Horosphere) -> float:
    """Signed tangency defect: 0 at tangency, > 0 disjoint, < 0 overlapping."""
    if h1.is_plane and h2.is_plane:
        return np.inf  # parallel horospheres at the same end never touch
    if h1.is_plane or h2.is_plane:
        plane, ball = (h1, h2) if h1.is_plane else (h2, h1)
        return plane.size - 2.0 * ball.size
    p, q = h1.end.as_array(), h2.end.as_array()
    return float(np.sum((p - q) ** 2) - 4.0 * h1.size * h2.size)


def tangency_point(h1: Horosphere, h2: Horosphere) -> np.ndarray:
    if h1.is_plane or h2.is_plane:
        plane, ball = (h1, h2) if h1.is_plane else (h2, h1)
        e = ball.end.as_array()
        return np.array([e[0], e[1], plane.size])
    c1 = np.array([*h1.end.as_array(), h1.size])
    c2 = np.array([*h2.end.as_array(), h2.size])
    d = c2 - c1
    return c1 + d * (h1.size / np.linalg.norm(d))


@dataclass
class Numerics:
    """Resolution and tolerance knobs; defaults match the shipped examples."""

    eps: float = 0.05
    rho: float | None = None  # None: quarter of the minimal normalized inter-end distance
    kappa: float = 10.0
    m_max: int = 12
    n_r: int = 540
    r_out_factor: float = 1e4
    n_theta: int = 64
    s_points_per_unit: int = 160
    horosphere_tol: float = 1e-10
    neck_update_tol: float = 1e-11
    neck_residual_tol: float = 1e-10
    seam_tol: float = 1e-8
    max_outer: int = 50
    mesh_n_theta: int = 64
    mesh_cap_factor: float = 8.0
    threads: int = 1

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ConfigError(f"eps must lie in (0, 1); got {self.eps}")
        if self.n_theta < 2 * self.m_max + 2:
            raise ConfigError("n_theta too small for m_max")


@dataclass
class Configuration:
    horospheres: list[Horosphere]
    selected: list[tuple[int, int]]  # the necks actually glued (subset of tangencies)
    numerics: Numerics = field(default_factory=Numerics)
    tol: float = 1e-9  # tangency tolerance on the normalized scale

    def __post_init__(self):
        self.selected = [tuple(sorted(p)) for p in self.selected]
        if len(set(self.selected)) != len(self.selected):
            raise ConfigError("duplicate selected tangencies")

    @property
    def eta(self) -> float:
        e = self.numerics.eps
        return -e * np.log(e)

    def tangencies(self) -> list[tuple[int, int]]:
        """All geometric tangency pairs (the full tangency set)."""
        n = len(self.horospheres)
        out = []
        for i in range(n):
            for j in range(i + 1, n):
                if abs(tangency_gap(self.horospheres[i], self.horospheres[j])) <= self.tol:
                    out.append((i, j))
        return out

    def neighbors(self, i: int) -> list[int]:
        return sorted(j if k == i else k for (k, j) in self.selected if i in (k, j))


def validate_configuration(config: Configuration) -> dict:
    """Check the tangency/disjointness structure and the connectivity of the
    selected gluing graph; report the predicted genus (its cycle rank)."""
    hs = config.horospheres
    n = len(hs)
    if n < 2:
        raise ConfigError("need at least two horospheres")
    ends = [h.end for h in hs]
    for i in range(n):
        for j in range(i + 1, n):
            if ends[i].isclose(ends[j], tol=config.tol):
                raise ConfigError(f"horospheres {i} and {j} share an end")
    tangent = set(config.tangencies())
    for i in range(n):
        for j in range(i + 1, n):
            gap = tangency_gap(hs[i], hs[j])
            if gap < -config.tol:
                raise ConfigError(f"horospheres {i} and {j} overlap (gap {gap:.3e})")
    for pair in config.selected:
        if pair not in tangent:
            raise ConfigError(f"selected pair {pair} is not a tangency")
    # connectivity of (I, selected)
    adj = {i: set() for i in range(n)}
    for i, j in config.selected:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    stack = [0]
    while stack:
        for k in adj[stack.pop()]:
            if k not in seen:
                seen.add(k)
                stack.append(k)
    if len(seen) != n:
        raise ConfigError("selected tangencies do not connect the configuration")
    genus = len(config.selected) - n + 1
    return {
        "n_horospheres": n,
        "tangencies": sorted(tangent),
        "selected": sorted(config.selected),
        "predicted_genus": genus,
        "ends_truncated": n,
        "theorem_bound_2n_ge_g_plus_5": 2 * n >= genus + 5,
    }


def shrink_horospheres(config: Configuration) -> tuple[float, list[Horosphere]]:
    """eta = -eps log eps and the consistently shrunk horospheres.

    In each normalized chart the shrunk own-horosphere is the plane z = 1+eta
    and every shrunk neighbor is the sphere of radius 1/(2(1+eta)).
    """
    eta = config.eta
    return eta, [h.shrunk(eta) for h in config.horospheres]
