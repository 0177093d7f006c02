"""Chart atlas: canonical per-horosphere charts and pair-chart transitions.

Every horosphere gets one chart sending it to the plane z = 1 with its selected
neighbors as radius-1/2 spheres; the chart is canonicalized from configuration
data alone (first neighbor end at the origin, second rotated to the positive x
axis, third reflected to y >= 0) so that equivalent configurations produce
identical charts up to the corresponding global isometry.

For a glued pair, the neck is built in the pair chart of the lower index; the
other side's seam lives in the mirror chart (unit inversion about the seam
center), and the transition from there to the neighbor's own chart is an exact
O(2) rotation/reflection applied to circle modes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..h3geom import Isometry, bp
from .config import Configuration, ConfigError


def _rotation_to_x(v: np.ndarray) -> Isometry:
    c = v / np.linalg.norm(v)
    mat = np.array([[c[0], c[1]], [-c[1], c[0]]])
    return Isometry.rotation(mat)


@dataclass
class SeamTransform:
    """O(2) change of circle parameterization: theta' = angle +- theta."""

    angle: float
    reflect: bool

    def apply_modes(self, modes: np.ndarray) -> np.ndarray:
        """Modes of g'(theta') = g(theta) given theta' = angle + (-1)^reflect theta.

        g'(phi) = g(sigma^{-1}(phi)); for a rotation c'_m = c_m e^{-i m angle},
        for a reflection c'_m = conj(c_m) e^{-i m angle}.
        """
        m = np.arange(len(modes))
        base = np.conj(modes) if self.reflect else np.asarray(modes, dtype=complex)
        return base * np.exp(-1j * m * self.angle)

    def invert_modes(self, modes: np.ndarray) -> np.ndarray:
        m = np.arange(len(modes))
        un = np.asarray(modes, dtype=complex) * np.exp(1j * m * self.angle)
        return np.conj(un) if self.reflect else un


def seam_transform_from_isometry(iso: Isometry, tol: float = 1e-9) -> SeamTransform:
    """Extract the horizontal O(2) part of an isometry fixing z=1, 0 and infinity."""
    e1 = iso.boundary(bp(1.0, 0.0)).as_array()
    e2 = iso.boundary(bp(0.0, 1.0)).as_array()
    mat = np.column_stack([e1, e2])
    if not np.allclose(mat.T @ mat, np.eye(2), atol=tol):
        raise ConfigError("seam transition is not an orthogonal map; chart construction is broken")
    if not iso.boundary(bp(0.0, 0.0)).isclose(bp(0.0, 0.0), tol=tol):
        raise ConfigError("seam transition does not fix the seam center")
    reflect = bool(np.linalg.det(mat) < 0)
    angle = float(np.arctan2(mat[1, 0], mat[0, 0]))
    return SeamTransform(angle, reflect)


class ChartAtlas:
    """Per-horosphere canonical charts plus seam bookkeeping for one configuration."""

    def __init__(self, config: Configuration):
        self.config = config
        self.charts: list[Isometry] = []
        self.neighbor_ends: list[dict[int, np.ndarray]] = []
        hs = config.horospheres
        for i, h in enumerate(hs):
            chart = h.normalizing_chart()
            nbrs = config.neighbors(i)
            if nbrs:
                first = chart.boundary(hs[nbrs[0]].end).as_array()
                chart = Isometry.translation(-first) @ chart
            if len(nbrs) >= 2:
                second = chart.boundary(hs[nbrs[1]].end).as_array()
                chart = _rotation_to_x(second) @ chart
            if len(nbrs) >= 3:
                third = chart.boundary(hs[nbrs[2]].end).as_array()
                if third[1] < 0:
                    chart = Isometry.rotation(np.diag([1.0, -1.0])) @ chart
            self.charts.append(chart)
            self.neighbor_ends.append({j: chart.boundary(hs[j].end).as_array() for j in nbrs})

    def pair_chart(self, i: int, j: int) -> Isometry:
        """Chart with horosphere i the plane z=1 and the end of neighbor j at 0."""
        return Isometry.translation(-self.neighbor_ends[i][j]) @ self.charts[i]

    def mirror_chart(self, i: int, j: int) -> Isometry:
        """The j-side chart of the (i, j) pair: unit inversion about the seam center."""
        return Isometry.inversion() @ self.pair_chart(i, j)

    def seam_transform(self, i: int, j: int) -> SeamTransform:
        """Mode transform from the (i,j) mirror chart to horosphere j's own pair chart."""
        trans = self.pair_chart(j, i) @ self.mirror_chart(i, j).inverse()
        return seam_transform_from_isometry(trans)

    def min_neighbor_separation(self) -> float:
        out = np.inf
        for ends in self.neighbor_ends:
            pts = list(ends.values())
            for a in range(len(pts)):
                for b in range(a + 1, len(pts)):
                    out = min(out, float(np.linalg.norm(pts[a] - pts[b])))
        return out

    def default_rho(self) -> float:
        sep = self.min_neighbor_separation()
        return 0.25 * min(sep, 1.0) if np.isfinite(sep) else 0.25
