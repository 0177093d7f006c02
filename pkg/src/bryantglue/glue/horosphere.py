"""Nonlinear solve for one horosphere piece: a CMC-1 graph over the exterior
of the seam disks in the horosphere's own chart.

The correction is one mode field per seam center (plus a whole-plane field
when there are several centers) and one harmonic extension that removes the
circle traces; every Newton step inverts the Laplacian compositionally with
finite-difference mode solves built from the same stencils as the residual
evaluator, so the solved rows of the discrete residual vanish identically.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from ..meancurv import assemble_graph_values, graph_equation_parts
from ..specsolve import (
    _D1_EDGE,
    _D2_EDGE,
    HarmonicExtension,
    ModeField,
    fd_d1,
    log_radial_grid,
    mode_vector_from_samples,
    multi_disk_harmonic_extension,
    plateau,
)


class PieceError(RuntimeError):
    pass


def _bump(dist: np.ndarray, sigma: float) -> np.ndarray:
    """1 inside sigma, 0 outside 2 sigma, quintic ramp."""
    return 1.0 - plateau(dist / sigma - 1.0)


def _soften_points(pts: np.ndarray, centers, exclude: int | None, rho: float) -> np.ndarray:
    """Push points smoothly out of the listed disks (except the excluded one).

    Radial C-infinity-grade ramp about each foreign center: identity for
    d >= 1.3 rho, flattening to d = 1.1 rho inside, so that part fields and
    harmonic extensions evaluated at the result are smooth along every grid
    row.  Softened values are wrong inside the 1.3 rho zones, which the
    residual ownership masks exclude.
    """
    out = np.array(pts, dtype=float, copy=True)
    for k, c in enumerate(centers):
        if exclude is not None and k == exclude:
            continue
        rel = out - c
        d = np.hypot(rel[..., 0], rel[..., 1])
        lam = plateau((d - 1.1 * rho) / (0.2 * rho))
        d_new = 1.1 * rho + lam * np.maximum(d - 1.1 * rho, 0.0)
        scale = np.where(d > 1e-12, d_new / np.maximum(d, 1e-12), 0.0)
        out[...] = c + rel * scale[..., None]
        if np.any(d <= 1e-12):
            out[d <= 1e-12] = c + np.array([1.1 * rho, 0.0])
    return out


def _merge_extensions(a: HarmonicExtension | None, b: HarmonicExtension) -> HarmonicExtension:
    if a is None:
        return b
    mult = [ca + cb for ca, cb in zip(a.multipoles, b.multipoles)]
    return HarmonicExtension(a.centers, a.radii, a.log_coefs + b.log_coefs, mult)


def _fd_mode_solve(g_row: np.ndarray, t: np.ndarray, m: int, inner: str) -> tuple[np.ndarray, float]:
    """Solve u_tt - m^2 u = g with the same stencils as the residual evaluator.

    ``inner``: 'dirichlet' (u = 0 at t[0], exterior solves) or 'regular'
    (origin-regular Robin, whole-plane solves).  The outer closure is the
    decaying Robin for m != 0 and the pure-log Robin t u' = u for m = 0 (which
    pins the constant branch to zero); its slope is the log coefficient.
    Interior rows match fd_d2 exactly, so the discrete residual of the solution
    vanishes away from the two boundary rows.
    """
    n = len(t)
    h = t[1] - t[0]
    band = np.zeros((11, n), dtype=complex)

    def put(i, cols, vals):
        band[5 + i - cols, cols] = vals

    rhs = np.asarray(g_row, dtype=complex).copy()
    if inner == "dirichlet":
        put(0, np.arange(1), np.array([1.0]))
    else:
        vals = _D1_EDGE[0].copy() / h
        if m > 0:
            vals[0] -= m  # u' - m u = 0 selects the regular branch r^m
        put(0, np.arange(5), vals)
    rhs[0] = 0.0
    v = (_D2_EDGE[1] / (h * h)).copy()
    v[1] -= m * m
    put(1, np.arange(6), v)
    stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12 * h * h)
    for i in range(2, n - 2):
        v = stencil.copy()
        v[2] -= m * m
        put(i, np.arange(i - 2, i + 3), v)
    v = (_D2_EDGE[1] / (h * h))[::-1].copy()
    v[-2] -= m * m
    put(n - 2, np.arange(n - 6, n), v)
    v = (-(_D1_EDGE[0][::-1]) / h).copy()
    if m > 0:
        v[-1] += m  # decaying closure u' + m u = 0
    else:
        v[-1] -= 1.0 / t[-1]  # pure-log closure t u' = u (kills the constant)
    put(n - 1, np.arange(n - 5, n), v)
    rhs[-1] = 0.0
    u = solve_banded((5, 5), band, rhs)
    a = float(np.real(u[-1]) / t[-1]) if m == 0 else 0.0
    return u, a


@dataclass
class _Grid:
    center: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    pts: np.ndarray  # (n_theta, n_r, 2)
    r_origin: np.ndarray
    valid: np.ndarray  # rows owned by this grid (equation enforced, smooth data)
    source_mask: np.ndarray  # partition weight for this grid's solves
    soft_pts: np.ndarray  # evaluation points, softened away from foreign disks


class HorospherePiece:
    """State and solver for one horosphere's graph; reusable across outer iterations."""

    def __init__(self, centers, rho, base, m_max=16, n_r=540, r_out_factor=1e4, n_theta=96, tol=1e-10):
        self.centers = [np.asarray(c, dtype=float) for c in centers]
        self.rho = float(rho)
        self.base = float(base)
        self.m_max = m_max
        self.n_theta = n_theta
        self.tol = tol
        self.r_out = r_out_factor * rho
        self.r1 = max(np.linalg.norm(c) for c in self.centers) + rho  # chi cutoff scale
        n = len(self.centers)
        if n >= 2:
            self.sep = min(
                np.linalg.norm(self.centers[a] - self.centers[b])
                for a in range(n)
                for b in range(a + 1, n)
            )
            # masks flat to sigma, zero beyond 2 sigma; their support stays
            # clear of the foreign softening zones (see _soften_points)
            self.sigma = 0.3 * self.sep
            if self.sigma < 1.15 * rho:
                raise PieceError("seam disks too close for the partition solver")
            self.theta_mode = "fd"
            self.n_theta_grid = max(n_theta, 384)
        else:
            self.sep = np.inf
            self.sigma = np.inf
            self.theta_mode = "spectral"
            self.n_theta_grid = n_theta
        self.grids: list[_Grid] = []
        th = 2 * np.pi * np.arange(self.n_theta_grid) / self.n_theta_grid
        for k, c in enumerate(self.centers):
            r = log_radial_grid(rho, self.r_out, n_r)
            self.grids.append(self._make_grid(c, r, th, own=k))
        self.far_grid: _Grid | None = None
        self.m_far = 0
        if n >= 2:
            r = log_radial_grid(rho / 8.0, self.r_out, n_r + 120)
            thf = 2 * np.pi * np.arange(self.n_theta_grid) / self.n_theta_grid
            self.far_grid = self._make_grid(np.zeros(2), r, thf, own=None)
            self.m_far = 40
        # solution state: one accumulated field per center grid, one whole-plane
        # field, and one accumulated trace-removal extension (subtracted)
        self.ext_phi: HarmonicExtension | None = None
        self.a_phi = 0.0
        self.center_fields: list[ModeField | None] = [None] * n
        self.far_field: ModeField | None = None
        self.corr: HarmonicExtension | None = None
        self.a_w = 0.0
        self._cache: dict[int, np.ndarray] = {}
        self.residual_sup = np.inf
        self.iterations = 0

    # -- geometry helpers
    def _make_grid(self, center, r, theta, own: int | None) -> _Grid:
        center = np.asarray(center, dtype=float)
        pts = np.empty((len(theta), len(r), 2))
        pts[..., 0] = center[0] + np.cos(theta)[:, None] * r[None, :]
        pts[..., 1] = center[1] + np.sin(theta)[:, None] * r[None, :]
        r_origin = np.hypot(pts[..., 0], pts[..., 1])
        valid = np.ones(pts.shape[:2], dtype=bool)
        for k, c in enumerate(self.centers):
            d = np.hypot(pts[..., 0] - c[0], pts[..., 1] - c[1])
            if own is not None and k == own:
                valid &= d >= self.rho * (1 - 1e-12)
            else:
                # foreign disks: clear the softening zones plus stencil reach
                valid &= d >= 0.385 * self.sep
        # the first/last radial rows carry boundary closures, not the equation
        valid[:, :1] = False
        valid[:, -1:] = False
        if own is not None:
            if np.isinf(self.sigma):
                mask = np.ones(pts.shape[:2])
            else:
                mask = _bump(np.broadcast_to(r[None, :], pts.shape[:2]).copy(), self.sigma)
        else:
            mask = np.ones(pts.shape[:2])
            for c in self.centers:
                mask -= _bump(np.hypot(pts[..., 0] - c[0], pts[..., 1] - c[1]), self.sigma)
            mask = np.clip(mask, 0.0, 1.0)
        soft = _soften_points(pts, self.centers, own, self.rho) if len(self.centers) > 1 else pts
        return _Grid(center, r, theta, pts, r_origin, valid, mask, soft)

    # -- field evaluation
    def _iter_fields(self):
        for k, f in enumerate(self.center_fields):
            if f is not None:
                yield k, f
        if self.far_field is not None:
            yield -1, self.far_field

    def _perturbation_on_grid(self, gi: int) -> np.ndarray:
        grid = self.grids[gi] if gi >= 0 else self.far_grid
        if gi not in self._cache:
            total = self.ext_phi.value(grid.soft_pts)
            if self.corr is not None:
                total = total - self.corr.value(grid.soft_pts)
            for k, f in self._iter_fields():
                total = total + (f.values(len(grid.theta)) if k == gi else f.eval_at(grid.soft_pts, clamp=True))
            self._cache[gi] = total
        return self._cache[gi]

    def perturbation_at(self, pts: np.ndarray) -> np.ndarray:
        total = self.ext_phi.value(pts)
        if self.corr is not None:
            total = total - self.corr.value(pts)
        for _, f in self._iter_fields():
            total = total + f.eval_at(pts)
        return total

    def gradient_at(self, pts: np.ndarray) -> np.ndarray:
        total = self.ext_phi.gradient(pts)
        if self.corr is not None:
            total = total - self.corr.gradient(pts)
        for _, f in self._iter_fields():
            total = total + f.eval_gradient_at(pts)
        return total

    @property
    def a_total(self) -> float:
        return self.a_phi + self.a_w

    def height_at(self, pts: np.ndarray) -> np.ndarray:
        r_origin = np.hypot(pts[..., 0], pts[..., 1])
        return assemble_graph_values(self.perturbation_at(pts), r_origin, self.a_total, self.base, self.r1)

    # -- residual
    def _residual_on(self, gi: int) -> np.ndarray:
        grid = self.grids[gi] if gi >= 0 else self.far_grid
        pvals = self._perturbation_on_grid(gi)
        uvals = assemble_graph_values(pvals, grid.r_origin, self.a_total, self.base, self.r1)
        k, q1, q2 = graph_equation_parts(uvals, grid.r, theta_mode=self.theta_mode)
        return (1.0 + grid.r_origin ** 2) ** (-self.a_total) * (k + q1 + q2)

    # -- the solve
    def solve(self, phi_modes: list[np.ndarray], max_iter: int = 18, class_bound: float | None = None):
        """Newton iteration on the assembled graph residual with Dirichlet data
        ``phi_modes`` (one complex mode vector per seam circle)."""
        self.ext_phi = multi_disk_harmonic_extension(
            [(c, self.rho) for c in self.centers], [np.asarray(p, complex) for p in phi_modes]
        )
        self.a_phi = self.ext_phi.log_coefficient
        if class_bound is not None and not (self.a_total < class_bound):
            raise PieceError(f"log coefficient {self.a_total:.3e} outside the admissible class")
        self._cache.clear()
        history = []
        for it in range(max_iter):
            residuals = [self._residual_on(gi) for gi in range(len(self.grids))]
            sup = max(float(np.max(np.abs(res[g.valid]))) for res, g in zip(residuals, self.grids))
            history.append(sup)
            if sup < self.tol:
                self.residual_sup = sup
                self.iterations = it
                return history
            if it > 3 and sup > 0.7 * history[-2]:
                raise PieceError(f"horosphere Newton stagnated; residual history {history}")
            new_fields = []
            a_new = 0.0
            for gi, res in enumerate(residuals):
                grid = self.grids[gi]
                src = -(res * grid.source_mask) / self.base
                f = ModeField.from_values(src, grid.r, self.m_max, "planar", grid.center)
                t = np.log(grid.r)
                coef = np.zeros_like(f.coef)
                for m in range(self.m_max + 1):
                    coef[m], am = _fd_mode_solve(f.coef[m] * grid.r ** 2, t, m, "dirichlet")
                    a_new += am
                new_fields.append((gi, ModeField(coef, grid.r, "planar", grid.center)))
            if self.far_grid is not None:
                grid = self.far_grid
                res_far = self._residual_on(-1)
                src = -(res_far * grid.source_mask) / self.base
                src[~grid.valid] = 0.0
                f = ModeField.from_values(src, grid.r, self.m_far, "planar", grid.center)
                t = np.log(grid.r)
                coef = np.zeros_like(f.coef)
                for m in range(self.m_far + 1):
                    coef[m], am = _fd_mode_solve(f.coef[m] * grid.r ** 2, t, m, "regular")
                    a_new += am
                new_fields.append((-1, ModeField(coef, grid.r, "planar", grid.center)))
            # remove the circle traces of the update
            th = 2 * np.pi * np.arange(self.n_theta) / self.n_theta
            trace_modes = []
            for c in self.centers:
                pts = np.stack([c[0] + self.rho * np.cos(th), c[1] + self.rho * np.sin(th)], axis=-1)
                vals = np.zeros(self.n_theta)
                for _, f in new_fields:
                    vals = vals + f.eval_at(pts)
                trace_modes.append(mode_vector_from_samples(vals, self.m_max))
            corr_new = multi_disk_harmonic_extension([(c, self.rho) for c in self.centers], trace_modes)
            a_new -= corr_new.log_coefficient
            # merge into the slots
            for gi, f in new_fields:
                if gi >= 0:
                    cur = self.center_fields[gi]
                    self.center_fields[gi] = f if cur is None else cur + f
                else:
                    self.far_field = f if self.far_field is None else self.far_field + f
            self.corr = _merge_extensions(self.corr, corr_new)
            self.a_w += a_new
            self._cache.clear()
        raise PieceError(f"horosphere Newton did not converge; residual history {history}")

    def reset(self):
        self.center_fields = [None] * len(self.centers)
        self.far_field = None
        self.corr = None
        self.a_w = 0.0
        self._cache.clear()

    # -- seam extraction
    def circle_data(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Dirichlet and Neumann (rho d/dr) modes of the graph at seam circle k."""
        c = self.centers[k]
        th = 2 * np.pi * np.arange(self.n_theta) / self.n_theta
        e_r = np.stack([np.cos(th), np.sin(th)], axis=-1)
        pts = c[None, :] + self.rho * e_r
        dvals = self.base + self.perturbation_at(pts)
        grad = self.ext_phi.gradient(pts)
        if self.corr is not None:
            grad = grad - self.corr.gradient(pts)
        for gi, f in self._iter_fields():
            if gi == k:
                grad = grad + self._own_circle_gradient(f, th)
            else:
                grad = grad + f.eval_gradient_at(pts)
        nvals = self.rho * np.sum(grad * e_r, axis=-1)
        return (
            mode_vector_from_samples(dvals, self.m_max),
            mode_vector_from_samples(nvals, self.m_max),
        )

    def _own_circle_gradient(self, field: ModeField, th: np.ndarray) -> np.ndarray:
        # one-sided fourth-order radial stencil at the field's own inner circle
        t = np.log(field.grid)
        h = t[1] - t[0]
        dmodes = fd_d1(field.coef, h, axis=1)[:, 0] / field.grid[0]
        vmodes = field.coef[:, 0]
        m = np.arange(field.m_max + 1)[:, None]
        ph = np.exp(1j * m * th[None, :])
        fr = np.real(dmodes[0]) + 2.0 * np.sum(np.real(dmodes[1:, None] * ph[1:]), axis=0)
        ft = 2.0 * np.sum(np.real(1j * m[1:] * vmodes[1:, None] * ph[1:]), axis=0) / field.grid[0]
        ct, st = np.cos(th), np.sin(th)
        return np.stack([fr * ct - ft * st, fr * st + ft * ct], axis=-1)
