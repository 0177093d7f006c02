"""Mean curvature evaluation for graphs, parametric patches, and necks.

All hyperbolic mean curvatures go through the relation
H_hyp = z H_eucl + N^z_eucl.  Vertical graphs use the divergence-form graph
formula; the equivalent polynomial form splits into three parts
(quasilinear, gradient, quartic) whose sum is 2 (1+|grad u|^2)^{3/2} (H(u)-1),
the identity the horosphere solver iterates on.  Parametric patches (necks)
are evaluated through their fundamental forms with spectral theta derivatives
and fourth-order axial differences.
"""
from __future__ import annotations

import numpy as np

from . import catenoid
from .h3geom import geodesic_flow
from .specsolve import ModeField, cylinder_operator, fd_d1, fd_d2, plateau


class CurvatureError(ValueError):
    pass


def hyp_from_eucl(h_eucl, z, nz_eucl):
    """H_hyp = z H_eucl + N^z_eucl (upper half-space model)."""
    z = np.asarray(z)
    if np.any(z <= 0):
        raise CurvatureError("height must be positive")
    return z * np.asarray(h_eucl) + np.asarray(nz_eucl)


# ---------------------------------------------------------------------------
# vertical graphs on polar grids


def spectral_dtheta(vals: np.ndarray, order: int = 1) -> np.ndarray:
    """d/dtheta along axis 0 of values sampled on the uniform circle grid."""
    n = vals.shape[0]
    fh = np.fft.rfft(vals, axis=0)
    m = np.arange(fh.shape[0]).reshape((-1,) + (1,) * (vals.ndim - 1))
    if n % 2 == 0 and order % 2 == 1:
        fh[-1] = 0.0  # drop the unpaired Nyquist mode for odd derivatives
    return np.fft.irfft(fh * (1j * m) ** order, n=n, axis=0)


def periodic_fd_dtheta(vals: np.ndarray, order: int = 1) -> np.ndarray:
    """Local fourth-order periodic theta derivative along axis 0.

    Used where grid rows pass through regions holding smooth placeholder
    values (multi-center solves): unlike the spectral derivative, pollution
    stays within two stencil widths of such regions.
    """
    n = vals.shape[0]
    h = 2 * np.pi / n
    r = np.roll
    if order == 1:
        return (r(vals, 2, axis=0) - 8 * r(vals, 1, axis=0) + 8 * r(vals, -1, axis=0) - r(vals, -2, axis=0)) / (12 * h)
    if order == 2:
        return (
            -r(vals, 2, axis=0) + 16 * r(vals, 1, axis=0) - 30 * vals + 16 * r(vals, -1, axis=0) - r(vals, -2, axis=0)
        ) / (12 * h * h)
    raise ValueError("order must be 1 or 2")


def _polar_derivatives(vals: np.ndarray, r: np.ndarray, theta_mode: str = "spectral"):
    """u, u_r, u_theta, u_rr, u_rtheta, u_thetatheta on a (theta, log-r) grid."""
    t = np.log(r)
    h = t[1] - t[0]
    dth = spectral_dtheta if theta_mode == "spectral" else periodic_fd_dtheta
    ut = fd_d1(vals, h, axis=1)
    utt = fd_d2(vals, h, axis=1)
    ur = ut / r
    urr = (utt - ut) / (r * r)
    uth = dth(vals)
    urth = fd_d1(uth, h, axis=1) / r
    uthth = dth(vals, order=2)
    return vals, ur, uth, urr, urth, uthth


def graph_mean_curvature_values(vals: np.ndarray, r: np.ndarray) -> np.ndarray:
    """H of the graph z = u(x) from samples on a polar (theta, log-r) grid."""
    if np.any(vals <= 0):
        raise CurvatureError("graph height must be positive")
    u, ur, uth, urr, urth, uthth = _polar_derivatives(vals, r)
    g2 = ur * ur + (uth / r) ** 2
    w = np.sqrt(1.0 + g2)
    fr = ur / w
    fth = uth / (r * w)
    t = np.log(r)
    h = t[1] - t[0]
    div = fd_d1(r * fr, h, axis=1) / (r * r) + spectral_dtheta(fth) / r
    return 1.0 / w + 0.5 * u * div


def graph_mean_curvature(u: ModeField, n_theta: int | None = None) -> ModeField:
    """Graph mean curvature of a planar ModeField interpreted as height u > 0."""
    n_theta = n_theta or max(16, 4 * (u.m_max + 1))
    vals = u.values(n_theta)
    hvals = graph_mean_curvature_values(vals, u.grid)
    return ModeField.from_values(hvals, u.grid, u.m_max, "planar", u.center)


def graph_equation_parts(vals: np.ndarray, r: np.ndarray, theta_mode: str = "spectral"):
    """The three parts of the polynomial graph equation, as value arrays.

    quasilinear: u lap u - |grad u|^2; gradient: 2(1 + (3/2)|grad u|^2 -
    (1+|grad u|^2)^{3/2}); quartic: u lap u |grad u|^2 - (u/2) grad u . grad
    |grad u|^2.  Their sum vanishes exactly where H(u) = 1.
    """
    dth = spectral_dtheta if theta_mode == "spectral" else periodic_fd_dtheta
    u, ur, uth, urr, urth, uthth = _polar_derivatives(vals, r, theta_mode)
    lap = urr + ur / r + uthth / (r * r)
    g2 = ur * ur + (uth / r) ** 2
    quasilinear = u * lap - g2
    gradient = 2.0 * (1.0 + 1.5 * g2 - (1.0 + g2) ** 1.5)
    t = np.log(r)
    h = t[1] - t[0]
    g2r = fd_d1(g2, h, axis=1) / r
    g2th = dth(g2)
    quartic = u * lap * g2 - 0.5 * u * (ur * g2r + uth * g2th / (r * r))
    return quasilinear, gradient, quartic


def quasilinear_part(u: ModeField, n_theta: int | None = None) -> ModeField:
    n_theta = n_theta or max(16, 4 * (u.m_max + 1))
    k, _, _ = graph_equation_parts(u.values(n_theta), u.grid)
    return ModeField.from_values(k, u.grid, u.m_max, "planar", u.center)


def gradient_part(u: ModeField, n_theta: int | None = None) -> ModeField:
    n_theta = n_theta or max(16, 4 * (u.m_max + 1))
    _, q1, _ = graph_equation_parts(u.values(n_theta), u.grid)
    return ModeField.from_values(q1, u.grid, u.m_max, "planar", u.center)


def quartic_part(u: ModeField, n_theta: int | None = None) -> ModeField:
    n_theta = n_theta or max(16, 4 * (u.m_max + 1))
    _, _, q2 = graph_equation_parts(u.values(n_theta), u.grid)
    return ModeField.from_values(q2, u.grid, u.m_max, "planar", u.center)


# ---------------------------------------------------------------------------
# assembled horosphere graphs


def chi_cutoff(r: np.ndarray, r1: float) -> np.ndarray:
    """Radial cutoff: 0 inside 2 r1, 1 outside 4 r1, quintic ramp in log r."""
    return plateau((np.log(r) - np.log(2.0 * r1)) / (np.log(4.0 * r1) - np.log(2.0 * r1)))


def assemble_graph_values(pvals: np.ndarray, r_about_origin: np.ndarray, a_total: float, base: float, r1: float) -> np.ndarray:
    """U = (1 - chi + chi r^a)(base + P - a chi log r): perturbation field to graph height.

    ``pvals`` are the samples of the total perturbation P (harmonic extension
    plus correction, both carrying their log branches); the log content is
    redistributed into the far-field power r^a so the result is base + P near
    the circles and r^a (base + decaying) at infinity.
    """
    chi = chi_cutoff(r_about_origin, r1)
    factor = 1.0 + chi * (r_about_origin ** a_total - 1.0)
    return factor * (base + pvals - a_total * chi * np.log(r_about_origin))


def horosphere_residual(
    w: ModeField,
    a_w: float,
    phi: np.ndarray,
    rho: float,
    base: float = 1.0,
    n_theta: int | None = None,
    class_bound: float | None = None,
):
    """Assembled single-circle graph residual (1+r^2)^{-a}(sum of equation parts).

    ``w`` is the correction field on the exterior of B_rho(0) (its m = 0 row
    carries a_w log r), ``phi`` the circle Dirichlet modes.  Vanishes exactly
    when the assembled graph has H = 1; the w-linearization at zero data is the
    Laplacian (times base).  Returns (residual ModeField, U values, a_total).
    """
    from .specsolve import multi_disk_harmonic_extension

    n_theta = n_theta or max(16, 4 * (w.m_max + 1))
    ext = multi_disk_harmonic_extension([(np.zeros(2), rho)], [np.asarray(phi, dtype=complex)])
    a_total = a_w + ext.log_coefficient
    if class_bound is not None and not (a_total < class_bound):
        raise CurvatureError(f"log coefficient {a_total:.3e} outside the admissible class (< {class_bound:.3e})")
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    pts = np.stack([np.outer(np.cos(th), w.grid), np.outer(np.sin(th), w.grid)], axis=-1)
    pvals = ext.value(pts) + w.values(n_theta)
    uvals = assemble_graph_values(pvals, w.grid[None, :], a_total, base, rho)
    k, q1, q2 = graph_equation_parts(uvals, w.grid)
    resid = (1.0 + w.grid[None, :] ** 2) ** (-a_total) * (k + q1 + q2)
    return ModeField.from_values(resid, w.grid, w.m_max, "planar", w.center), uvals, a_total


# ---------------------------------------------------------------------------
# parametric patches


def parametric_fundamental_forms(X: np.ndarray, ds: float):
    """First and second fundamental forms of X(theta, s) -> R^3.

    X has shape (n_theta, n_s, 3); axis 0 is the (uniform, periodic) angle,
    axis 1 the axial parameter with spacing ``ds``.  Returns E, F, G, e, f, g
    and the unit normal chosen as normalize(X_s x X_theta) (inward for the
    standard neck orientation).
    """
    Xs = fd_d1(X, ds, axis=1)
    Xth = spectral_dtheta(X)
    Xss = fd_d2(X, ds, axis=1)
    Xsth = fd_d1(Xth, ds, axis=1)
    Xthth = spectral_dtheta(X, order=2)
    E = np.sum(Xs * Xs, axis=-1)
    F = np.sum(Xs * Xth, axis=-1)
    G = np.sum(Xth * Xth, axis=-1)
    N = np.cross(Xs, Xth)
    nn = np.linalg.norm(N, axis=-1, keepdims=True)
    if np.any(nn <= 0):
        raise CurvatureError("degenerate parametric patch (vanishing normal)")
    N = N / nn
    e = np.sum(N * Xss, axis=-1)
    f = np.sum(N * Xsth, axis=-1)
    g = np.sum(N * Xthth, axis=-1)
    det = E * G - F * F
    if np.any(det <= 0):
        raise CurvatureError("degenerate metric: E G - F^2 <= 0")
    return E, F, G, e, f, g, N


def parametric_mean_curvature(X: np.ndarray, ds: float):
    """(H_hyp, H_eucl, N) of a parametric patch via the fundamental forms."""
    E, F, G, e, f, g, N = parametric_fundamental_forms(X, ds)
    h_eucl = (e * G - 2.0 * f * F + g * E) / (2.0 * (E * G - F * F))
    h_hyp = hyp_from_eucl(h_eucl, X[..., 2], N[..., 2])
    return h_hyp, h_eucl, N


# ---------------------------------------------------------------------------
# necks (default chart: pure symmetrized catenoid with its transverse field)


def neck_graph_points(neck, trunc, w: ModeField, n_theta: int | None = None) -> np.ndarray:
    """Embedding of the transverse graph Z_w over the symmetrized neck."""
    n_theta = n_theta or max(16, 4 * (w.m_max + 1))
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    S, TH = np.meshgrid(w.grid, th)  # (n_theta, n_s)
    base = neck.point(S, TH)
    field = catenoid.transverse_field(neck, trunc, S, TH)
    return geodesic_flow(base, field, w.values(n_theta))


def neck_fundamental_forms(neck, trunc, w: ModeField, n_theta: int | None = None):
    """E, F, G, e, f, g of Z_w; at w = 0 these are the exact catenoid values."""
    Z = neck_graph_points(neck, trunc, w, n_theta)
    ds = w.grid[1] - w.grid[0]
    return parametric_fundamental_forms(Z, ds)[:6]


def neck_mean_curvature(neck, trunc, w: ModeField, n_theta: int | None = None) -> np.ndarray:
    """H_hyp - 1 of the transverse graph Z_w, as values on the (theta, s) grid."""
    Z = neck_graph_points(neck, trunc, w, n_theta)
    ds = w.grid[1] - w.grid[0]
    h_hyp, _, _ = parametric_mean_curvature(Z, ds)
    return h_hyp - 1.0


def cylinder_L_apply(w: ModeField) -> ModeField:
    """The cylinder Jacobi operator d^2/ds^2 + d^2/dtheta^2 + 2 sech^2 s."""
    return cylinder_operator(w)
