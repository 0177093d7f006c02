import numpy as np
import pytest

from bryantglue.catenoid import SymmetrizedNeck, solve_end_profile, truncation
from bryantglue.meancurv import (
    CurvatureError,
    cylinder_L_apply,
    graph_equation_parts,
    graph_mean_curvature,
    graph_mean_curvature_values,
    horosphere_residual,
    hyp_from_eucl,
    neck_fundamental_forms,
    neck_graph_points,
    neck_mean_curvature,
    parametric_mean_curvature,
)
from bryantglue.specsolve import ModeField, cylinder_grid, log_radial_grid


# --- the hyperbolic/Euclidean relation ---------------------------------------


def test_hyp_from_eucl_plane():
    assert hyp_from_eucl(0.0, 2.7, 1.0) == 2.7 * 0.0 + 1.0 == 1.0


def test_hyp_from_eucl_hemispheres():
    # horosphere of radius R/2 tangent at the origin, i.e. the sphere z = R -+ sqrt(R^2-r^2):
    # lower half H_eucl = +1/R with upward-normal z-component sqrt(R^2-r^2)/R -> H_hyp = 1,
    # upper half H_eucl = -1/R with the same z-component -> H_hyp = -1
    R = 3.0
    for r in (0.3, 1.0, 2.0):
        root = np.sqrt(R * R - r * r)
        assert abs(hyp_from_eucl(1.0 / R, R - root, root / R) - 1.0) < 1e-14
        assert abs(hyp_from_eucl(-1.0 / R, R + root, root / R) + 1.0) < 1e-14


def test_hyp_from_eucl_rejects_nonpositive_height():
    with pytest.raises(CurvatureError):
        hyp_from_eucl(0.0, -1.0, 1.0)


# --- graph mean curvature -------------------------------------------------------


def test_graph_constant_exactly_one():
    grid = log_radial_grid(0.25, 100.0, 120)
    u = ModeField.zeros(4, grid)
    u.coef[0] = 2.31
    h = graph_mean_curvature(u)
    assert np.max(np.abs(h.coef[0] - 1.0)) < 1e-12
    assert np.max(np.abs(h.coef[1:])) < 1e-15


def test_graph_rejects_nonpositive():
    grid = log_radial_grid(0.25, 10.0, 60)
    u = ModeField.zeros(0, grid)
    u.coef[0] = -1.0
    with pytest.raises(CurvatureError):
        graph_mean_curvature(u)


def test_graph_end_profile_is_cmc():
    prof = solve_end_profile(1.5)
    vals = np.broadcast_to(prof.u(), (8, len(prof.grid))).copy()
    h = graph_mean_curvature_values(vals, prof.grid)
    assert np.max(np.abs(h[:, 3:-3] - 1.0)) < 1e-9


def test_graph_linearization_quadratic_residual():
    # u = 1 + amp r^{-1} cos(theta) is harmonic, so H - 1 = O(amp^2)
    grid = log_radial_grid(1.0, 100.0, 400)
    errs = []
    for amp in (0.01, 0.005):
        u = ModeField.zeros(2, grid)
        u.coef[0] = 1.0
        u.coef[1] = 0.5 * amp / grid
        h = graph_mean_curvature(u, n_theta=32)
        errs.append(np.max(np.abs(h.values(32)[:, 3:-3] - 1.0)))
    assert errs[0] < 2e-4
    ratio = errs[0] / errs[1]
    assert 3.0 < ratio < 5.0  # quadratic in the amplitude


# --- the three equation parts ------------------------------------------------


def _values(fn, grid, n_theta=32):
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    return fn(th[:, None], grid[None, :])


def test_parts_vanish_on_constants():
    grid = log_radial_grid(0.5, 20.0, 100)
    vals = np.full((16, len(grid)), 3.7)
    k, q1, q2 = graph_equation_parts(vals, grid)
    assert np.max(np.abs(k)) == 0.0
    assert np.max(np.abs(q1)) == 0.0
    assert np.max(np.abs(q2)) == 0.0


def test_quasilinear_annihilates_powers():
    # hand calculus: r^t lap r^t = t^2 r^{2t-2} = |grad r^t|^2, so K(r^t) = 0;
    # the grid is chosen near the truncation/roundoff optimum of the stencils
    grid = log_radial_grid(1.0, 2.0, 140)
    for t in (0.7, -0.5, 1.3):
        vals = np.broadcast_to(grid ** t, (8, len(grid))).copy()
        k, _, _ = graph_equation_parts(vals, grid)
        scale = max(1.0, float(np.max(grid ** (2 * t))))
        assert np.max(np.abs(k[:, 3:-3])) < 1e-10 * scale


def test_quasilinear_homogeneity():
    # K(r^t u) = r^{2t} K(u) on random band-limited smooth fields
    rng = np.random.default_rng(21)
    grid = log_radial_grid(1.0, 2.0, 140)
    n_theta = 32
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    for _ in range(5):
        a1, a2, a3 = 0.05 * rng.normal(size=3)
        u = 1.0 + a1 * np.cos(th)[:, None] * np.sin(np.log(grid))[None, :] + a2 * np.sin(2 * th)[:, None] * (
            np.log(grid) ** 2
        )[None, :] + a3 * np.log(grid)[None, :]
        t = 0.7
        k_u, _, _ = graph_equation_parts(u, grid)
        k_scaled, _, _ = graph_equation_parts(grid[None, :] ** t * u, grid)
        diff = k_scaled[:, 3:-3] - (grid[None, :] ** (2 * t) * k_u)[:, 3:-3]
        assert np.max(np.abs(diff)) < 1e-10


def test_parts_sum_equals_graph_residual():
    # identity: K + Q1 + Q2 = 2 (1+|grad u|^2)^{3/2} (H(u) - 1); two independent
    # evaluation routes (divergence form vs polynomial form) on 20 random small
    # perturbations of the unit horosphere graph
    from bryantglue.meancurv import _polar_derivatives

    rng = np.random.default_rng(22)
    grid = log_radial_grid(0.5, 50.0, 1000)
    n_theta = 64
    norms_lhs, norms_rhs = [], []
    for trial in range(20):
        u = ModeField.zeros(2, grid)
        u.coef[0] = 1.0
        for m in range(3):
            amp = 0.01 * (rng.normal() + 1j * rng.normal())
            if m == 0:
                amp = 0.01 * rng.normal()
            u.coef[m] += amp * (0.5 / grid) ** max(m, 1)
        vals = u.values(n_theta)
        k, q1, q2 = graph_equation_parts(vals, grid)
        h = graph_mean_curvature_values(vals, grid)
        _, ur, uth, *_ = _polar_derivatives(vals, grid)
        w3 = (1.0 + ur ** 2 + (uth / grid) ** 2) ** 1.5
        lhs = (k + q1 + q2)[:, 3:-3]
        rhs = (2.0 * w3 * (h - 1.0))[:, 3:-3]
        assert np.max(np.abs(lhs - rhs)) < 1e-8
        norms_lhs.append(np.linalg.norm(lhs))
        norms_rhs.append(np.linalg.norm(rhs))
    corr = np.corrcoef(norms_lhs, norms_rhs)[0, 1]
    assert corr > 0.999999


# --- assembled horosphere residual ---------------------------------------------


def test_horosphere_residual_zero_data():
    grid = log_radial_grid(0.25, 1e3, 300)
    w = ModeField.zeros(4, grid)
    resid, uvals, a_tot = horosphere_residual(w, 0.0, np.zeros(5), rho=0.25, base=1.0)
    assert a_tot == 0.0
    assert np.max(np.abs(uvals - 1.0)) == 0.0
    assert np.max(np.abs(resid.coef)) < 1e-15


def test_horosphere_residual_linearization_is_laplacian():
    # the w-linearization of the assembled residual at zero data is the
    # Laplacian: (a) the discrete Laplacian annihilates r^{-1} cos(theta) to
    # 1e-8; (b) the finite-difference-in-w linearization agrees with it down to
    # the eps/(tau h^2) noise floor of differencing the nonlinear evaluator
    from bryantglue.meancurv import _polar_derivatives

    grid = log_radial_grid(0.25, 1e3, 1600)
    th = 2 * np.pi * np.arange(32) / 32
    delta = np.cos(th)[:, None] / grid[None, :]
    _, ur, uth, urr, _, uthth = _polar_derivatives(delta, grid)
    lap = urr + ur / grid[None, :] + uthth / grid[None, :] ** 2
    assert np.max(np.abs(lap[:, 3:-3])) < 1e-8

    tau = 1e-5
    out = []
    for sign in (+1.0, -1.0):
        w = ModeField.zeros(2, grid)
        w.coef[1] = sign * tau * 0.5 / grid  # r^{-1} cos(theta)
        resid, _, _ = horosphere_residual(w, 0.0, np.zeros(3), rho=0.25, base=1.0)
        out.append(resid)
    lin = (out[0] - out[1]) * (1.0 / (2.0 * tau))
    assert np.max(np.abs(lin.values(32)[:, 3:-3] - lap[:, 3:-3])) < 5e-5


def test_horosphere_residual_class_bound():
    grid = log_radial_grid(0.25, 1e3, 300)
    w = ModeField.zeros(1, grid)
    with pytest.raises(CurvatureError):
        horosphere_residual(w, 2.0, np.zeros(2), rho=0.25, class_bound=0.75)


# --- neck evaluation --------------------------------------------------------------


def _neck_setup(eps=0.01, rho=0.2, n_half=700, m_max=4):
    neck = SymmetrizedNeck(eps)
    trunc = truncation(eps, rho)
    s = cylinder_grid(trunc.s_outer, n_half)
    w = ModeField.zeros(m_max, s, kind="cylinder")
    return neck, trunc, w


def test_neck_forms_at_zero():
    eps = 0.01
    neck, trunc, w = _neck_setup(eps=eps)
    E, F, G, e, f, g = neck_fundamental_forms(neck, trunc, w, n_theta=32)
    s = w.grid
    target = eps * eps * np.cosh(s) ** 2
    # exact catenoid values on the upper pure branch
    pure = (s > 1.05) & (s < trunc.s_inner - 1.0)
    relE = np.abs(E[:, pure] - target[None, pure]) / target[None, pure]
    relG = np.abs(G[:, pure] - target[None, pure]) / target[None, pure]
    assert np.max(relE) < 1e-7
    assert np.max(relG) < 1e-7
    assert np.max(np.abs(F[:, pure])) < 1e-12 * eps
    # the lower branch is the unit-inversion image: same values divided by the
    # conformal factor |X_upper - center|^4, with |X|^2 = eps^2 cosh^2 s + (1+eps|s|)^2
    low = (s < -1.05) & (s > -(trunc.s_inner - 1.0))
    dsq = eps * eps * np.cosh(s) ** 2 + (1.0 + eps * np.abs(s)) ** 2
    target_low = target / dsq ** 2
    relE_low = np.abs(E[:, low] - target_low[None, low]) / target_low[None, low]
    assert np.max(relE_low) < 1e-7
    assert np.max(np.abs(F[:, low])) < 1e-12 * eps


def test_neck_form_derivative_matches_linear_term():
    # |dE/dw| = 2 eps^2 cosh s |w-tilde| at leading order (the linear term of
    # the fundamental-form expansion); with the inward transverse field the
    # sign is + for E and - for G, and the hyperbolic flow contributes a
    # (1 + eps s) factor that vanishes in the small-scale limit
    eps, rho = 3e-4, 0.2
    neck = SymmetrizedNeck(eps)
    trunc = truncation(eps, rho)
    s = cylinder_grid(2.0, 500)  # stay inside the pure region
    k = np.argmin(np.abs(s - 1.5))
    tau = 1e-3 * eps
    vals = []
    for sign in (+1.0, -1.0):
        w = ModeField.zeros(0, s, kind="cylinder")
        w.coef[0] = sign * tau
        E, F, G, *_ = neck_fundamental_forms(neck, trunc, w, n_theta=16)
        vals.append((E[0, k], G[0, k]))
    dE = (vals[0][0] - vals[1][0]) / (2 * tau)
    dG = (vals[0][1] - vals[1][1]) / (2 * tau)
    # w-tilde = w/(eps cosh s): coefficient of w is 2 eps
    assert abs(dE - 2.0 * eps) < 1e-6
    assert abs(dG + 2.0 * eps) < 1e-6


def test_neck_mean_curvature_base_residual_formula():
    # at w = 0 the residual is tanh s - 1 on the pure branch; the seed forcing
    # formula eps^2 cosh^2 s (1 - tanh s)/(1 + eps s), rescaled back, must match
    # to 10 percent for eps <= 0.01
    eps, rho = 0.008, 0.2
    neck, trunc, w = _neck_setup(eps=eps, rho=rho, n_half=900, m_max=0)
    res = neck_mean_curvature(neck, trunc, w, n_theta=16)
    s = w.grid
    band = (s >= 1.0) & (s <= trunc.s_inner - 1.0)
    formula = (eps * eps * np.cosh(s) ** 2 * (1.0 - np.tanh(s)) / (1.0 + eps * s)) / (
        eps * eps * np.cosh(s) ** 2
    )
    ratio = np.abs(res[:, band]) / formula[None, band]
    assert np.max(np.abs(ratio - 1.0)) < 0.10


def test_neck_mean_curvature_tends_to_one_above():
    # H_hyp = tanh(s) at w = 0 on the pure branch: approaches +1 at the upper
    # truncation (upward-end orientation), i.e. |H-1| tracks 1 - tanh(s)
    eps, rho = 0.005, 0.25
    neck, trunc, w = _neck_setup(eps=eps, rho=rho, n_half=900, m_max=0)
    res = neck_mean_curvature(neck, trunc, w, n_theta=16)
    s = w.grid
    top = s > trunc.s_outer - 0.5
    bound = 1.0 - np.tanh(trunc.s_outer - 0.5)
    assert np.max(np.abs(res[:, top])) < 1.3 * bound
    k_top = np.argmin(np.abs(s - trunc.s_outer))
    assert abs(res[0, k_top]) < 1.5 * (1.0 - np.tanh(trunc.s_outer))


def test_neck_mean_curvature_symmetric():
    neck, trunc, w = _neck_setup(eps=0.01, n_half=640, m_max=0)
    w.coef[0] = 0.001 * np.exp(-w.grid ** 2)  # even perturbation
    res = neck_mean_curvature(neck, trunc, w, n_theta=16)
    flipped = res[:, ::-1]
    assert np.max(np.abs(res - flipped)[:, 5:-5]) < 5e-6


def test_neck_quadratic_remainder_scaling():
    eps = 0.01
    neck, trunc, w0 = _neck_setup(eps=eps, n_half=500, m_max=2)
    s = w0.grid
    bump = np.exp(-2.0 * s ** 2)
    base = neck_mean_curvature(neck, trunc, w0, n_theta=16)
    tau0 = 1e-7
    wp = w0.copy()
    wp.coef[0] = tau0 * bump
    wm = w0.copy()
    wm.coef[0] = -tau0 * bump
    lin = (neck_mean_curvature(neck, trunc, wp, 16) - neck_mean_curvature(neck, trunc, wm, 16)) / (2 * tau0)
    rems = []
    amps = [4e-4, 2e-4, 1e-4]
    for amp in amps:
        w = w0.copy()
        w.coef[0] = amp * bump
        r = neck_mean_curvature(neck, trunc, w, 16) - base - amp * lin
        rems.append(np.max(np.abs(r[:, 5:-5])))
    slope = np.polyfit(np.log(amps), np.log(rems), 1)[0]
    assert 1.9 < slope < 2.1


def test_cylinder_jacobi_barrier_identity():
    # L(cos 2theta (cosh s)^mu) = ((mu^2-4) cosh^2 s + 2 + mu - mu^2)(cosh s)^{mu-2} cos 2theta
    mu = 1.5
    s = cylinder_grid(2.5, 1500)
    w = ModeField.zeros(2, s, kind="cylinder")
    w.coef[2] = 0.5 * np.cosh(s) ** mu
    out = cylinder_L_apply(w)
    target = 0.5 * ((mu * mu - 4.0) * np.cosh(s) ** 2 + 2.0 + mu - mu * mu) * np.cosh(s) ** (mu - 2.0)
    assert np.max(np.abs(out.coef[2][3:-3] - target[3:-3])) < 1e-6 * np.max(np.abs(target))


def test_cylinder_jacobi_matches_neck_linearization():
    # twice the w-derivative of eps^2 cosh^2 s (H_hyp - 1) at w = 0 equals L w
    # up to O(eps) relative error (the average-curvature convention carries a
    # 1/2 through the Jacobi operator)
    rel = []
    for eps in (0.01, 0.005):
        rho = 0.25
        neck = SymmetrizedNeck(eps)
        trunc = truncation(eps, rho)
        s = cylinder_grid(min(2.5, trunc.s_inner - 1.0), 600)
        bump = np.exp(-1.5 * s ** 2) * (1.0 + 0.1 * s)
        tau = 1e-6
        field = np.cosh(s) ** 2 * eps * eps
        out = []
        for sign in (+1.0, -1.0):
            w = ModeField.zeros(0, s, kind="cylinder")
            w.coef[0] = sign * tau * bump
            res = neck_mean_curvature(neck, trunc, w, n_theta=16)
            out.append(res[0] * field)
        deriv = 2.0 * (out[0] - out[1]) / (2 * tau)
        wf = ModeField.zeros(0, s, kind="cylinder")
        wf.coef[0] = bump
        lw = np.real(cylinder_L_apply(wf).coef[0])
        band = slice(5, -5)
        rel.append(np.max(np.abs(deriv[band] - lw[band])) / np.max(np.abs(lw[band])))
    assert rel[0] < 0.1
    assert rel[1] < 0.7 * rel[0]


def test_neck_points_respect_field_direction():
    # moving along the transverse graph raises the surface in the vertical band
    eps, rho = 0.01, 0.2
    neck, trunc, w = _neck_setup(eps=eps, rho=rho, n_half=400, m_max=0)
    w.coef[0] = 0.002
    Z = neck_graph_points(neck, trunc, w, n_theta=8)
    Z0 = neck_graph_points(neck, trunc, ModeField.zeros(0, w.grid, kind="cylinder"), n_theta=8)
    top = np.argmin(np.abs(w.grid - trunc.s_outer))
    assert np.all(Z[:, top, 2] > Z0[:, top, 2])
