"""Mode-decomposed linear solvers on exterior planar domains and finite cylinders.

Real scalar fields are stored as Fourier coefficients over the angle theta on
a radial grid (planar case, logarithmically spaced) or an axial grid
(cylinder case, uniform and symmetric about 0).  Every operator here
decouples across modes.

Conventions: a field with coefficient rows c_m, m = 0..M, takes the value
f(theta) = c_0 + sum_{m>=1} 2 Re(c_m e^{i m theta}); c_0 is real for real
fields.  In log-radial coordinates t = log r the planar mode operator is
u_tt - m^2 u, which is solved exactly (homogeneous exponentials plus a
product-quadrature particular integral); the cylinder operator
d^2/ds^2 - m^2 + 2/cosh^2 s uses the closed-form kernels for m = 0, +-1 and
fourth-order finite differences for |m| >= 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.linalg import solve_banded
from scipy.signal import lfilter


class SolverError(RuntimeError):
    """Raised when a linear solve cannot meet its contract."""


# ---------------------------------------------------------------------------
# grids


def log_radial_grid(r_inner: float, r_outer: float, n: int) -> np.ndarray:
    if not (0 < r_inner < r_outer):
        raise ValueError("need 0 < r_inner < r_outer")
    return np.exp(np.linspace(np.log(r_inner), np.log(r_outer), n))


def cylinder_grid(s0: float, n_half: int) -> np.ndarray:
    """Uniform axial grid on [-s0, s0] with a node at 0."""
    return np.linspace(-s0, s0, 2 * n_half + 1)


# ---------------------------------------------------------------------------
# mode fields


class ModeField:
    """Real field on an annulus or cylinder as per-mode radial/axial profiles."""

    __slots__ = ("coef", "grid", "kind", "center", "_splines")

    def __init__(self, coef: np.ndarray, grid: np.ndarray, kind: str = "planar", center=(0.0, 0.0)):
        coef = np.asarray(coef, dtype=complex)
        if coef.ndim != 2 or coef.shape[1] != len(grid):
            raise ValueError("coef must have shape (M+1, len(grid))")
        self.coef = coef
        self.grid = np.asarray(grid, dtype=float)
        self.kind = kind
        self.center = np.asarray(center, dtype=float)
        self._splines = None

    # -- construction
    @classmethod
    def zeros(cls, m_max: int, grid, kind: str = "planar", center=(0.0, 0.0)):
        return cls(np.zeros((m_max + 1, len(grid)), dtype=complex), grid, kind, center)

    @classmethod
    def from_values(cls, vals: np.ndarray, grid, m_max: int, kind: str = "planar", center=(0.0, 0.0)):
        """vals has shape (n_theta, len(grid)) sampled on the uniform theta grid."""
        n_theta = vals.shape[0]
        if n_theta < 2 * m_max + 2:
            raise ValueError("theta sampling too coarse for requested mode count")
        c = np.fft.rfft(vals, axis=0) / n_theta
        return cls(c[: m_max + 1], grid, kind, center)

    @property
    def m_max(self) -> int:
        return self.coef.shape[0] - 1

    def values(self, n_theta: int) -> np.ndarray:
        """Sample on the uniform theta grid, shape (n_theta, len(grid))."""
        if n_theta < 2 * self.m_max + 2:
            raise ValueError("n_theta too small for stored modes")
        full = np.zeros((n_theta // 2 + 1, len(self.grid)), dtype=complex)
        full[: self.m_max + 1] = self.coef
        return np.fft.irfft(full * n_theta, n=n_theta, axis=0)

    def dtheta(self) -> "ModeField":
        m = np.arange(self.m_max + 1)[:, None]
        return ModeField(1j * m * self.coef, self.grid, self.kind, self.center)

    def copy(self) -> "ModeField":
        return ModeField(self.coef.copy(), self.grid, self.kind, self.center)

    def __add__(self, other):
        if not isinstance(other, ModeField) or other.coef.shape != self.coef.shape:
            return NotImplemented
        return ModeField(self.coef + other.coef, self.grid, self.kind, self.center)

    def __sub__(self, other):
        if not isinstance(other, ModeField) or other.coef.shape != self.coef.shape:
            return NotImplemented
        return ModeField(self.coef - other.coef, self.grid, self.kind, self.center)

    def __mul__(self, scalar):
        return ModeField(self.coef * scalar, self.grid, self.kind, self.center)

    __rmul__ = __mul__

    def sup_norm(self, n_theta: int | None = None) -> float:
        n_theta = n_theta or max(16, 4 * (self.m_max + 1))
        return float(np.max(np.abs(self.values(n_theta))))

    # -- off-grid evaluation (values and first derivatives)
    def _spline_set(self):
        if self._splines is None:
            x = self.grid if self.kind == "cylinder" else np.log(self.grid)
            k = min(5, len(x) - 1)
            spl = make_interp_spline(x, self.coef, k=k, axis=1)
            self._splines = (spl, spl.derivative())
        return self._splines

    def eval_modes(self, radii: np.ndarray, deriv: bool = False, clamp: bool = False):
        """Per-mode profiles (and d/dr or d/ds) at off-grid radii/axial points.

        With ``clamp`` the query is clipped into the stored range (callers mask
        such points out themselves); otherwise out-of-range queries error.
        """
        x = np.asarray(radii, dtype=float)
        lo, hi = self.grid[0], self.grid[-1]
        if not clamp and (np.any(x < lo - 1e-12 * max(1.0, lo)) or np.any(x > hi * (1 + 1e-12))):
            raise SolverError("evaluation outside the stored grid")
        spl, dspl = self._spline_set()
        xv = np.clip(x, lo, hi) if self.kind == "cylinder" else np.log(np.clip(x, lo, hi))
        vals = spl(xv)
        if not deriv:
            return vals
        der = dspl(xv)
        if self.kind != "cylinder":
            der = der / np.clip(x, lo, hi)  # d/dr = (1/r) d/dt
        return vals, der

    def eval_at(self, points_xy: np.ndarray, clamp: bool = False) -> np.ndarray:
        """Planar field value at Cartesian points, shape (..., 2)."""
        if self.kind != "planar":
            raise SolverError("eval_at is for planar fields")
        p = np.asarray(points_xy, dtype=float) - self.center
        r = np.hypot(p[..., 0], p[..., 1])
        th = np.arctan2(p[..., 1], p[..., 0])
        prof = self.eval_modes(r.ravel(), clamp=clamp)
        m = np.arange(self.m_max + 1)[:, None]
        ph = np.exp(1j * m * th.ravel()[None, :])
        out = np.real(prof[0]) + 2.0 * np.sum(np.real(prof[1:] * ph[1:]), axis=0)
        return out.reshape(r.shape)

    def eval_gradient_at(self, points_xy: np.ndarray) -> np.ndarray:
        """Planar Cartesian gradient at points, shape (..., 2)."""
        if self.kind != "planar":
            raise SolverError("eval_gradient_at is for planar fields")
        p = np.asarray(points_xy, dtype=float) - self.center
        r = np.hypot(p[..., 0], p[..., 1]).ravel()
        th = np.arctan2(p[..., 1], p[..., 0]).ravel()
        prof, dprof = self.eval_modes(r, deriv=True)
        m = np.arange(self.m_max + 1)[:, None]
        ph = np.exp(1j * m * th[None, :])
        fr = np.real(dprof[0]) + 2.0 * np.sum(np.real(dprof[1:] * ph[1:]), axis=0)
        ft = 2.0 * np.sum(np.real(1j * m[1:] * prof[1:] * ph[1:]), axis=0)
        ct, st = np.cos(th), np.sin(th)
        gx = fr * ct - ft / r * st
        gy = fr * st + ft / r * ct
        out = np.stack([gx, gy], axis=-1)
        return out.reshape(p.shape)


def mode_vector_from_samples(samples: np.ndarray, m_max: int, tail_tol: float | None = None) -> np.ndarray:
    """Angular samples -> complex mode vector c_m, m = 0..m_max."""
    n = len(samples)
    c = np.fft.rfft(samples) / n
    if tail_tol is not None and len(c) > m_max + 1:
        tail = np.sqrt(np.sum(np.abs(c[m_max + 1 :]) ** 2))
        head = max(np.sqrt(np.sum(np.abs(c) ** 2)), 1e-300)
        if tail > tail_tol * head:
            raise SolverError(
                f"boundary data energy above mode {m_max} is {tail:.2e} (relative {tail / head:.2e}); increase m_max"
            )
    return c[: m_max + 1]


def samples_from_mode_vector(c: np.ndarray, n_theta: int) -> np.ndarray:
    full = np.zeros(n_theta // 2 + 1, dtype=complex)
    full[: len(c)] = c
    return np.fft.irfft(full * n_theta, n=n_theta)


# ---------------------------------------------------------------------------
# finite differences (uniform grids, fourth order, one-sided closures)

_D1_EDGE = np.array(
    [[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]]
) / 12.0
_D2_EDGE = np.array(
    [[45.0, -154.0, 214.0, -156.0, 61.0, -10.0], [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]]
) / 12.0


def fd_d1(vals: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    # stencils are applied to differences from the row's own value, so constants
    # are annihilated exactly (the coefficients sum to zero)
    v = np.moveaxis(np.asarray(vals), axis, -1)
    out = np.empty_like(v, dtype=np.result_type(v.dtype, float))
    c = v[..., 2:-2]
    out[..., 2:-2] = (
        (v[..., :-4] - c) - 8 * (v[..., 1:-3] - c) + 8 * (v[..., 3:-1] - c) - (v[..., 4:] - c)
    ) / (12 * h)
    for i in (0, 1):
        out[..., i] = np.tensordot(v[..., :5] - v[..., i : i + 1], _D1_EDGE[i], axes=([-1], [0])) / h
        out[..., -1 - i] = -np.tensordot(
            (v[..., -5:] - v[..., -1 - i : v.shape[-1] - i])[..., ::-1], _D1_EDGE[i], axes=([-1], [0])
        ) / h
    return np.moveaxis(out, -1, axis)


def fd_d2(vals: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    v = np.moveaxis(np.asarray(vals), axis, -1)
    out = np.empty_like(v, dtype=np.result_type(v.dtype, float))
    c = v[..., 2:-2]
    out[..., 2:-2] = (
        -(v[..., :-4] - c) + 16 * (v[..., 1:-3] - c) + 16 * (v[..., 3:-1] - c) - (v[..., 4:] - c)
    ) / (12 * h * h)
    for i in (0, 1):
        out[..., i] = np.tensordot(v[..., :6] - v[..., i : i + 1], _D2_EDGE[i], axes=([-1], [0])) / (h * h)
        out[..., -1 - i] = np.tensordot(
            (v[..., -6:] - v[..., -1 - i : v.shape[-1] - i])[..., ::-1], _D2_EDGE[i], axes=([-1], [0])
        ) / (h * h)
    return np.moveaxis(out, -1, axis)


# ---------------------------------------------------------------------------
# quadrature on uniform grids


def _poly_integral_weights(nodes: np.ndarray, x0: float, x1: float) -> np.ndarray:
    """Weights integrating the interpolating polynomial on ``nodes`` over [x0, x1]."""
    p = len(nodes)
    V = np.vander(nodes, p, increasing=True).T
    mom = np.array([(x1 ** (k + 1) - x0 ** (k + 1)) / (k + 1) for k in range(p)])
    return np.linalg.solve(V, mom)


_CUM_W = {}


def cumint(y: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Cumulative integral from the first node, sliding quartic interpolation."""
    v = np.moveaxis(np.asarray(y, dtype=float), axis, -1)
    n = v.shape[-1]
    if n < 5:
        raise ValueError("need at least 5 nodes")
    if n not in _CUM_W:
        rows = []
        for k in range(n - 1):
            j0 = min(max(k - 2, 0), n - 5)
            w = _poly_integral_weights(np.arange(j0, j0 + 5, dtype=float), float(k), float(k + 1))
            rows.append((j0, w))
        _CUM_W[n] = rows
    inc = np.zeros_like(v)
    for k, (j0, w) in enumerate(_CUM_W[n]):
        inc[..., k + 1] = np.tensordot(v[..., j0 : j0 + 5], w, axes=([-1], [0])) * h
    return np.moveaxis(np.cumsum(inc, axis=-1), -1, axis)


def _exp_moments(m: float, h: float, p_max: int) -> np.ndarray:
    """Moments integral_0^h x^p e^{m x} dx for p = 0..p_max (stable for small m h)."""
    mom = np.empty(p_max + 1)
    if abs(m * h) < 0.25:
        for p in range(p_max + 1):
            term = h ** (p + 1) / (p + 1)
            total = term
            for j in range(1, 18):
                term *= m * h * (p + j) / (j * (p + j + 1))
                total += term
            mom[p] = total
    else:
        e = np.exp(m * h)
        mom[0] = (e - 1.0) / m
        for p in range(1, p_max + 1):
            mom[p] = (h ** p * e - p * mom[p - 1]) / m
    return mom


def _expquad_weights(m: float, h: float, offsets: np.ndarray) -> np.ndarray:
    """Weights with sum_j w_j g(offsets_j h) = integral_0^h e^{m x} g(x) dx,
    exact for quartic g on the five given integer node offsets."""
    nodes = np.asarray(offsets, dtype=float) * h
    V = np.vander(nodes, 5, increasing=True).T
    mom = _exp_moments(m, h, 4)
    return np.linalg.solve(V, mom)


def decaying_cumint_left(g: np.ndarray, h: float, m: float) -> np.ndarray:
    """J_k = integral_{t_0}^{t_k} e^{-m (t_k - s)} g(s) ds, m >= 0, stable recurrence."""
    g = np.asarray(g, dtype=float)
    n = len(g)
    # local integrals L_k = int_{t_k}^{t_{k+1}} e^{m (s - t_{k+1})} g ds, weight e^{m(x-h)};
    # the five-point window is shifted inward near the ends
    fade = np.exp(-m * h)
    base = np.arange(-2, 3)
    loc = np.empty(n - 1)
    windows = np.lib.stride_tricks.sliding_window_view(g, 5)
    loc[2 : n - 2] = windows[: n - 4] @ (_expquad_weights(m, h, base) * fade)
    for k, rel in ((0, 0), (1, -1), (n - 2, -3)):
        j0 = k + rel
        loc[k] = g[j0 : j0 + 5] @ (_expquad_weights(m, h, base + (rel + 2)) * fade)
    out = np.empty(n)
    out[0] = 0.0
    out[1:] = lfilter([1.0], [1.0, -fade], loc)
    return out


def decaying_cumint_right(g: np.ndarray, h: float, m: float) -> np.ndarray:
    """K_k = integral_{t_k}^{T} e^{-m (s - t_k)} g(s) ds, m >= 0."""
    return decaying_cumint_left(g[::-1], h, m)[::-1]


# ---------------------------------------------------------------------------
# weighted norms


@dataclass(frozen=True)
class WeightSpec:
    """Growth/decay weight: r^rate on exterior planar domains, cosh(s)^rate on cylinders."""

    kind: str  # 'planar' | 'cylinder'
    rate: float


def weighted_norm(field: ModeField, spec: WeightSpec, order: int = 0, n_theta: int | None = None) -> float:
    """Discrete sup surrogate of the weighted Hoelder norms, derivatives up to ``order``.

    Planar fields use the scale-invariant derivatives (r d/dr = d/dt in
    t = log r, and d/dtheta), matching the rescaled-annulus seminorms; cylinder
    fields use plain d/ds and d/dtheta.  Monotone in ``order`` by construction.
    """
    if order > 2:
        raise ValueError("order must be <= 2")
    n_theta = n_theta or max(32, 4 * (field.m_max + 1))
    vals = field.values(n_theta)
    h = (np.log(field.grid)[1] - np.log(field.grid)[0]) if field.kind == "planar" else (field.grid[1] - field.grid[0])
    if field.kind == "planar":
        weight = field.grid[None, :] ** (-spec.rate)
    else:
        weight = np.cosh(field.grid)[None, :] ** (-spec.rate)
    derivs = [vals]
    if order >= 1:
        dth = field.dtheta().values(n_theta)
        derivs += [fd_d1(vals, h, axis=1), dth]
    if order >= 2:
        derivs += [fd_d2(vals, h, axis=1), fd_d1(dth, h, axis=1), field.dtheta().dtheta().values(n_theta)]
    return float(max(np.max(weight * np.abs(d)) for d in derivs))


# ---------------------------------------------------------------------------
# exterior planar solver


def _particular_decaying(g: np.ndarray, h: float, m: int, tail_rate: float | None = None) -> np.ndarray:
    """Particular solution of u'' - m^2 u = g (m > 0) decaying on both sides.

    ``tail_rate`` extends the right integral past the grid assuming
    g ~ g(T) e^{tail_rate (t - T)} there (tail_rate < m), which removes the
    outer-truncation spur for power-law sources.
    """
    J = decaying_cumint_left(np.real(g), h, m) + 1j * decaying_cumint_left(np.imag(g), h, m)
    K = decaying_cumint_right(np.real(g), h, m) + 1j * decaying_cumint_right(np.imag(g), h, m)
    if tail_rate is not None and tail_rate < m - 1e-9:
        n = len(g)
        K = K + g[-1] / (m - tail_rate) * np.exp(-m * h * np.arange(n - 1, -1, -1))
    return -(J + K) / (2 * m)


def _cumint_from_right(y: np.ndarray, h: float) -> np.ndarray:
    """s(t_k) = integral_{t_k}^{T} y dt on a uniform grid."""
    if np.iscomplexobj(y):
        return _cumint_from_right(np.real(y), h) + 1j * _cumint_from_right(np.imag(y), h)
    return cumint(y[::-1], h)[::-1]


def _double_integral_decaying(g: np.ndarray, t: np.ndarray, tail_rate: float | None) -> np.ndarray:
    """v(t) = int_t^inf int_{t'}^inf g dt'' dt', with power tails beyond the grid.

    Solves u_tt = g with u -> 0 at infinity when g decays; ``tail_rate`` is the
    exponential rate of g in t (g ~ g(T) e^{tail_rate (t - T)}, tail_rate < 0).
    """
    h = t[1] - t[0]
    s1 = _cumint_from_right(g, h)
    if tail_rate is not None and tail_rate < -1e-12:
        s1 = s1 + (-g[-1] / tail_rate)
    s2 = _cumint_from_right(s1, h)
    if tail_rate is not None and tail_rate < -1e-12:
        s2 = s2 + (-s1[-1] / tail_rate)
    return s2


def exterior_laplace_solve(
    f: ModeField | None,
    boundary: np.ndarray,
    delta: WeightSpec,
    grid: np.ndarray | None = None,
    m_max: int | None = None,
    center=(0.0, 0.0),
    deficiency: str = "log",
):
    """Solve Laplace u = f outside a disk with Dirichlet data on its circle.

    ``boundary`` is a complex mode vector on the circle r = grid[0].  Modes
    m != 0 get the decaying solution (r^{-m} behavior at the outer end, via a
    Robin closure that is exact for compactly supported sources); the m = 0
    mode uses the double-integral kernel plus one deficiency branch:
    ``deficiency='log'`` adds a log r multiple (no constant; the pipeline
    normalization), ``deficiency='const'`` adds a constant (bounded branch).

    Returns (u, (a, b)) with a the log r coefficient and b the constant.
    """
    if f is None:
        if grid is None or m_max is None:
            raise ValueError("grid and m_max are required when f is None")
        f = ModeField.zeros(m_max, grid, "planar", center)
    grid = f.grid
    t = np.log(grid)
    h = t[1] - t[0]
    boundary = np.asarray(boundary, dtype=complex)
    if len(boundary) < f.m_max + 1:
        boundary = np.concatenate([boundary, np.zeros(f.m_max + 1 - len(boundary))])
    coef = np.zeros_like(f.coef)
    r2f = f.coef * (grid * grid)[None, :]

    # m = 0: decaying double integral + deficiency branch through the data.
    # The source f decays like r^{delta-2}, so g = r^2 f ~ e^{delta t}.
    g0 = r2f[0]
    v0 = _double_integral_decaying(g0, t, delta.rate)
    if deficiency == "log":
        num = np.real(boundary[0]) - np.real(v0[0])
        if abs(t[0]) < 1e-8:
            # the log branch vanishes on the unit circle; only trivial m=0 data is consistent
            if abs(num) > 1e-12:
                raise SolverError("log deficiency branch degenerates at inner radius 1")
            a = 0.0
        else:
            a = num / t[0]
        b = 0.0
        coef[0] = v0 + a * t
    elif deficiency == "const":
        a = 0.0
        b = np.real(boundary[0]) - np.real(v0[0])
        coef[0] = v0 + b
    else:
        raise ValueError("deficiency must be 'log' or 'const'")

    for m in range(1, f.m_max + 1):
        up = _particular_decaying(r2f[m], h, m, tail_rate=delta.rate)
        alpha = boundary[m] - up[0]
        coef[m] = up + alpha * np.exp(-m * (t - t[0]))

    return ModeField(coef, grid, "planar", f.center), (float(a), float(b))


def whole_plane_mode_solve(f: ModeField) -> tuple[ModeField, float]:
    """Particular solution of Laplace u = f on the plane, regular at the origin.

    m = 0 uses the origin-regular kernel (log-growing; the constant at infinity
    is removed so the result sits in the decay-plus-log class); m != 0 uses the
    two-sided decaying particular, which is regular for sources vanishing near
    the origin.  Returns (u, a) with a the log coefficient at infinity.
    """
    grid = f.grid
    t = np.log(grid)
    h = t[1] - t[0]
    coef = np.zeros_like(f.coef)
    g0 = np.real(f.coef[0]) * grid * grid
    inner1 = cumint(g0, h)
    u0 = cumint(inner1, h)  # int_{t0}^t int_{t0}^{t'} g = regular double integral
    a = inner1[-1]
    b = u0[-1] - a * t[-1]
    coef[0] = u0 - b
    for m in range(1, f.m_max + 1):
        coef[m] = _particular_decaying(f.coef[m] * grid * grid, h, m)
    return ModeField(coef, grid, "planar", f.center), float(a)


def discrete_laplacian(u: ModeField) -> ModeField:
    """Mode-wise Laplacian via fourth-order differences in log r."""
    t = np.log(u.grid)
    h = t[1] - t[0]
    m = np.arange(u.m_max + 1)[:, None]
    utt = fd_d2(u.coef, h, axis=1)
    return ModeField((utt - m * m * u.coef) / (u.grid * u.grid)[None, :], u.grid, "planar", u.center)


def cylinder_operator(u: ModeField) -> ModeField:
    """Mode-wise d^2/ds^2 - m^2 + 2/cosh^2 s via fourth-order differences."""
    s = u.grid
    h = s[1] - s[0]
    m = np.arange(u.m_max + 1)[:, None]
    wss = fd_d2(u.coef, h, axis=1)
    return ModeField(wss - m * m * u.coef + 2.0 / np.cosh(s)[None, :] ** 2 * u.coef, s, "cylinder", u.center)


# ---------------------------------------------------------------------------
# log/constant decomposition


@dataclass
class LogDecomposition:
    log_coef: float
    const_coef: float
    remainder: ModeField
    decay_rate: float
    fit_residual: float


def log_decompose(w: ModeField, delta: WeightSpec, fit_tol: float = 1e-3) -> LogDecomposition:
    """Split a harmonic exterior field as v + a log r + b with decaying v.

    The m = 0 profile is fitted against {log r, 1} on the outer third of the
    grid; the remainder's decay rate is fitted from its outer behavior.
    """
    grid = w.grid
    t = np.log(grid)
    n = len(grid)
    sl = slice(2 * n // 3, n)
    A = np.column_stack([t[sl], np.ones(n - 2 * n // 3)])
    prof0 = np.real(w.coef[0])
    sol, *_ = np.linalg.lstsq(A, prof0[sl], rcond=None)
    a, b = float(sol[0]), float(sol[1])
    resid = float(np.max(np.abs(prof0[sl] - A @ sol)))
    scale = max(1.0, float(np.max(np.abs(prof0))))
    if resid > fit_tol * scale:
        raise SolverError(f"m=0 profile is not log r + const on the outer grid (residual {resid:.2e})")
    rem = w.copy()
    rem.coef[0] = prof0 - (a * t + b)
    # decay rate of the remainder from the outer third (sup over modes)
    amp = np.max(np.abs(rem.coef), axis=0)
    amp = np.maximum(amp, 1e-300)
    rate = float(np.polyfit(t[sl], np.log(amp[sl]), 1)[0]) if np.max(amp[sl]) > 1e-14 * scale else -np.inf
    return LogDecomposition(a, b, rem, rate, resid)


# ---------------------------------------------------------------------------
# multi-disk harmonic extension


class HarmonicExtension:
    """Harmonic function outside a union of disks: per-disk multipoles and logs.

    u(x) = sum_j [ L_j log|x - a_j| + Re sum_{m=1}^{M} c_{jm} (rho_j/(x - a_j))^m ]

    The span has no constant at infinity, so the result automatically carries
    the log-branch normalization (b = 0); the total log coefficient is sum L_j.
    """

    def __init__(self, centers, radii, log_coefs, multipoles):
        self.centers = [np.asarray(c, dtype=float) for c in centers]
        self.radii = list(radii)
        self.log_coefs = np.asarray(log_coefs, dtype=float)
        self.multipoles = [np.asarray(c, dtype=complex) for c in multipoles]

    @property
    def log_coefficient(self) -> float:
        return float(np.sum(self.log_coefs))

    def _zrel(self, points):
        p = np.asarray(points, dtype=float)
        return [p[..., 0] + 1j * p[..., 1] - (c[0] + 1j * c[1]) for c in self.centers]

    def value(self, points) -> np.ndarray:
        out = 0.0
        for zj, L, rho, c in zip(self._zrel(points), self.log_coefs, self.radii, self.multipoles):
            out = out + L * np.log(np.abs(zj))
            if len(c):
                w = rho / zj
                acc = 0.0
                for m in range(len(c), 0, -1):
                    acc = (acc + c[m - 1]) * w
                out = out + np.real(acc)
        return out

    def gradient(self, points) -> np.ndarray:
        gz = 0.0
        for zj, L, rho, c in zip(self._zrel(points), self.log_coefs, self.radii, self.multipoles):
            dz = L / zj
            if len(c):
                w = rho / zj
                acc = 0.0
                for m in range(len(c), 0, -1):
                    acc = acc * w + m * c[m - 1]
                # d/dz sum c_m w^m = -(w/z) sum m c_m w^{m-1}
                dz = dz - acc * rho / (zj * zj)
            gz = gz + dz
        # for f = Re F(z): grad f = (Re F', -Im F')
        return np.stack([np.real(gz), -np.imag(gz)], axis=-1)


def multi_disk_harmonic_extension(
    circles: list[tuple[np.ndarray, float]],
    data_modes: list[np.ndarray],
    m_basis: int | None = None,
    tikhonov: float = 1e-12,
    cond_limit: float = 1e12,
) -> HarmonicExtension:
    """Least-squares collocation extension of per-circle Dirichlet data.

    ``data_modes[j]`` are the complex modes of the data on circle j (angle
    about its own center).  The basis is per-disk decaying multipoles plus one
    log per disk; there is no global constant (Prop-4 style normalization).
    """
    n_disk = len(circles)
    m_data = max(len(d) for d in data_modes) - 1
    if m_basis is None:
        m_basis = m_data + 12 if n_disk > 1 else m_data
    n_col = max(4 * (m_basis + 1), 32)
    theta = 2 * np.pi * np.arange(n_col) / n_col

    cols = []  # (kind, j, m) ; kind 'log' | 're' | 'im'
    for j in range(n_disk):
        cols.append(("log", j, 0))
        for m in range(1, m_basis + 1):
            cols.append(("re", j, m))
            cols.append(("im", j, m))

    rows = []
    rhs = []
    for k, (ck, rk) in enumerate(circles):
        pts = np.stack([ck[0] + rk * np.cos(theta), ck[1] + rk * np.sin(theta)], axis=-1)
        z = pts[..., 0] + 1j * pts[..., 1]
        block = np.empty((n_col, len(cols)))
        for idx, (kind, j, m) in enumerate(cols):
            zj = z - (circles[j][0][0] + 1j * circles[j][0][1])
            if kind == "log":
                block[:, idx] = np.log(np.abs(zj))
            else:
                w = (circles[j][1] / zj) ** m
                block[:, idx] = np.real(w) if kind == "re" else np.imag(w)
        rows.append(block)
        rhs.append(samples_from_mode_vector(np.asarray(data_modes[k], dtype=complex), n_col))
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    AtA = A.T @ A + tikhonov * np.eye(A.shape[1])
    cond = np.linalg.cond(AtA)
    if cond > cond_limit:
        raise SolverError(f"extension collocation system ill-conditioned (cond ~ {cond:.2e})")
    coef = np.linalg.solve(AtA, A.T @ b)

    log_coefs = np.zeros(n_disk)
    multipoles = [np.zeros(m_basis, dtype=complex) for _ in range(n_disk)]
    for idx, (kind, j, m) in enumerate(cols):
        if kind == "log":
            log_coefs[j] = coef[idx]
        elif kind == "re":
            multipoles[j][m - 1] += coef[idx]
        else:
            multipoles[j][m - 1] += 1j * coef[idx]
    # Re(c w^m) with c = cr + i ci contributes cr Re(w^m) - ci Im(w^m); flip sign
    for j in range(n_disk):
        multipoles[j] = np.real(multipoles[j]) - 1j * np.imag(multipoles[j])
    return HarmonicExtension([c for c, _ in circles], [r for _, r in circles], log_coefs, multipoles)


# ---------------------------------------------------------------------------
# cylinder solvers


def _cylinder_kernel_m0(f0: np.ndarray, s: np.ndarray) -> np.ndarray:
    """tanh s * int_0^s tanh^{-2} t int_0^t tanh z f0(z) dz dt, integrating from 0."""
    h = s[1] - s[0]
    i0 = np.argmin(np.abs(s))
    th = np.tanh(s)

    def one_side(vals, grid):
        inner = cumint(np.tanh(grid) * vals, grid[1] - grid[0])
        ratio = np.empty_like(inner)
        ratio[1:] = inner[1:] / np.tanh(grid[1:]) ** 2
        ratio[0] = vals[0] / 2.0  # limit of the integrand at 0
        return cumint(ratio, grid[1] - grid[0])

    out = np.zeros_like(f0)
    right = one_side(f0[i0:], s[i0:] - s[i0])
    left = one_side(f0[i0::-1], -(s[i0::-1] - s[i0]))
    out[i0:] = th[i0:] * right
    out[: i0 + 1] = th[: i0 + 1] * left[::-1] * -1.0
    return out


def _cylinder_kernel_m1(f1: np.ndarray, s: np.ndarray) -> np.ndarray:
    """sech s * int_0^s cosh^2 t int_0^t sech z f1(z) dz dt."""
    i0 = np.argmin(np.abs(s))

    def one_side(vals, grid):
        hh = grid[1] - grid[0]
        inner = cumint(vals / np.cosh(grid), hh)
        return cumint(np.cosh(grid) ** 2 * inner, hh)

    out = np.zeros_like(f1)
    out[i0:] = one_side(f1[i0:], s[i0:] - s[i0]) / np.cosh(s[i0:])
    # both nested integrals flip orientation on the left side, so the signs cancel
    out[: i0 + 1] = (one_side(f1[i0::-1], -(s[i0::-1] - s[i0])) / np.cosh(s[i0::-1]))[::-1]
    return out


def _cylinder_bvp(fm: np.ndarray, s: np.ndarray, m: int) -> np.ndarray:
    """Fourth-order FD solve of w'' - m^2 w + 2 sech^2 s w = f, w(+-s0) = 0."""
    n = len(s)
    h = s[1] - s[0]
    A = np.zeros((n, n))
    A[0, 0] = 1.0
    A[-1, -1] = 1.0
    sech2 = 2.0 / np.cosh(s) ** 2
    for i in (1, n - 2):
        sl = slice(0, 6) if i == 1 else slice(n - 6, n)
        row = _D2_EDGE[1] / (h * h)
        if i == n - 2:
            row = row[::-1]
        A[i, sl] = row
        A[i, i] += -m * m + sech2[i]
    irange = np.arange(2, n - 2)
    for off, c in zip((-2, -1, 0, 1, 2), (-1.0, 16.0, -30.0, 16.0, -1.0)):
        A[irange, irange + off] += c / (12 * h * h)
    A[irange, irange] += -m * m + sech2[irange]
    rhsv = np.asarray(fm, dtype=complex).copy()
    rhsv[0] = 0.0
    rhsv[-1] = 0.0
    # banded solve, bandwidth 5 covers the one-sided closure rows
    band = np.zeros((11, n), dtype=complex)
    for i in range(n):
        lo, hi = max(0, i - 5), min(n, i + 6)
        band[5 + i - np.arange(lo, hi), np.arange(lo, hi)] = A[i, lo:hi]
    return solve_banded((5, 5), band, rhsv)


def cylinder_green(f: ModeField, mu: WeightSpec) -> ModeField:
    """Right inverse of d^2/ds^2 + d^2/dtheta^2 + 2 sech^2 s on [-s0, s0] x S^1.

    Boundary values of the output lie in span{1, e^{i theta}, e^{-i theta}}:
    the m = 0 and |m| = 1 modes come from the closed-form kernels (free
    boundary values in that span), every |m| >= 2 mode is solved with zero
    Dirichlet conditions.  The bound ||G f|| <= c ||f|| holds with c
    independent of the half-length s0 (checked in the suite).
    """
    if not (1.0 < mu.rate < 2.0) or mu.kind != "cylinder":
        raise ValueError("cylinder weight must have rate in (1, 2)")
    s = f.grid
    coef = np.zeros_like(f.coef)
    coef[0] = _cylinder_kernel_m0(np.real(f.coef[0]), s)
    if f.m_max >= 1:
        coef[1] = _cylinder_kernel_m1(np.real(f.coef[1]), s) + 1j * _cylinder_kernel_m1(np.imag(f.coef[1]), s)
    for m in range(2, f.m_max + 1):
        coef[m] = _cylinder_bvp(f.coef[m], s, m)
    return ModeField(coef, s, "cylinder", f.center)


def half_cylinder_poisson(phi_modes: np.ndarray, s: np.ndarray, low_mode_tol: float = 1e-12) -> ModeField:
    """Bounded harmonic extension of circle data to [0, infinity) x S^1.

    The data must have no m = 0, +-1 content; each remaining mode extends as
    phi_m e^{-m s} e^{i m theta}, exactly.  ``s`` is the (nonnegative) axial
    grid on which to sample.
    """
    phi = np.asarray(phi_modes, dtype=complex)
    low = max(abs(np.real(phi[0])), abs(phi[1]) if len(phi) > 1 else 0.0)
    scale = max(np.max(np.abs(phi)), 1e-300)
    if low > low_mode_tol * scale:
        raise SolverError("Poisson data must be orthogonal to modes 0 and +-1")
    s = np.asarray(s, dtype=float)
    coef = np.zeros((len(phi), len(s)), dtype=complex)
    for m in range(2, len(phi)):
        coef[m] = phi[m] * np.exp(-m * s)
    return ModeField(coef, s, "cylinder")


def kernel_trace_direction(grid: np.ndarray, m_max: int, delta: WeightSpec, r1: float) -> tuple[float, float]:
    """Direction of the deficiency-space kernel trace: chi log r - G(Lap(chi log r)).

    Verification-only helper; returns the (log, const) coefficients of the
    harmonic field built from the log branch by removing its forcing.
    """
    chi = plateau((np.log(grid) - np.log(2 * r1)) / (np.log(4 * r1) - np.log(2 * r1)))
    w = ModeField.zeros(m_max, grid, "planar")
    w.coef[0] = chi * np.log(grid)
    lap = discrete_laplacian(w)
    sol, _ = exterior_laplace_solve(lap, np.zeros(m_max + 1), delta, deficiency="log")
    ker = w - sol
    dec = log_decompose(ker, delta, fit_tol=1e-4)
    return dec.log_coef, dec.const_coef


def plateau(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 across the ends."""
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
