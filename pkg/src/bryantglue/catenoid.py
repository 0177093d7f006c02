"""Catenoid cousins, radial end profiles, and the symmetrized neck model.

The cousin family is evaluated through its Minkowski-model parameterization
and the hyperboloid chart z = 1/(x0 - x3), x = (x1, x2)/(x0 - x3).  End
profiles solve the radial CMC-1 graph equation for u = r^{2-t}(1 + v) by
Picard iteration with the decaying m = 0 kernel.  The neck model blends a
rescaled vertical Euclidean catenoid with its inversion image so the whole
surface is invariant under the unit inversion about its center.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .h3geom import Isometry
from .specsolve import _double_integral_decaying, fd_d1, fd_d2


class CatenoidError(ValueError):
    pass


# ---------------------------------------------------------------------------
# the exact family


@dataclass(frozen=True)
class CatenoidCousin:
    """One-parameter rotationally symmetric CMC-1 family, embedded for t in (1,2)."""

    t: float

    def __post_init__(self):
        if self.t <= 1.0 or self.t == 2.0:
            raise CatenoidError(f"family parameter must satisfy t > 1, t != 2; got {self.t}")

    @property
    def embedded(self) -> bool:
        return 1.0 < self.t < 2.0

    @property
    def neck_radius_factor(self) -> float:
        """|t (t-2)| / (2 (t-1)); tends to 0 as t -> 2 (two-horosphere limit)."""
        return abs(self.t * (self.t - 2.0)) / (2.0 * (self.t - 1.0))


def minkowski_point(t: float, s, theta) -> np.ndarray:
    """Minkowski-model parameterization of the cousin, shape (..., 4) = (x0, x1, x2, x3)."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    q = 1.0 / (4.0 * (t - 1.0))
    p = t * (t - 2.0) / (2.0 * (t - 1.0))
    x0 = q * (t * t * np.cosh((t - 2.0) * s) + (t - 2.0) ** 2 * np.cosh(t * s))
    x1 = p * np.cosh((t - 1.0) * s) * np.cos(theta)
    x2 = p * np.cosh((t - 1.0) * s) * np.sin(theta)
    x3 = q * (t * t * np.sinh((t - 2.0) * s) - (t - 2.0) ** 2 * np.sinh(t * s))
    return np.stack(np.broadcast_arrays(x0, x1, x2, x3), axis=-1)


def half_space_from_minkowski(x4: np.ndarray) -> np.ndarray:
    """Hyperboloid chart to the upper half-space: z = 1/(x0-x3), x = (x1,x2)/(x0-x3)."""
    x4 = np.asarray(x4, dtype=float)
    denom = x4[..., 0] - x4[..., 3]
    return np.stack([x4[..., 1] / denom, x4[..., 2] / denom, 1.0 / denom], axis=-1)


def cousin_point(c: CatenoidCousin, s, theta) -> np.ndarray:
    """Upper half-space point of the cousin at parameters (s, theta)."""
    return half_space_from_minkowski(minkowski_point(c.t, s, theta))


# ---------------------------------------------------------------------------
# radial mean curvature (1D; independent of the full polar evaluator)


def radial_graph_mean_curvature(u: np.ndarray, r: np.ndarray) -> np.ndarray:
    """H of the rotationally symmetric graph z = u(r) on a log-spaced grid."""
    tau = np.log(r)
    h = tau[1] - tau[0]
    ur = fd_d1(u, h) / r
    w = np.sqrt(1.0 + ur * ur)
    flux = r * ur / w
    div = fd_d1(flux, h) / (r * r)
    return 1.0 / w + 0.5 * u * div


# ---------------------------------------------------------------------------
# end profiles


@dataclass
class EndProfile:
    """Solved radial end u = r^{2-t}(1 + v) with its diagnostics."""

    t: float
    r0: float
    grid: np.ndarray
    v: np.ndarray
    residual_sup: float
    decay_exponent: float
    iterations: int

    def u(self, r=None) -> np.ndarray:
        if r is None:
            return self.grid ** (2.0 - self.t) * (1.0 + self.v)
        r = np.asarray(r, dtype=float)
        vv = np.interp(np.log(r), np.log(self.grid), self.v)
        return r ** (2.0 - self.t) * (1.0 + vv)


def solve_end_profile(
    t: float,
    r0: float = 3.0,
    n: int = 1200,
    outer_factor: float = 300.0,
    tol: float = 1e-12,
    max_iter: int = 60,
    max_retries: int = 3,
) -> EndProfile:
    """Solve H(u) = 1 for u = r^{2-t}(1 + v) on [r0, outer_factor r0].

    Picard iteration: the quasilinear part is inverted with the decaying
    double-integral kernel (no log or constant branch; the end exponent is
    pinned by t).  Retries with doubled r0 if the iteration does not contract.
    """
    if t <= 1.0:
        raise CatenoidError("end profiles need t > 1")
    last_err = None
    for attempt in range(max_retries + 1):
        rr0 = r0 * 2 ** attempt
        r = np.exp(np.linspace(np.log(rr0), np.log(outer_factor * rr0), n))
        tau = np.log(r)
        h = tau[1] - tau[0]
        a = 2.0 - t
        v = np.zeros(n)
        ok = False
        prev = np.inf
        for it in range(max_iter):
            vr = fd_d1(v, h) / r
            vrr = (fd_d2(v, h) - fd_d1(v, h)) / (r * r)
            u = r ** a * (1.0 + v)
            ur = r ** a * (a * (1.0 + v) / r + vr)
            urr = r ** a * (a * (a - 1.0) * (1.0 + v) / (r * r) + 2.0 * a * vr / r + vrr)
            g2 = ur * ur
            lap_u = urr + ur / r
            q1 = 2.0 * (1.0 + 1.5 * g2 - (1.0 + g2) ** 1.5)
            dg2 = fd_d1(g2, h) / r
            q2 = u * lap_u * g2 - 0.5 * u * ur * dg2
            # K(r^a (1+v)) = r^{2a} ((1+v) lap v - |grad v|^2), so
            # lap v = (|grad v|^2 - r^{-2a}(Q1+Q2)) / (1+v)
            rhs = (vr * vr - r ** (-2.0 * a) * (q1 + q2)) / (1.0 + v)
            v_new = np.real(_double_integral_decaying(rhs * r * r, tau, 2.0 - 2.0 * t))
            upd = float(np.max(np.abs(v_new - v)))
            v = v_new
            if upd < tol:
                ok = True
                break
            if it > 4 and upd > prev * 1.5:
                break  # diverging; retry with larger r0
            prev = upd
        if not ok:
            last_err = upd
            continue
        u = r ** a * (1.0 + v)
        resid = float(np.max(np.abs(radial_graph_mean_curvature(u, r)[3:-3] - 1.0)))
        outer = slice(n // 2, n)
        vmax = np.max(np.abs(v[outer]))
        if vmax > 1e-13:
            decay = float(np.polyfit(tau[outer], np.log(np.maximum(np.abs(v[outer]), 1e-300)), 1)[0])
        else:
            decay = 2.0 - 2.0 * t  # v == 0 (the horosphere end t = 2)
        return EndProfile(t, rr0, r, v, resid, decay, it + 1)
    raise CatenoidError(f"end-profile iteration did not converge (last update {last_err:.3e})")


# ---------------------------------------------------------------------------
# Jacobi-field asymptotics

_JACOBI_KINDS = ("0+", "0-", "-1+", "-1-", "+1+", "+1-")


def jacobi_asymptotic(kind: str):
    """Leading-order end behavior of the six geometric Jacobi fields.

    '0+': log r (family parameter), '0-': 1 (dilation), '-1+/-': r^{-1} cos/sin
    (translations), '+1+/-': r cos/sin (boundary-point motions).
    """
    if kind not in _JACOBI_KINDS:
        raise CatenoidError(f"unknown Jacobi kind {kind!r}; expected one of {_JACOBI_KINDS}")

    def profile(r, theta=0.0):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if kind == "0+":
            return np.log(r) + 0.0 * theta
        if kind == "0-":
            return np.ones_like(r + theta)
        trig = np.cos(theta) if kind.endswith("+") else np.sin(theta)
        power = -1.0 if kind.startswith("-1") else 1.0
        return r ** power * trig

    return profile


# ---------------------------------------------------------------------------
# the symmetrized neck


def odd_plateau(s: np.ndarray) -> np.ndarray:
    """C^2 odd ramp: -1 for s <= -1, +1 for s >= 1, quintic in between."""
    x = np.clip(s, -1.0, 1.0)
    return x * (15.0 - 10.0 * x * x + 3.0 * x ** 4) / 8.0


@dataclass
class SymmetrizedNeck:
    """Rescaled vertical catenoid blended with its inversion image.

    The parameterization X satisfies I_center(X(s, theta)) = X(-s, theta)
    exactly, agrees with the upper catenoid branch for s >= 1 and with the
    inverted branch for s <= -1.  ``scale`` is the neck scale (the paper-level
    epsilon for one tangency).
    """

    scale: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        if not (0.0 < self.scale < 1.0):
            raise CatenoidError("neck scale must lie in (0, 1)")

    # profile in the (R, zeta) half-plane about the vertical axis through center
    def _omega_upper(self, s):
        return self.scale * np.cosh(s) + 1j * (1.0 + self.scale * s)

    def _domega_upper(self, s):
        return self.scale * np.sinh(s) + 1j * self.scale

    def profile(self, s, deriv: bool = False):
        """(R, zeta) of the profile curve; optionally also (dR/ds, dzeta/ds)."""
        s = np.asarray(s, dtype=float)
        wa = self._omega_upper(s)
        wb = 1.0 / np.conj(self._omega_upper(-s))
        la = np.stack([np.log(np.abs(wa)), np.angle(wa)])
        lb = np.stack([np.log(np.abs(wb)), np.angle(wb)])
        beta = 0.5 * (1.0 + odd_plateau(s))
        ell = beta * la + (1.0 - beta) * lb
        R = np.exp(ell[0]) * np.cos(ell[1])
        zeta = np.exp(ell[0]) * np.sin(ell[1])
        if not deriv:
            return R, zeta
        dwa = self._domega_upper(s)
        dwb = np.conj(self._domega_upper(-s)) / np.conj(self._omega_upper(-s)) ** 2
        dla = np.stack([np.real(np.conj(wa) * dwa), np.imag(np.conj(wa) * dwa)]) / np.abs(wa) ** 2
        dlb = np.stack([np.real(np.conj(wb) * dwb), np.imag(np.conj(wb) * dwb)]) / np.abs(wb) ** 2
        x = np.clip(s, -1.0, 1.0)
        dbeta = 0.5 * (15.0 - 30.0 * x * x + 15.0 * x ** 4) / 8.0 * (np.abs(s) <= 1.0)
        dell = dbeta * (la - lb) + beta * dla + (1.0 - beta) * dlb
        dR = np.exp(ell[0]) * (dell[0] * np.cos(ell[1]) - dell[1] * np.sin(ell[1]))
        dzeta = np.exp(ell[0]) * (dell[0] * np.sin(ell[1]) + dell[1] * np.cos(ell[1]))
        return (R, zeta), (dR, dzeta)

    def point(self, s, theta) -> np.ndarray:
        """Embedding X(s, theta), shape (..., 3)."""
        s, theta = np.broadcast_arrays(np.asarray(s, float), np.asarray(theta, float))
        R, zeta = self.profile(s)
        return np.stack(
            [self.center[0] + R * np.cos(theta), self.center[1] + R * np.sin(theta), zeta], axis=-1
        )

    def unit_normal(self, s, theta) -> np.ndarray:
        """Inward Euclidean unit normal; equals (-cos, -sin, sinh)/cosh on the pure branch."""
        s, theta = np.broadcast_arrays(np.asarray(s, float), np.asarray(theta, float))
        (_, _), (dR, dzeta) = self.profile(s, deriv=True)
        norm = np.hypot(dR, dzeta)
        return np.stack(
            [-dzeta / norm * np.cos(theta), -dzeta / norm * np.sin(theta), dR / norm], axis=-1
        )

    def inversion(self) -> Isometry:
        return Isometry.inversion_at(self.center)


@dataclass(frozen=True)
class NeckTruncation:
    """Truncation parameters: scale cosh(s_outer) = rho, scale cosh(s_inner) = rho/2."""

    rho: float
    s_outer: float
    s_inner: float


def truncation(neck_scale: float, rho: float) -> NeckTruncation:
    if not (0.0 < neck_scale < rho):
        raise CatenoidError(f"need 0 < neck scale < rho (got scale {neck_scale}, rho {rho})")
    s_outer = float(np.arccosh(rho / neck_scale))
    if rho / (2.0 * neck_scale) <= 1.0:
        raise CatenoidError("inner truncation collapses: need neck scale < rho/2")
    s_inner = float(np.arccosh(rho / (2.0 * neck_scale)))
    return NeckTruncation(rho, s_outer, s_inner)


def transverse_field(neck: SymmetrizedNeck, trunc: NeckTruncation, s, theta) -> np.ndarray:
    """Unit transverse field on the (default-chart) truncated neck.

    Equals the inward surface normal through the blend and pure-catenoid
    region, the vertical direction on the upper graph band
    s in [s_inner, s_outer + 1], a normalized linear interpolation on
    [s_inner - 1, s_inner], and the inversion pushforward of all of that for
    s < 0.  Accepts |s| <= s_outer + 1 (one-unit margin past the seams).
    """
    s, theta = np.broadcast_arrays(np.asarray(s, float), np.asarray(theta, float))
    if np.any(np.abs(s) > trunc.s_outer + 1.0 + 1e-12):
        raise CatenoidError("transverse field queried outside the truncated neck")
    out = np.empty(s.shape + (3,))
    si, so = trunc.s_inner, trunc.s_outer

    def upper(sv, tv):
        res = np.empty(sv.shape + (3,))
        normal = sv <= si - 1.0
        res[normal] = neck.unit_normal(sv[normal], tv[normal])
        vert = sv >= si
        res[vert] = np.array([0.0, 0.0, 1.0])
        band = ~normal & ~vert
        if np.any(band):
            lam = (sv[band] - (si - 1.0))[:, None]
            mix = (1.0 - lam) * neck.unit_normal(sv[band], tv[band]) + lam * np.array([0.0, 0.0, 1.0])
            res[band] = mix / np.linalg.norm(mix, axis=-1, keepdims=True)
        return res

    pos = s >= -(si - 1.0)
    out[pos] = upper(s[pos], theta[pos])
    neg = ~pos
    if np.any(neg):
        pts = neck.point(-s[neg], theta[neg])
        vecs = upper(-s[neg], theta[neg])
        inv = neck.inversion()
        _, pushed = inv.push_direction(pts, vecs)
        out[neg] = pushed
    return out
