"""Upper half-space model of hyperbolic 3-space.

Points are (x1, x2, z) with z > 0 and the metric z^-2 (dx^2 + dz^2).  The
ideal boundary is R^2 plus a point at infinity.  Isometries are stored as
chains of the four conformal generators (horizontal translation, dilation
about the origin, horizontal orthogonal map, unit inversion about the
origin); every isometry of the model is such a composition.
"""
from __future__ import annotations

import numpy as np

ATOL = 1e-10  # geometric predicate tolerance, on unit-hemisphere scale


class GeometryError(ValueError):
    """Raised when a geometric precondition fails (degenerate input, off-curve point, ...)."""


# ---------------------------------------------------------------------------
# boundary points


class BoundaryPoint:
    """A point of the ideal boundary: finite coordinates in R^2 or infinity."""

    __slots__ = ("xy",)

    def __init__(self, xy=None):
        if xy is None:
            self.xy = None
        else:
            a = np.asarray(xy, dtype=float).reshape(2)
            if not np.all(np.isfinite(a)):
                raise GeometryError("finite boundary point must have finite coordinates")
            self.xy = a

    @property
    def is_infinity(self) -> bool:
        return self.xy is None

    def as_array(self) -> np.ndarray:
        if self.xy is None:
            raise GeometryError("point at infinity has no coordinates")
        return self.xy

    def __eq__(self, other):
        if not isinstance(other, BoundaryPoint):
            return NotImplemented
        if self.is_infinity or other.is_infinity:
            return self.is_infinity and other.is_infinity
        return bool(np.all(self.xy == other.xy))

    def __hash__(self):
        return hash(None if self.xy is None else (float(self.xy[0]), float(self.xy[1])))

    def __repr__(self):
        return "BoundaryPoint(inf)" if self.is_infinity else f"BoundaryPoint({self.xy[0]!r}, {self.xy[1]!r})"

    def isclose(self, other: "BoundaryPoint", tol: float = ATOL) -> bool:
        if self.is_infinity or other.is_infinity:
            return self.is_infinity and other.is_infinity
        return bool(np.linalg.norm(self.xy - other.xy) <= tol)


INFINITY = BoundaryPoint(None)


def bp(x: float, y: float) -> BoundaryPoint:
    return BoundaryPoint((x, y))


def interior(x: float, y: float, z: float) -> np.ndarray:
    """An interior point as a length-3 array; z must be positive."""
    if z <= 0:
        raise GeometryError(f"interior point needs z > 0, got z = {z}")
    return np.array([x, y, z], dtype=float)


def hyperbolic_distance(p, q) -> np.ndarray:
    """Distance in the z^-2(dx^2+dz^2) metric; vectorized over leading axes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d2 = np.sum((p - q) ** 2, axis=-1)
    arg = 1.0 + d2 / (2.0 * p[..., 2] * q[..., 2])
    return np.arccosh(np.maximum(arg, 1.0))


# ---------------------------------------------------------------------------
# generators

_IDENT2 = np.eye(2)


class _Gen:
    __slots__ = ()


class Translation(_Gen):
    __slots__ = ("a",)

    def __init__(self, a):
        self.a = np.asarray(a, dtype=float).reshape(2)

    def apply(self, p):
        out = p.copy()
        out[..., :2] += self.a
        return out

    def boundary(self, b: BoundaryPoint) -> BoundaryPoint:
        return b if b.is_infinity else BoundaryPoint(b.xy + self.a)

    def inverse(self):
        return Translation(-self.a)

    def jacobian(self, p):
        return np.broadcast_to(np.eye(3), p.shape[:-1] + (3, 3))


class Dilation(_Gen):
    __slots__ = ("lam",)

    def __init__(self, lam: float):
        if lam <= 0:
            raise GeometryError(f"dilation ratio must be positive, got {lam}")
        self.lam = float(lam)

    def apply(self, p):
        return p * self.lam

    def boundary(self, b: BoundaryPoint) -> BoundaryPoint:
        return b if b.is_infinity else BoundaryPoint(b.xy * self.lam)

    def inverse(self):
        return Dilation(1.0 / self.lam)

    def jacobian(self, p):
        return np.broadcast_to(self.lam * np.eye(3), p.shape[:-1] + (3, 3))


class Rotation(_Gen):
    """Horizontal orthogonal map (rotation or reflection), fixing the z axis."""

    __slots__ = ("mat",)

    def __init__(self, mat):
        m = np.asarray(mat, dtype=float).reshape(2, 2)
        if not np.allclose(m.T @ m, _IDENT2, atol=1e-12):
            raise GeometryError("matrix is not orthogonal")
        self.mat = m

    def apply(self, p):
        out = p.copy()
        out[..., :2] = p[..., :2] @ self.mat.T
        return out

    def boundary(self, b: BoundaryPoint) -> BoundaryPoint:
        return b if b.is_infinity else BoundaryPoint(self.mat @ b.xy)

    def inverse(self):
        return Rotation(self.mat.T)

    def jacobian(self, p):
        j = np.zeros((3, 3))
        j[:2, :2] = self.mat
        j[2, 2] = 1.0
        return np.broadcast_to(j, p.shape[:-1] + (3, 3))


class Inversion(_Gen):
    """Unit inversion about the origin, p -> p / |p|^2."""

    __slots__ = ()

    def apply(self, p):
        n2 = np.sum(p * p, axis=-1, keepdims=True)
        return p / n2

    def boundary(self, b: BoundaryPoint) -> BoundaryPoint:
        if b.is_infinity:
            return BoundaryPoint((0.0, 0.0))
        n2 = float(b.xy @ b.xy)
        if n2 == 0.0:
            return INFINITY
        return BoundaryPoint(b.xy / n2)

    def inverse(self):
        return self

    def jacobian(self, p):
        n2 = np.sum(p * p, axis=-1)
        outer = p[..., :, None] * p[..., None, :]
        eye = np.broadcast_to(np.eye(3), outer.shape)
        return (eye - 2.0 * outer / n2[..., None, None]) / n2[..., None, None]


# ---------------------------------------------------------------------------
# isometries

_PROBES = [BoundaryPoint((0.0, 0.0)), BoundaryPoint((1.0, 0.0)), BoundaryPoint((0.0, 1.0)), INFINITY]


class Isometry:
    """A composable isometry, stored as a generator chain (applied right to left)."""

    __slots__ = ("generators",)

    def __init__(self, generators=()):
        self.generators = tuple(generators)

    # -- constructors
    @classmethod
    def identity(cls):
        return cls(())

    @classmethod
    def translation(cls, a):
        return cls((Translation(a),))

    @classmethod
    def dilation(cls, lam):
        return cls((Dilation(lam),))

    @classmethod
    def rotation(cls, mat):
        return cls((Rotation(mat),))

    @classmethod
    def inversion(cls):
        return cls((Inversion(),))

    @classmethod
    def inversion_at(cls, center):
        """Unit inversion about a finite boundary point."""
        c = np.asarray(center, dtype=float).reshape(2)
        return cls.translation(c) @ cls.inversion() @ cls.translation(-c)

    # -- action
    def apply(self, p) -> np.ndarray:
        """Apply to interior points, shape (..., 3); preserves z > 0."""
        out = np.asarray(p, dtype=float)
        for g in reversed(self.generators):
            out = g.apply(out)
        return out

    def boundary(self, b: BoundaryPoint) -> BoundaryPoint:
        for g in reversed(self.generators):
            b = g.boundary(b)
        return b

    def jacobian(self, p) -> np.ndarray:
        """Differential at interior points, shape (..., 3, 3)."""
        pt = np.asarray(p, dtype=float)
        jac = np.broadcast_to(np.eye(3), pt.shape[:-1] + (3, 3)).copy()
        for g in reversed(self.generators):
            jac = g.jacobian(pt) @ jac
            pt = g.apply(pt)
        return jac

    def push_direction(self, p, v) -> tuple[np.ndarray, np.ndarray]:
        """Image point and unit pushforward of Euclidean-unit directions v at p."""
        jac = self.jacobian(p)
        w = np.einsum("...ij,...j->...i", jac, np.asarray(v, dtype=float))
        w /= np.linalg.norm(w, axis=-1, keepdims=True)
        return self.apply(p), w

    # -- composition
    def compose(self, other: "Isometry") -> "Isometry":
        return Isometry(_simplify(self.generators + other.generators))

    def __matmul__(self, other):
        if not isinstance(other, Isometry):
            return NotImplemented
        return self.compose(other)

    def inverse(self) -> "Isometry":
        return Isometry(_simplify(tuple(g.inverse() for g in reversed(self.generators))))

    def is_identity(self, tol: float = 1e-12) -> bool:
        for probe in _PROBES:
            img = self.boundary(probe)
            if probe.is_infinity or img.is_infinity:
                if not (probe.is_infinity and img.is_infinity):
                    return False
            elif np.linalg.norm(img.xy - probe.xy) > tol:
                return False
        return True

    def __repr__(self):
        names = [type(g).__name__ for g in self.generators]
        return f"Isometry([{', '.join(names)}])"


def _is_trivial(g: _Gen) -> bool:
    if isinstance(g, Translation):
        return bool(np.all(g.a == 0.0))
    if isinstance(g, Dilation):
        return g.lam == 1.0
    if isinstance(g, Rotation):
        return bool(np.all(g.mat == _IDENT2))
    return False


def _simplify(gens):
    """Cancel adjacent generators of the same kind; drop trivial ones."""
    out: list[_Gen] = []
    for g in gens:
        if _is_trivial(g):
            continue
        if out:
            prev = out[-1]
            merged = None
            if isinstance(prev, Translation) and isinstance(g, Translation):
                merged = Translation(prev.a + g.a)
            elif isinstance(prev, Dilation) and isinstance(g, Dilation):
                merged = Dilation(prev.lam * g.lam)
            elif isinstance(prev, Rotation) and isinstance(g, Rotation):
                merged = Rotation(prev.mat @ g.mat)
            elif isinstance(prev, Inversion) and isinstance(g, Inversion):
                out.pop()
                continue
            if merged is not None:
                out.pop()
                if not _is_trivial(merged):
                    out.append(merged)
                continue
        out.append(g)
    return tuple(out)


# ---------------------------------------------------------------------------
# geodesics


class Geodesic:
    """Oriented complete geodesic, positive direction from endpoint a to endpoint b."""

    __slots__ = ("a", "b")

    def __init__(self, a: BoundaryPoint, b: BoundaryPoint):
        if a.isclose(b, tol=0.0) or (a.is_infinity and b.is_infinity):
            raise GeometryError("geodesic endpoints must be distinct")
        if not a.is_infinity and not b.is_infinity and np.all(a.xy == b.xy):
            raise GeometryError("geodesic endpoints must be distinct")
        self.a = a
        self.b = b

    def reversed(self) -> "Geodesic":
        return Geodesic(self.b, self.a)

    @property
    def is_vertical(self) -> bool:
        return self.a.is_infinity or self.b.is_infinity

    def _circle(self):
        """Midpoint, radius and unit direction (a -> b) of the boundary shadow."""
        pa, pb = self.a.as_array(), self.b.as_array()
        mid = 0.5 * (pa + pb)
        u = pb - pa
        r = 0.5 * float(np.linalg.norm(u))
        return mid, r, u / (2.0 * r)

    def point_at(self, tau: float) -> np.ndarray:
        """Unit-speed parameterization; tau -> +inf approaches endpoint b."""
        if self.is_vertical:
            foot = (self.b if self.a.is_infinity else self.a).as_array()
            # z = e^{sigma tau}: up when b is the infinite endpoint
            sigma = 1.0 if self.b.is_infinity else -1.0
            return np.array([foot[0], foot[1], float(np.exp(sigma * tau))])
        mid, r, u = self._circle()
        xy = mid + u * (r * np.tanh(tau))
        return np.array([xy[0], xy[1], r / np.cosh(tau)])

    def parameter_of(self, p, tol: float = ATOL) -> float:
        """Unit-speed parameter of a point on the trace; errors if off the geodesic."""
        p = np.asarray(p, dtype=float)
        if self.is_vertical:
            foot = (self.b if self.a.is_infinity else self.a).as_array()
            off = float(np.linalg.norm(p[:2] - foot))
            if off > tol:
                raise GeometryError(f"point is off the geodesic by {off:.3e}")
            sigma = 1.0 if self.b.is_infinity else -1.0
            return sigma * float(np.log(p[2]))
        mid, r, u = self._circle()
        w = p[:2] - mid
        xi = float(w @ u)
        perp = float(np.linalg.norm(w - xi * u))
        dist_sphere = abs(np.hypot(xi, p[2]) - r)
        off = max(perp, dist_sphere)
        if off > tol:
            raise GeometryError(f"point is off the geodesic by {off:.3e}")
        return float(np.arctanh(np.clip(xi / r, -1 + 1e-16, 1 - 1e-16)))


def geodesic_point(g: Geodesic, reference, d: float, tol: float = ATOL) -> np.ndarray:
    """Point at signed distance d from ``reference`` along g (positive toward g.b)."""
    tau = g.parameter_of(reference, tol=tol)
    return g.point_at(tau + d)


def hemisphere_intersection(g: Geodesic) -> np.ndarray:
    """Intersection of g with the unit hemisphere about the origin.

    Requires transversality: one endpoint outside the closed unit disk (or at
    infinity), the other strictly inside.
    """

    def _gauge(b: BoundaryPoint) -> float:
        return np.inf if b.is_infinity else float(np.linalg.norm(b.xy))

    na, nb = _gauge(g.a), _gauge(g.b)
    if not ((na > 1.0 and nb < 1.0) or (nb > 1.0 and na < 1.0)):
        raise GeometryError(
            f"geodesic not transverse to the unit hemisphere: endpoint radii {na:.6g}, {nb:.6g}"
        )
    if g.is_vertical:
        foot = (g.b if g.a.is_infinity else g.a).as_array()
        return np.array([foot[0], foot[1], float(np.sqrt(1.0 - foot @ foot))])
    mid, r, u = g._circle()
    mu = float(mid @ u)
    m2 = float(mid @ mid)
    if mu == 0.0:
        raise GeometryError("degenerate hemisphere intersection (symmetric chord)")
    th = (1.0 - m2 - r * r) / (2.0 * r * mu)
    if not (-1.0 < th < 1.0):
        raise GeometryError("geodesic misses the unit hemisphere")
    tau = float(np.arctanh(th))
    return g.point_at(tau)


# ---------------------------------------------------------------------------
# the neck-normalizing isometry


def geodesic_flow(p, v, dist) -> np.ndarray:
    """Flow hyperbolic distance ``dist`` from p along the Euclidean-unit direction v.

    Uniformly stable closed form (tanh addition on the orthogonal circle,
    exact for vertical directions as well):
        x' = x + v_xy z tanh(d) / (1 - v_z tanh(d)),
        z' = z / (cosh(d) (1 - v_z tanh(d))).
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    dist = np.asarray(dist, dtype=float)
    p, v = np.broadcast_arrays(p, v)
    dist = np.broadcast_to(dist, p.shape[:-1])
    th = np.tanh(dist)
    denom = 1.0 - v[..., 2] * th
    out = np.empty_like(p)
    out[..., :2] = p[..., :2] + v[..., :2] * (p[..., 2] * th / denom)[..., None]
    out[..., 2] = p[..., 2] / (np.cosh(dist) * denom)
    return out


def build_neck_isometry(far_anchor: BoundaryPoint, near_anchor: BoundaryPoint, offset: float) -> Isometry:
    """Isometry sending ``far_anchor`` to infinity, fixing ``near_anchor``, and
    placing the point at signed geodesic distance ``offset`` from the unit
    hemisphere on the plane z = 1.

    ``offset`` is measured along the geodesic joining the anchors, positive
    toward ``far_anchor``.  With the far anchor at infinity the map degenerates
    to a dilation about the near anchor.
    """
    if far_anchor == near_anchor:
        raise GeometryError("neck anchors must be distinct")
    near = near_anchor.as_array()
    if far_anchor.is_infinity:
        zq = float(np.sqrt(1.0 - near @ near))
        lam = 1.0 / (zq * np.exp(offset))
        return (
            Isometry.translation(near)
            @ Isometry.dilation(lam)
            @ Isometry.translation(-near)
        )
    far = far_anchor.as_array()
    gamma = Geodesic(near_anchor, far_anchor)  # positive direction toward the far anchor
    q = hemisphere_intersection(gamma)
    p_off = geodesic_point(gamma, q, offset)
    lam = (float(np.sum((p_off[:2] - far) ** 2)) + p_off[2] ** 2) / p_off[2]
    xi = far - near
    xihat = xi / np.linalg.norm(xi)
    householder = _IDENT2 - 2.0 * np.outer(xihat, xihat)
    shift = (near - far) / float((near - far) @ (near - far))
    return (
        Isometry.translation(near)
        @ Isometry.rotation(householder)
        @ Isometry.translation(-near)
        @ Isometry.translation(near)
        @ Isometry.dilation(lam)
        @ Isometry.translation(-shift)
        @ Isometry.inversion()
        @ Isometry.translation(-far)
    )


def neck_isometry_closed_form(far_anchor: BoundaryPoint, near_anchor: BoundaryPoint, offset: float, points) -> np.ndarray:
    """Direct one-shot evaluation of the neck-normalizing map (finite anchors).

    Independent of the generator-chain path; used to cross-check
    :func:`build_neck_isometry`.
    """
    far = far_anchor.as_array()
    near = near_anchor.as_array()
    gamma = Geodesic(near_anchor, far_anchor)
    q = hemisphere_intersection(gamma)
    p_off = geodesic_point(gamma, q, offset)
    lam = (float(np.sum((p_off[:2] - far) ** 2)) + p_off[2] ** 2) / p_off[2]

    p = np.asarray(points, dtype=float)
    rel = p.copy()
    rel[..., :2] -= far
    n2 = np.sum(rel * rel, axis=-1, keepdims=True)
    inv = rel / n2
    shift = (near - far) / float((near - far) @ (near - far))
    inv[..., :2] -= shift
    scaled = lam * inv
    scaled[..., :2] += near
    xi = far - near
    proj = (scaled[..., :2] - near) @ xi
    out = scaled.copy()
    out[..., :2] = scaled[..., :2] - (2.0 / (xi @ xi)) * proj[..., None] * xi
    return out
