"""Hyperbolic plane primitives in the upper half-plane model.

Interior points are complex numbers with positive imaginary part.  Ideal
(boundary) points are real floats, with ``math.inf`` standing for the point
at infinity.  Matrices act by ``z -> (a z + b) / (c z + d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

PARABOLIC_TOL = 1e-9
DET_TOL = 1e-12

INF = math.inf

BoundaryPoint = float
Point = Union[complex, float]


class ClassificationError(ValueError):
    """Raised when an element has the wrong type for the requested operation."""


class GeometryError(ValueError):
    """Raised for degenerate configurations (intersecting carriers, boundary input)."""


def is_ideal(z) -> bool:
    if isinstance(z, complex):
        return z.imag == 0.0
    return True


def _norm_sign(a, b, c, d):
    tr = a + d
    if tr < 0 or (tr == 0 and (c < 0 or (c == 0 and a < 0))):
        return -a, -b, -c, -d
    return a, b, c, d


@dataclass(frozen=True)
class MobiusMap:
    """An element of PSL(2, R), stored with det 1 and nonnegative trace."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not math.isfinite(det) or det <= 0:
            raise ValueError(f"matrix must have positive determinant, got {det!r}")
        s = math.sqrt(det)
        vals = _norm_sign(self.a / s, self.b / s, self.c / s, self.d / s)
        for name, v in zip("abcd", vals):
            object.__setattr__(self, name, float(v))

    @classmethod
    def from_array(cls, m) -> "MobiusMap":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    @property
    def trace(self) -> float:
        return self.a + self.d

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap.from_array(self.as_array() @ other.as_array())

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def __call__(self, z):
        a, b, c, d = self.a, self.b, self.c, self.d
        if isinstance(z, complex) and z.imag != 0.0:
            return (a * z + b) / (c * z + d)
        if isinstance(z, complex):
            z = z.real
        if math.isinf(z):
            return INF if c == 0 else a / c
        den = c * z + d
        if den == 0:
            return INF
        return (a * z + b) / den

    def derivative_scale(self, z: complex) -> float:
        """|m'(z)| at an interior point."""
        return 1.0 / abs(self.c * z + self.d) ** 2

    def power(self, s: float) -> "MobiusMap":
        """Real power of a hyperbolic element (same axis, translation scaled by s)."""
        kind, length = classify(self)
        if kind != "hyperbolic":
            raise ClassificationError(f"real powers need a hyperbolic element, got {kind}")
        g = axis(self)
        m = standardizer(g)
        lam = math.exp(0.5 * s * length)
        return m.inverse() @ MobiusMap(lam, 0.0, 0.0, 1.0 / lam) @ m

    def distance_to(self, other: "MobiusMap") -> float:
        return float(np.max(np.abs(self.as_array() - other.as_array())))


@dataclass(frozen=True)
class Geodesic:
    """Oriented geodesic from ``start`` to ``end`` (both ideal points)."""

    start: float
    end: float

    def __post_init__(self):
        if self.start == self.end:
            raise GeometryError("geodesic endpoints must be distinct")

    def reversed(self) -> "Geodesic":
        return Geodesic(self.end, self.start)


@dataclass(frozen=True)
class IdealPoint:
    """Degenerate carrier: the fixed point of a parabolic element."""

    x: float


GeodesicOrPoint = Union[Geodesic, IdealPoint]


@dataclass(frozen=True)
class OrthoSegment:
    foot_a: Point
    foot_b: Point
    length: float


def classify(m: MobiusMap) -> tuple[str, float]:
    """Return ``(kind, translation_length)``; kind is one of
    hyperbolic, parabolic, elliptic, identity."""
    tr = abs(m.trace)
    if abs(tr - 2.0) < PARABOLIC_TOL:
        if max(abs(m.b), abs(m.c), abs(m.a - m.d)) < PARABOLIC_TOL:
            return "identity", 0.0
        return "parabolic", 0.0
    if tr > 2.0:
        return "hyperbolic", 2.0 * math.acosh(tr / 2.0)
    return "elliptic", 0.0


def translation_length(m: MobiusMap) -> float:
    return classify(m)[1]


def fixed_points(m: MobiusMap) -> list[float]:
    """Boundary fixed points (roots of c z^2 + (d - a) z - b)."""
    a, b, c, d = m.a, m.b, m.c, m.d
    if abs(c) < 1e-300:
        if abs(d - a) < 1e-300:
            return [INF]
        return [b / (d - a), INF]
    disc = (a - d) ** 2 + 4.0 * b * c
    disc = max(disc, 0.0)
    r = math.sqrt(disc)
    # stable quadratic roots
    num = (a - d) + math.copysign(r, a - d) if (a - d) != 0 else r
    z1 = num / (2.0 * c)
    z2 = (-2.0 * b) / num if num != 0 else z1
    return [z1, z2]


def axis(m: MobiusMap) -> GeodesicOrPoint:
    """Translation axis (oriented repelling -> attracting) or parabolic fixed point."""
    kind, _ = classify(m)
    if kind in ("elliptic", "identity"):
        raise ClassificationError(f"{kind} element has no axis")
    if kind == "parabolic":
        a, b, c, d = m.a, m.b, m.c, m.d
        if abs(c) < 1e-12 * max(1.0, abs(b)):
            return IdealPoint(INF)
        return IdealPoint((a - d) / (2.0 * c))
    pts = fixed_points(m)
    # attracting fixed point has |m'(x)| < 1
    def deriv(x):
        if math.isinf(x):
            # derivative at infinity in the chart w = -1/z is (c x + d)^2 -> use d^2 / 1
            return m.d ** 2 if m.c == 0 else INF
        return 1.0 / (m.c * x + m.d) ** 2

    x1, x2 = pts
    if deriv(x1) < deriv(x2):
        return Geodesic(x2, x1)
    return Geodesic(x1, x2)


def standardizer(g: Geodesic) -> MobiusMap:
    """Isometry sending g.start -> 0 and g.end -> infinity."""
    e1, e2 = g.start, g.end
    if math.isinf(e2):
        return MobiusMap(1.0, -e1, 0.0, 1.0)
    if math.isinf(e1):
        return MobiusMap(0.0, -1.0, 1.0, -e2)
    det = e1 - e2
    if det > 0:
        return MobiusMap(1.0, -e1, 1.0, -e2)
    return MobiusMap(-1.0, e1, 1.0, -e2)


def position_on(g: Geodesic, z: complex) -> float:
    """Signed arclength coordinate of an interior point of g, increasing toward g.end."""
    w = standardizer(g)(z)
    return math.log(abs(w))


def point_on(g: Geodesic, s: float) -> complex:
    return standardizer(g).inverse()(1j * math.exp(s))


def distance(p: complex, q: complex) -> float:
    """Hyperbolic distance between interior points."""
    p, q = complex(p), complex(q)
    if p.imag <= 0 or q.imag <= 0:
        raise GeometryError("distance needs interior points")
    num = abs(p - q)
    return 2.0 * math.asinh(num / (2.0 * math.sqrt(p.imag * q.imag)))


def _close(x: float, y: float, tol: float = 1e-12) -> bool:
    if math.isinf(x) or math.isinf(y):
        return x == y
    return abs(x - y) <= tol * max(1.0, abs(x), abs(y))


def orthogeodesic(a: GeodesicOrPoint, b: GeodesicOrPoint) -> OrthoSegment:
    """Common perpendicular of two disjoint carriers.

    When one carrier is an ideal point the segment is the geodesic ray from that
    point meeting the other carrier orthogonally; its length is reported as inf.
    """
    if isinstance(a, IdealPoint) and isinstance(b, IdealPoint):
        raise GeometryError("orthogeodesic between two ideal points is undefined")
    if isinstance(a, IdealPoint):
        seg = orthogeodesic(b, a)
        return OrthoSegment(seg.foot_b, seg.foot_a, seg.length)
    m = standardizer(a)
    minv = m.inverse()
    if isinstance(b, IdealPoint):
        x = m(b.x)
        if math.isinf(x) or abs(x) < 1e-14:
            raise GeometryError("ideal point is an endpoint of the geodesic")
        foot = minv(1j * abs(x))
        return OrthoSegment(foot, b.x, INF)
    for e in (b.start, b.end):
        if _close(e, a.start) or _close(e, a.end):
            raise GeometryError("carriers share an endpoint")
    p, q = m(b.start), m(b.end)
    if math.isinf(p) or math.isinf(q) or p * q <= 0:
        raise GeometryError("carriers intersect")
    R = math.sqrt(p * q)
    mid = 0.5 * (p + q)
    x = p * q / mid
    y = math.sqrt(max(R * R - x * x, 0.0))
    fa = 1j * R
    fb = complex(x, y)
    length = distance(fa, fb)
    return OrthoSegment(minv(fa), minv(fb), length)


def rotation_about_i(phi: float) -> MobiusMap:
    """Elliptic element fixing i, rotating tangent vectors counterclockwise by phi."""
    c, s = math.cos(0.5 * phi), math.sin(0.5 * phi)
    # det = c^2 + s^2 = 1; trace may be negative for |phi| > pi so build raw
    return MobiusMap(c, s, -s, c) if c >= 0 else MobiusMap(-c, -s, s, -c)


def ray_endpoint_from_i(q) -> float:
    """Ideal endpoint of the geodesic ray from i through q."""
    if is_ideal(q):
        return float(q.real) if isinstance(q, complex) else q
    x, y = q.real, q.imag
    if abs(x) < 1e-300:
        return INF if y > 1.0 else 0.0
    c = (x * x + y * y - 1.0) / (2.0 * x)
    r = math.sqrt(1.0 + c * c)
    return c + r if x > 0 else c - r


def frame(p: complex, q) -> MobiusMap:
    """Isometry g with g(i) = p whose upward ray from i goes through q."""
    g1 = MobiusMap(p.imag, p.real, 0.0, 1.0)  # i -> p
    qq = g1.inverse()(q)
    e = ray_endpoint_from_i(qq)
    if math.isinf(e):
        return g1
    # rotation about i mapping infinity to e: cot(phi/2)... solve -cot(phi/2) = e
    phi = 2.0 * math.atan2(-1.0, e)
    return g1 @ rotation_about_i(phi)


def to_disk(z: complex) -> complex:
    """Cayley map from the upper half-plane to the unit disk (i -> 0)."""
    if isinstance(z, float) and math.isinf(z):
        return 1.0 + 0j
    z = complex(z)
    return (z - 1j) / (z + 1j)


def from_disk(w: complex) -> complex:
    w = complex(w)
    if w == 1:
        return INF
    return 1j * (1 + w) / (1 - w)


def to_klein(z) -> complex:
    """Klein (projective) disk model coordinates of a point of H^2 or its boundary."""
    if not isinstance(z, complex) and not math.isinf(z):
        z = complex(z)
    w = to_disk(z)
    return 2 * w / (1 + abs(w) ** 2)


def from_klein(k: complex) -> complex:
    r2 = abs(k) ** 2
    if r2 >= 1.0:
        return from_disk(k / math.sqrt(r2)) if r2 > 0 else 1j
    w = k / (1 + math.sqrt(1 - r2))
    return from_disk(w)


def mobius_from_points(z: tuple, w: tuple) -> MobiusMap:
    """Orientation-preserving isometry mapping frame (z0 -> z1) to (w0 -> w1)."""
    return frame(*w) @ frame(*z).inverse()


def angle_at(p: complex, q, r) -> float:
    """Interior angle at p between the geodesics toward q and r (in [0, pi])."""
    g = frame(p, q).inverse()
    rr = g(r)
    e = ray_endpoint_from_i(rr)
    if math.isinf(e):
        return 0.0
    # direction angle measured from upward vertical
    phi = 2.0 * math.atan2(1.0, -e)
    phi = math.remainder(phi, 2 * math.pi)
    return abs(phi)


__all__ = [
    "MobiusMap",
    "Geodesic",
    "IdealPoint",
    "OrthoSegment",
    "ClassificationError",
    "GeometryError",
    "classify",
    "translation_length",
    "fixed_points",
    "axis",
    "orthogeodesic",
    "distance",
    "standardizer",
    "position_on",
    "point_on",
    "frame",
    "rotation_about_i",
    "to_disk",
    "from_disk",
    "to_klein",
    "from_klein",
]
