"""Planar domains: membership tests, boundary distance, and the transform algebra.

Points are plain Python/NumPy complex numbers. Membership is strict: boundary
points count as outside, so first-exit detection triggers at the first strict
non-membership. Every domain used downstream is expected to contain the
origin; `validate` reports the first violated invariant by name, and
`require_valid` raises on it. Construction itself never raises, so invalid
parameter sets can be built and inspected.

The vectorized membership primitive works on separate x/y float arrays
(`_inside_xy`); the sampler's hot loop depends on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "Domain",
    "Disc",
    "VerticalStrip",
    "Rectangle",
    "SimplePolygon",
    "EllipticAnnulus",
    "Scaled",
    "Translated",
    "ReflectedY",
    "Intersection",
    "contains",
    "contains_many",
    "contains_xy",
    "boundary_distance_lower_bound",
    "validate",
    "require_valid",
    "domain_to_json",
    "domain_from_json",
]


def _finite_point(z: complex) -> bool:
    return math.isfinite(z.real) and math.isfinite(z.imag)


class Domain:
    """Base class; concrete variants are the frozen dataclasses below."""

    def _inside_xy(self, x, y):
        raise NotImplementedError

    def _inside(self, z: complex) -> bool:
        # Scalar fallback; variants with exact tie handling override this.
        return bool(self._inside_xy(np.float64(z.real), np.float64(z.imag)))

    def _bdist(self, z: complex) -> float:
        raise NotImplementedError

    def _validate(self) -> str | None:
        raise NotImplementedError


@dataclass(frozen=True)
class Disc(Domain):
    center: complex
    radius: float

    def _inside_xy(self, x, y):
        cx, cy = self.center.real, self.center.imag
        if cx == 0.0 and cy == 0.0:
            return x * x + y * y < self.radius * self.radius
        dx = x - cx
        dy = y - cy
        return dx * dx + dy * dy < self.radius * self.radius

    def _bdist(self, z):
        return self.radius - abs(z - self.center)

    def _validate(self):
        if not _finite_point(complex(self.center)):
            return "disc.center_not_finite"
        if not (self.radius > 0 and math.isfinite(self.radius)):
            return "disc.radius_not_positive"
        return None


@dataclass(frozen=True)
class VerticalStrip(Domain):
    x_lo: float
    x_hi: float

    def _inside_xy(self, x, y):
        return (x > self.x_lo) & (x < self.x_hi)

    def _bdist(self, z):
        return min(z.real - self.x_lo, self.x_hi - z.real)

    def _validate(self):
        if not (math.isfinite(self.x_lo) and math.isfinite(self.x_hi)):
            return "strip.bounds_not_finite"
        if not (self.x_lo < 0.0 < self.x_hi):
            return "strip.origin_not_between_walls"
        return None


@dataclass(frozen=True)
class Rectangle(Domain):
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def _inside_xy(self, x, y):
        return (x > self.x_lo) & (x < self.x_hi) & (y > self.y_lo) & (y < self.y_hi)

    def _bdist(self, z):
        return min(
            z.real - self.x_lo,
            self.x_hi - z.real,
            z.imag - self.y_lo,
            self.y_hi - z.imag,
        )

    def _validate(self):
        vals = (self.x_lo, self.x_hi, self.y_lo, self.y_hi)
        if not all(math.isfinite(v) for v in vals):
            return "rect.bounds_not_finite"
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            return "rect.degenerate"
        return None


def _orient(ax, ay, bx, by, cx, cy) -> int:
    """Exact sign of the cross product (b-a) x (c-a); floats are exact rationals."""
    v = (Fraction(bx) - Fraction(ax)) * (Fraction(cy) - Fraction(ay)) - (
        Fraction(by) - Fraction(ay)
    ) * (Fraction(cx) - Fraction(ax))
    return (v > 0) - (v < 0)


def _on_segment(px, py, ax, ay, bx, by) -> bool:
    """Exact test: p lies on the closed segment [a, b]."""
    if _orient(ax, ay, bx, by, px, py) != 0:
        return False
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Exact proper/improper intersection of two segments sharing no endpoint."""
    o1 = _orient(*p1, *p2, *q1)
    o2 = _orient(*p1, *p2, *q2)
    o3 = _orient(*q1, *q2, *p1)
    o4 = _orient(*q1, *q2, *p2)
    if o1 != o2 and o3 != o4:
        return True
    for p, a, b in ((q1, p1, p2), (q2, p1, p2), (p1, q1, q2), (p2, q1, q2)):
        if _on_segment(*p, *a, *b):
            return True
    return False


@dataclass(frozen=True)
class SimplePolygon(Domain):
    vertices: tuple  # tuple of complex, ordered, closed implicitly

    def _edges(self):
        v = self.vertices
        n = len(v)
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            yield (a.real, a.imag, b.real, b.imag)

    def _inside(self, z):
        # Even-odd ray casting with exact tie handling: boundary points
        # (including vertex hits) return False; crossing decisions use exact
        # rational arithmetic on the half-open edge rule.
        px, py = z.real, z.imag
        for (x1, y1, x2, y2) in self._edges():
            if _on_segment(px, py, x1, y1, x2, y2):
                return False
        fy, fx = Fraction(py), Fraction(px)
        inside = False
        for (x1, y1, x2, y2) in self._edges():
            if (y1 > py) != (y2 > py):
                t = (Fraction(x1) - fx) * (Fraction(y2) - Fraction(y1)) + (
                    fy - Fraction(y1)
                ) * (Fraction(x2) - Fraction(x1))
                if (t > 0) == (y2 > y1):
                    inside = not inside
        return inside

    def _inside_xy(self, x, y):
        # Vectorized float even-odd rule; agrees with the exact scalar rule
        # except within rounding distance of the boundary.
        inside = np.zeros(np.shape(x), dtype=bool)
        for (x1, y1, x2, y2) in self._edges():
            cond = (y1 > y) != (y2 > y)
            t = (x1 - x) * (y2 - y1) + (y - y1) * (x2 - x1)
            inside ^= cond & ((t > 0) == (y2 > y1))
        return inside

    def _bdist(self, z):
        px, py = z.real, z.imag
        best = math.inf
        for (x1, y1, x2, y2) in self._edges():
            ex, ey = x2 - x1, y2 - y1
            ll = ex * ex + ey * ey
            t = 0.0 if ll == 0.0 else ((px - x1) * ex + (py - y1) * ey) / ll
            t = min(1.0, max(0.0, t))
            best = min(best, math.hypot(px - (x1 + t * ex), py - (y1 + t * ey)))
        return best

    def _validate(self):
        v = self.vertices
        if len(v) < 3:
            return "polygon.too_few_vertices"
        if not all(_finite_point(complex(p)) for p in v):
            return "polygon.vertex_not_finite"
        n = len(v)
        segs = [
            ((v[i].real, v[i].imag), (v[(i + 1) % n].real, v[(i + 1) % n].imag))
            for i in range(n)
        ]
        for (a, b) in segs:
            if a == b:
                return "polygon.zero_length_edge"
        for i in range(n):
            for j in range(i + 1, n):
                adjacent = j == i + 1 or (i == 0 and j == n - 1)
                p1, p2 = segs[i]
                q1, q2 = segs[j]
                if adjacent:
                    # Shared endpoint allowed; the free endpoints must not sit
                    # on the other edge (collinear fold-back).
                    shared = {p1, p2} & {q1, q2}
                    for pt, (a, b) in (
                        (p1, (q1, q2)),
                        (p2, (q1, q2)),
                        (q1, (p1, p2)),
                        (q2, (p1, p2)),
                    ):
                        if pt not in shared and _on_segment(*pt, *a, *b):
                            return "polygon.self_intersection"
                elif _segments_cross(p1, p2, q1, q2):
                    return "polygon.self_intersection"
        return None


@dataclass(frozen=True)
class EllipticAnnulus(Domain):
    """Region between two confocal ellipses, shifted so the origin sits on the
    middle confocal ellipse of parameter gamma.

    The ellipse of parameter eta has semi-axes (c*cosh(eta), c*sinh(eta));
    all share foci, and the whole picture is shifted left by d = c*cosh(gamma).
    """

    c: float
    alpha: float
    gamma: float
    beta: float

    @property
    def shift(self) -> float:
        return self.c * math.cosh(self.gamma)

    def _quad_xy(self, x, y, eta):
        a = self.c * math.cosh(eta)
        b = self.c * math.sinh(eta)
        u = (x + self.shift) / a
        v = y / b
        return u * u + v * v

    def _inside_xy(self, x, y):
        return (self._quad_xy(x, y, self.beta) < 1.0) & (
            self._quad_xy(x, y, self.alpha) > 1.0
        )

    def _bdist(self, z):
        # The ellipse-normalized radius sqrt(quad) is (1/semi_minor)-Lipschitz,
        # so these are valid (non-tight) lower bounds on the true distance.
        x, y = z.real, z.imag
        b_out = self.c * math.sinh(self.beta)
        b_in = self.c * math.sinh(self.alpha)
        d_out = b_out * (1.0 - math.sqrt(self._quad_xy(x, y, self.beta)))
        d_in = b_in * (math.sqrt(self._quad_xy(x, y, self.alpha)) - 1.0)
        return max(0.0, min(d_out, d_in))

    def _validate(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            return "elliptic_annulus.c_not_positive"
        if not (0.0 < self.alpha < self.gamma < self.beta):
            return "elliptic_annulus.parameter_order"
        return None


@dataclass(frozen=True)
class Scaled(Domain):
    inner: Domain
    lam: float

    def _inside_xy(self, x, y):
        return self.inner._inside_xy(x / self.lam, y / self.lam)

    def _inside(self, z):
        return self.inner._inside(z / self.lam)

    def _bdist(self, z):
        return self.lam * self.inner._bdist(z / self.lam)

    def _validate(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            return "scaled.lambda_not_positive"
        return self.inner._validate()


@dataclass(frozen=True)
class Translated(Domain):
    inner: Domain
    shift: complex

    def _inside_xy(self, x, y):
        return self.inner._inside_xy(x - self.shift.real, y - self.shift.imag)

    def _inside(self, z):
        return self.inner._inside(z - self.shift)

    def _bdist(self, z):
        return self.inner._bdist(z - self.shift)

    def _validate(self):
        if not _finite_point(complex(self.shift)):
            return "translated.shift_not_finite"
        return self.inner._validate()


@dataclass(frozen=True)
class ReflectedY(Domain):
    inner: Domain

    def _inside_xy(self, x, y):
        return self.inner._inside_xy(-x, y)

    def _inside(self, z):
        return self.inner._inside(complex(-z.real, z.imag))

    def _bdist(self, z):
        return self.inner._bdist(complex(-z.real, z.imag))

    def _validate(self):
        return self.inner._validate()


@dataclass(frozen=True)
class Intersection(Domain):
    a: Domain
    b: Domain

    def _inside_xy(self, x, y):
        return self.a._inside_xy(x, y) & self.b._inside_xy(x, y)

    def _inside(self, z):
        return self.a._inside(z) and self.b._inside(z)

    def _bdist(self, z):
        return min(self.a._bdist(z), self.b._bdist(z))

    def _validate(self):
        return self.a._validate() or self.b._validate()


def contains(d: Domain, z: complex) -> bool:
    """Strict membership; boundary points are outside."""
    z = complex(z)
    if not _finite_point(z):
        raise ValueError("point coordinates must be finite")
    return d._inside(z)


def contains_xy(d: Domain, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized strict membership on coordinate arrays."""
    return d._inside_xy(x, y)


def contains_many(d: Domain, z: np.ndarray) -> np.ndarray:
    """Vectorized strict membership for a complex array of points."""
    z = np.asarray(z, dtype=complex)
    return d._inside_xy(z.real, z.imag)


def boundary_distance_lower_bound(d: Domain, z: complex) -> float:
    """A safe radius: the open disc of that radius about z lies inside d.

    Exact for Disc/VerticalStrip/Rectangle (and their scaled/translated/
    reflected images); a valid lower bound for the other variants.
    """
    z = complex(z)
    if not contains(d, z):
        raise ValueError("boundary_distance_lower_bound requires an interior point")
    return max(0.0, d._bdist(z))


def validate(d: Domain) -> str | None:
    """None when all invariants hold, else the first violated invariant name."""
    err = d._validate()
    if err is not None:
        return err
    if not d._inside(0j):
        return "origin_not_inside"
    return None


def require_valid(d: Domain) -> Domain:
    err = validate(d)
    if err is not None:
        raise ValueError(f"invalid domain: {err}")
    return d


# ---------------------------------------------------------------------------
# JSON (de)serialization
# ---------------------------------------------------------------------------

def _point_to_json(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


def _point_from_json(obj) -> complex:
    return complex(float(obj["re"]), float(obj["im"]))


def domain_to_json(d: Domain) -> dict:
    if isinstance(d, Disc):
        return {"type": "disc", "center": _point_to_json(d.center), "radius": d.radius}
    if isinstance(d, VerticalStrip):
        return {"type": "strip", "x_lo": d.x_lo, "x_hi": d.x_hi}
    if isinstance(d, Rectangle):
        return {
            "type": "rect",
            "x_lo": d.x_lo,
            "x_hi": d.x_hi,
            "y_lo": d.y_lo,
            "y_hi": d.y_hi,
        }
    if isinstance(d, SimplePolygon):
        return {"type": "polygon", "vertices": [_point_to_json(v) for v in d.vertices]}
    if isinstance(d, EllipticAnnulus):
        return {
            "type": "elliptic_annulus",
            "c": d.c,
            "alpha": d.alpha,
            "gamma": d.gamma,
            "beta": d.beta,
        }
    if isinstance(d, Scaled):
        return {"type": "scaled", "inner": domain_to_json(d.inner), "lambda": d.lam}
    if isinstance(d, Translated):
        return {
            "type": "translated",
            "inner": domain_to_json(d.inner),
            "shift": _point_to_json(d.shift),
        }
    if isinstance(d, ReflectedY):
        return {"type": "reflected_y", "inner": domain_to_json(d.inner)}
    if isinstance(d, Intersection):
        return {
            "type": "intersection",
            "a": domain_to_json(d.a),
            "b": domain_to_json(d.b),
        }
    raise TypeError(f"not a domain: {d!r}")


def domain_from_json(obj: dict) -> Domain:
    """Parse and validate a domain from its JSON object form."""
    kind = obj.get("type")
    if kind == "disc":
        d = Disc(_point_from_json(obj["center"]), float(obj["radius"]))
    elif kind == "strip":
        d = VerticalStrip(float(obj["x_lo"]), float(obj["x_hi"]))
    elif kind == "rect":
        d = Rectangle(
            float(obj["x_lo"]), float(obj["x_hi"]), float(obj["y_lo"]), float(obj["y_hi"])
        )
    elif kind == "polygon":
        d = SimplePolygon(tuple(_point_from_json(v) for v in obj["vertices"]))
    elif kind == "elliptic_annulus":
        d = EllipticAnnulus(
            float(obj["c"]), float(obj["alpha"]), float(obj["gamma"]), float(obj["beta"])
        )
    elif kind == "scaled":
        d = Scaled(domain_from_json(obj["inner"]), float(obj["lambda"]))
    elif kind == "translated":
        d = Translated(domain_from_json(obj["inner"]), _point_from_json(obj["shift"]))
    elif kind == "reflected_y":
        d = ReflectedY(domain_from_json(obj["inner"]))
    elif kind == "intersection":
        d = Intersection(domain_from_json(obj["a"]), domain_from_json(obj["b"]))
    else:
        raise ValueError(f"unknown domain type: {kind!r}")
    return require_valid(d)
