"""Pure geometric kernel for multipath path lengths.

Three deterministic mechanisms are covered: straight transmission segments
(Euclidean distance), single specular reflections via the virtual-source
construction, and single diffraction at a finite horizontal edge where the
stationary point on the edge is solved in closed form from the quadratic
that encodes Fermat's principle.

All edge formulas operate in the edge-local frame in which the edge lies on
the line {y = 0, z = z_e}; a rigid transform adapter generalizes them to
arbitrarily placed world edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "Point3",
    "RigidTransform",
    "WindowEdge",
    "ReflectorPlane",
    "DiffractionSolution",
    "ReflectionSolution",
    "euclidean_distance",
    "reflect_point",
    "reflection_path_length",
    "diffraction_point",
    "exact_diffraction_path_length",
    "approx_diffraction_solution",
    "approx_diffraction_path_length",
]

# Relative tolerance below which the stationarity quadratic is treated as
# degenerate and the 1D numerical fallback takes over.
_DEGENERATE_QUADRATIC_RTOL = 1e-12

# Slack when testing whether a root lies in [0, 1]; absorbs roundoff for
# stationary points essentially at an edge endpoint.
_ROOT_INTERVAL_SLACK = 1e-9


class GeometryError(ValueError):
    """Raised for geometric configurations that admit no valid solution."""


def _vec(p) -> np.ndarray:
    """Coerce a Point3, sequence, or array to a float (3,) array."""
    if isinstance(p, Point3):
        return p.as_array()
    v = np.asarray(p, dtype=float)
    if v.shape != (3,):
        raise GeometryError(f"expected a 3-vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Point3:
    """A 3D position in meters. All coordinates must be finite."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise GeometryError(f"non-finite coordinates: {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Point3":
        a = np.asarray(a, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class RigidTransform:
    """Rigid map from world to local coordinates: local = R @ world + t.

    The rotation must be orthonormal with determinant +1 (within 1e-12).
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-12):
            raise GeometryError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise GeometryError("rotation has negative determinant (reflection)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def translation_only(cls, t) -> "RigidTransform":
        return cls(np.eye(3), np.asarray(t, dtype=float))

    def to_local(self, p) -> np.ndarray:
        return self.rotation @ _vec(p) + self.translation

    def to_world(self, p) -> np.ndarray:
        return self.rotation.T @ (_vec(p) - self.translation)


@dataclass(frozen=True)
class WindowEdge:
    """A horizontal diffracting edge with the vertical window extent ``w``.

    In the edge-local frame the edge spans the segment from (x1, 0, z_e) to
    (x2, 0, z_e); ``frame`` maps world coordinates into that frame.
    """

    x1: float
    x2: float
    z_e: float
    w: float
    frame: RigidTransform = field(default_factory=RigidTransform.identity)

    def __post_init__(self) -> None:
        if self.x1 == self.x2:
            raise GeometryError("edge endpoints coincide (x1 == x2)")
        if not self.w > 0:
            raise GeometryError("window height w must be positive")

    def endpoints_world(self) -> tuple[np.ndarray, np.ndarray]:
        p1 = self.frame.to_world([self.x1, 0.0, self.z_e])
        p2 = self.frame.to_world([self.x2, 0.0, self.z_e])
        return p1, p2

    def point_at(self, lam: float) -> np.ndarray:
        """World point of the convex combination lam*X1 + (1-lam)*X2."""
        qx = self.x2 + lam * (self.x1 - self.x2)
        return self.frame.to_world([qx, 0.0, self.z_e])


@dataclass(frozen=True)
class ReflectorPlane:
    """Plane {x : n.x = offset} with unit normal, optionally bounded by a facet.

    ``facet`` is an (N, 3) polygon whose vertices lie in the plane; when
    present, a specular point outside the polygon invalidates the reflection.
    """

    normal: np.ndarray
    offset: float
    facet: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise GeometryError("plane normal must be unit length")
        object.__setattr__(self, "normal", n)
        if self.facet is not None:
            f = np.asarray(self.facet, dtype=float)
            if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 3:
                raise GeometryError("facet must be an (N>=3, 3) polygon")
            object.__setattr__(self, "facet", f)

    def signed_distance(self, p) -> float:
        return float(self.normal @ _vec(p) - self.offset)


@dataclass(frozen=True)
class DiffractionSolution:
    """Stationary point on an edge and the resulting two-leg path length.

    ``lam`` parameterizes q = lam*X1 + (1-lam)*X2 in the edge-local frame;
    ``endpoint`` is True when the stationary point fell outside the edge and
    was clamped to the nearer endpoint (corner diffraction).
    """

    lam: float
    q: Point3
    path_length: float
    endpoint: bool = False


@dataclass(frozen=True)
class ReflectionSolution:
    """Unfolded reflection length, the specular point, and facet validity."""

    length: float
    specular_point: Point3
    valid: bool


def euclidean_distance(a, b) -> float:
    """Straight-line distance |a - b| in meters."""
    return float(np.linalg.norm(_vec(a) - _vec(b)))


def reflect_point(p, plane: ReflectorPlane) -> Point3:
    """Mirror image of p across the plane (the virtual-source construction)."""
    v = _vec(p)
    return Point3.from_array(v - 2.0 * plane.signed_distance(v) * plane.normal)


def _point_in_polygon_2d(pt: np.ndarray, poly: np.ndarray) -> bool:
    """Even-odd rule containment test in 2D; boundary points count as inside."""
    x, y = pt
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        # On-edge check via collinearity within the segment's bounding box.
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if abs(cross) < 1e-12 and min(x1, x2) - 1e-12 <= x <= max(x1, x2) + 1e-12 \
                and min(y1, y2) - 1e-12 <= y <= max(y1, y2) + 1e-12:
            return True
        if (y1 > y) != (y2 > y):
            x_cross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x_cross > x:
                inside = not inside
    return inside


def _plane_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hint = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(hint, normal)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return u, v


def reflection_path_length(tx, rx, plane: ReflectorPlane) -> ReflectionSolution:
    """Specular reflection path length via the mirrored transmitter.

    Both endpoints must lie strictly on the same side of the plane. The
    returned length equals |reflect(tx) - rx|; ``valid`` is False when the
    plane carries a bounded facet and the specular point misses it.
    """
    t = _vec(tx)
    r = _vec(rx)
    dt = plane.signed_distance(t)
    dr = plane.signed_distance(r)
    if dt == 0.0 or dr == 0.0 or (dt > 0) != (dr > 0):
        raise GeometryError("tx and rx must lie strictly on the same side of the plane")

    image = _vec(reflect_point(t, plane))
    direction = r - image
    length = float(np.linalg.norm(direction))
    # The segment image->rx crosses the plane at parameter dt/(dt+dr); both
    # signed distances share a sign, so the denominator never vanishes.
    s = dt / (dt + dr)
    specular = image + s * direction

    valid = True
    if plane.facet is not None:
        u, v = _plane_basis(plane.normal)
        poly2 = np.column_stack((plane.facet @ u, plane.facet @ v))
        valid = _point_in_polygon_2d(np.array([specular @ u, specular @ v]), poly2)
    return ReflectionSolution(length, Point3.from_array(specular), valid)


# ---------------------------------------------------------------------------
# Edge diffraction
# ---------------------------------------------------------------------------

def _two_leg_length(t: np.ndarray, r: np.ndarray, z_e: float, qx: float) -> float:
    """Sum of the two legs through (qx, 0, z_e), in edge-local coordinates."""
    leg_t = math.sqrt((t[0] - qx) ** 2 + t[1] ** 2 + (t[2] - z_e) ** 2)
    leg_r = math.sqrt((r[0] - qx) ** 2 + r[1] ** 2 + (z_e - r[2]) ** 2)
    return leg_t + leg_r


def _stationarity_quadratic(
    t: np.ndarray, r: np.ndarray, x1: float, x2: float, z_e: float
) -> tuple[float, float, float]:
    """Coefficients (a, b, c) of the quadratic in lam whose roots contain the
    stationary point of the two-leg length along the edge.

    Derived by squaring the balance condition between the two legs'
    transverse distances; squaring may introduce one spurious root, which the
    caller rejects by length comparison.
    """
    xa, ya, za = t
    xn, yn, zn = r
    at2 = (z_e - za) ** 2 + ya ** 2  # squared transverse distance, tx leg
    rt2 = (z_e - zn) ** 2 + yn ** 2  # squared transverse distance, rx leg
    a = (x1 - x2) ** 2 * (rt2 - at2)
    b = 2.0 * (x1 - x2) * ((x2 - xa) * rt2 - (x2 - xn) * at2)
    c = (x2 - xa) ** 2 * rt2 - (x2 - xn) ** 2 * at2
    return a, b, c


def _golden_section_min(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    """Golden-section minimizer for a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _newton_polish(
    t: np.ndarray, r: np.ndarray, z_e: float, x1: float, x2: float, lam: float
) -> float:
    """Refine an interior stationary point with Newton steps on dp/dq.

    The quadratic route resolves a near-double root only to ~sqrt(eps); the
    two-leg length is convex in q with a simple root of its derivative, so a
    few Newton steps recover full precision.
    """
    span = x1 - x2
    q = x2 + lam * span
    for _ in range(3):
        l1 = math.sqrt((t[0] - q) ** 2 + t[1] ** 2 + (t[2] - z_e) ** 2)
        l2 = math.sqrt((r[0] - q) ** 2 + r[1] ** 2 + (z_e - r[2]) ** 2)
        if l1 == 0.0 or l2 == 0.0:
            break
        grad = (q - t[0]) / l1 + (q - r[0]) / l2
        curv = (t[1] ** 2 + (t[2] - z_e) ** 2) / l1 ** 3 \
            + (r[1] ** 2 + (z_e - r[2]) ** 2) / l2 ** 3
        if curv <= 0.0:
            break
        step = grad / curv
        q -= step
        if abs(step) < 1e-14 * max(1.0, abs(q)):
            break
    lam = (q - x2) / span
    return min(max(lam, 0.0), 1.0)


def _solve_edge_lambda(
    t: np.ndarray, r: np.ndarray, x1: float, x2: float, z_e: float
) -> tuple[float, bool]:
    """Minimizing lam in [0, 1] for the two-leg length, plus an endpoint flag.

    Closed-form roots of the stationarity quadratic are preferred; degenerate
    or numerically inconsistent quadratics fall back to golden-section search.
    The two-leg length is convex in lam, so when no stationary point lies in
    [0, 1] the constrained minimum sits at the endpoint of smaller length.
    """

    def length_at(lam: float) -> float:
        return _two_leg_length(t, r, z_e, x2 + lam * (x1 - x2))

    def fallback() -> tuple[float, bool]:
        lam = _golden_section_min(length_at, 0.0, 1.0)
        at_end = lam < 1e-9 or lam > 1.0 - 1e-9
        if at_end:
            return float(round(lam)), True
        return _newton_polish(t, r, z_e, x1, x2, lam), False

    a, b, c = _stationarity_quadratic(t, r, x1, x2, z_e)
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0.0 or abs(a) < _DEGENERATE_QUADRATIC_RTOL * scale:
        return fallback()

    disc = b * b - 4.0 * a * c
    disc_scale = max(b * b, abs(4.0 * a * c))
    if disc < 0.0:
        if abs(disc) > 1e-9 * disc_scale:
            return fallback()
        # Roundoff-negative discriminant of an exact double root.
        disc = 0.0

    sq = math.sqrt(disc)
    # Stable quadratic formula: avoids cancellation when b*b >> |4ac|.
    if b >= 0.0:
        qf = -0.5 * (b + sq)
    else:
        qf = -0.5 * (b - sq)
    roots = (qf / a, c / qf) if qf != 0.0 else (0.0, 0.0)
    # Squaring introduces a spurious root lying outside the horizontal
    # interval spanned by tx and rx; a genuine stationary point of the
    # two-leg length sits between them.
    between_slack = 1e-9 * max(1.0, (t[0] - r[0]) ** 2)

    def is_stationary(lam: float) -> bool:
        q = x2 + lam * (x1 - x2)
        return (q - t[0]) * (q - r[0]) <= between_slack

    inside = [min(max(root, 0.0), 1.0) for root in roots
              if -_ROOT_INTERVAL_SLACK <= root <= 1.0 + _ROOT_INTERVAL_SLACK
              and is_stationary(root)]
    if inside:
        lam = min(inside, key=length_at)
        return _newton_polish(t, r, z_e, x1, x2, lam), False
    # No stationary point on the edge: corner diffraction at the endpoint of
    # minimal length (the two-leg length is convex along the edge).
    lam = min((0.0, 1.0), key=length_at)
    return lam, True


def diffraction_point(tx, rx, edge: WindowEdge) -> DiffractionSolution:
    """Stationary diffraction point on the edge and the exact path length.

    Inputs are transformed into the edge-local frame, the stationarity
    quadratic is solved for lam, the in-[0,1] root of minimal two-leg length
    is kept, and out-of-range stationary points are clamped to the nearer
    endpoint (flagged via ``endpoint``).
    """
    t = edge.frame.to_local(_vec(tx))
    r = edge.frame.to_local(_vec(rx))
    on_edge_line = (
        abs(t[1]) < 1e-12 and abs(t[2] - edge.z_e) < 1e-12
        and abs(r[1]) < 1e-12 and abs(r[2] - edge.z_e) < 1e-12
    )
    if on_edge_line:
        raise GeometryError("tx and rx both lie on the edge line; diffraction undefined")

    lam, endpoint = _solve_edge_lambda(t, r, edge.x1, edge.x2, edge.z_e)
    qx = edge.x2 + lam * (edge.x1 - edge.x2)
    length = _two_leg_length(t, r, edge.z_e, qx)
    q_world = edge.frame.to_world([qx, 0.0, edge.z_e])
    return DiffractionSolution(lam, Point3.from_array(q_world), length, endpoint)


def exact_diffraction_path_length(tx, rx, edge: WindowEdge) -> float:
    """Exact two-leg diffraction path length through the solved edge point."""
    return diffraction_point(tx, rx, edge).path_length


def approx_diffraction_solution(tx, rx, edge: WindowEdge, w: float | None = None) -> DiffractionSolution:
    """Diffraction solution under the window-height approximation.

    The edge height is replaced by z_n + w/2, where z_n is the receiver
    height in the edge-local frame: the receiver is assumed half a window
    height below the active edge. The stored ``edge.z_e`` is ignored. This is
    the measurement model p_j(alpha) used by the position estimators.
    """
    if w is None:
        w = edge.w
    if w < 0:
        raise GeometryError("window height must be non-negative")
    t = edge.frame.to_local(_vec(tx))
    r = edge.frame.to_local(_vec(rx))
    z_e = r[2] + 0.5 * w
    lam, endpoint = _solve_edge_lambda(t, r, edge.x1, edge.x2, z_e)
    qx = edge.x2 + lam * (edge.x1 - edge.x2)
    length = _two_leg_length(t, r, z_e, qx)
    q_world = edge.frame.to_world([qx, 0.0, z_e])
    return DiffractionSolution(lam, Point3.from_array(q_world), length, endpoint)


def approx_diffraction_path_length(tx, rx, edge: WindowEdge, w: float | None = None) -> float:
    """Path length of the window-height-approximation diffraction model."""
    return approx_diffraction_solution(tx, rx, edge, w).path_length
