"""Geometric kernel tests.

Closed-form results are checked against independent oracles: high-precision
norms, a brute-force Fermat search over reflector planes, and golden-section
minimization of the two-leg length along diffracting edges.
"""

import math

import numpy as np
import pytest

from diffpos.geometry import (
    DiffractionSolution,
    GeometryError,
    Point3,
    ReflectorPlane,
    RigidTransform,
    WindowEdge,
    approx_diffraction_path_length,
    diffraction_point,
    euclidean_distance,
    exact_diffraction_path_length,
    reflect_point,
    reflection_path_length,
)

RNG = np.random.default_rng(20260808)


# ---------------------------------------------------------------------------
# Oracles (independent of the implementation under test)
# ---------------------------------------------------------------------------

def oracle_norm(a, b) -> float:
    """Euclidean distance in extended precision."""
    d = np.asarray(a, dtype=np.longdouble) - np.asarray(b, dtype=np.longdouble)
    return float(np.sqrt(np.sum(d * d)))


def oracle_two_leg(tx, rx, point) -> float:
    return oracle_norm(tx, point) + oracle_norm(point, rx)


def oracle_edge_length(tx, rx, edge: WindowEdge, z_e=None, n_golden=200) -> float:
    """Golden-section minimization of the two-leg length over lam in [0, 1]."""
    if z_e is None:
        z_e = edge.z_e
    t = edge.frame.to_local(np.asarray(tx, dtype=float))
    r = edge.frame.to_local(np.asarray(rx, dtype=float))

    def length(lam):
        qx = edge.x2 + lam * (edge.x1 - edge.x2)
        q = np.array([qx, 0.0, z_e])
        return math.dist(t, q) + math.dist(q, r)

    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = length(c), length(d)
    for _ in range(n_golden):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = length(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = length(d)
    lam = 0.5 * (a + b)
    return min(length(lam), length(0.0), length(1.0))


def random_edge(rng) -> WindowEdge:
    x1 = rng.uniform(-10, 0)
    x2 = rng.uniform(0.5, 10)
    z_e = rng.uniform(-5, 15)
    w = rng.uniform(0.2, 3.0)
    return WindowEdge(x1, x2, z_e, w)


def random_side_points(rng) -> tuple[np.ndarray, np.ndarray]:
    """tx above the edge plane on one side, rx on the other, generic heights."""
    tx = np.array([rng.uniform(-15, 15), rng.uniform(1, 30), rng.uniform(-10, 25)])
    rx = np.array([rng.uniform(-15, 15), rng.uniform(-30, -1), rng.uniform(-10, 25)])
    return tx, rx


def random_rotation(rng) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------------------
# Euclidean distance
# ---------------------------------------------------------------------------

def test_euclidean_pythagorean_triple():
    assert euclidean_distance((0, 0, 0), (3, 4, 0)) == 5.0


def test_euclidean_identity():
    assert euclidean_distance((1, 2, 3), (1, 2, 3)) == 0.0


def test_euclidean_random_vs_high_precision():
    for _ in range(200):
        a = RNG.uniform(-100, 100, 3)
        b = RNG.uniform(-100, 100, 3)
        expect = oracle_norm(a, b)
        got = euclidean_distance(a, b)
        assert abs(got - expect) <= 1e-12 * max(expect, 1.0)
        assert got == euclidean_distance(b, a)


def test_point3_rejects_non_finite():
    with pytest.raises(GeometryError):
        Point3(0.0, math.nan, 0.0)


# ---------------------------------------------------------------------------
# Reflection
# ---------------------------------------------------------------------------

PLANE_Y0 = ReflectorPlane(normal=np.array([0.0, 1.0, 0.0]), offset=0.0)


def test_reflect_axis_aligned_mirror():
    p = reflect_point((0, 5, 0), PLANE_Y0)
    np.testing.assert_allclose(p.as_array(), [0, -5, 0], atol=1e-15)


def test_reflect_fixed_point_on_plane():
    p = reflect_point((2.0, 0.0, -3.0), PLANE_Y0)
    np.testing.assert_allclose(p.as_array(), [2, 0, -3], atol=1e-15)


def test_reflect_involution_random():
    for _ in range(200):
        n = RNG.standard_normal(3)
        n /= np.linalg.norm(n)
        plane = ReflectorPlane(normal=n, offset=RNG.uniform(-5, 5))
        p = RNG.uniform(-20, 20, 3)
        twice = reflect_point(reflect_point(p, plane), plane)
        np.testing.assert_allclose(twice.as_array(), p, atol=1e-12)


def test_reflection_path_collinear_image_case():
    sol = reflection_path_length((0, 5, 0), (0, 3, 0), PLANE_Y0)
    assert sol.length == pytest.approx(8.0, abs=1e-12)
    np.testing.assert_allclose(sol.specular_point.as_array(), [0, 0, 0], atol=1e-12)
    assert sol.valid


def test_reflection_path_retroreflection():
    sol = reflection_path_length((0, 1, 0), (0, 1, 0), PLANE_Y0)
    assert sol.length == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(sol.specular_point.as_array(), [0, 0, 0], atol=1e-12)


def test_reflection_rejects_opposite_sides():
    with pytest.raises(GeometryError):
        reflection_path_length((0, 5, 0), (0, -3, 0), PLANE_Y0)
    with pytest.raises(GeometryError):
        reflection_path_length((0, 0, 0), (0, 3, 0), PLANE_Y0)


def test_reflection_is_fermat_minimum_over_plane_points():
    # Grid + local refinement oracle: the unfolded length must equal the
    # minimum over sampled plane points of the two-leg length.
    for _ in range(25):
        n = RNG.standard_normal(3)
        n /= np.linalg.norm(n)
        offset = RNG.uniform(-2, 2)
        plane = ReflectorPlane(normal=n, offset=offset)
        # Points strictly on the same side.
        u = np.cross(n, [1.0, 0.3, -0.2])
        u /= np.linalg.norm(u)
        v = np.cross(n, u)
        origin = offset * n
        tx = origin + RNG.uniform(0.5, 6) * n + RNG.uniform(-4, 4) * u + RNG.uniform(-4, 4) * v
        rx = origin + RNG.uniform(0.5, 6) * n + RNG.uniform(-4, 4) * u + RNG.uniform(-4, 4) * v

        sol = reflection_path_length(tx, rx, plane)

        # Coarse grid, then two rounds of refinement around the best cell.
        best, half, center = None, 12.0, origin
        for _ in range(12):
            grid = np.linspace(-half, half, 41)
            pts = center + grid[:, None, None] * u + grid[None, :, None] * v
            lengths = (
                np.linalg.norm(pts - tx, axis=2) + np.linalg.norm(pts - rx, axis=2)
            )
            i, j = np.unravel_index(np.argmin(lengths), lengths.shape)
            best = lengths[i, j]
            center = pts[i, j]
            half /= 8.0
        assert sol.length <= best + 1e-9
        assert abs(sol.length - best) <= 1e-6 * sol.length


def test_reflection_bounded_facet_validity():
    facet = np.array([[-1.0, 0.0, -1.0], [1.0, 0.0, -1.0], [1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]])
    plane = ReflectorPlane(normal=np.array([0.0, 1.0, 0.0]), offset=0.0, facet=facet)
    hit = reflection_path_length((0, 2, 0), (0, 2, 0.5), plane)
    assert hit.valid
    miss = reflection_path_length((10, 2, 0), (10, 2, 0.5), plane)
    assert not miss.valid


# ---------------------------------------------------------------------------
# Diffraction point and exact path length
# ---------------------------------------------------------------------------

def test_diffraction_mirror_symmetric_case():
    edge = WindowEdge(x1=-5.0, x2=5.0, z_e=10.0, w=1.0)
    sol = diffraction_point((0, 20, 10), (0, -4, 10), edge)
    assert sol.q.x == pytest.approx(0.0, abs=1e-9)
    assert sol.path_length == pytest.approx(24.0, rel=1e-12)
    assert not sol.endpoint


def test_diffraction_common_abscissa_is_stationary():
    edge = WindowEdge(x1=-5.0, x2=5.0, z_e=3.0, w=1.0)
    for qstar in (-3.0, 0.7, 4.2):
        sol = diffraction_point((qstar, 8.0, 3.0), (qstar, -2.0, 3.0), edge)
        assert sol.q.x == pytest.approx(qstar, abs=1e-9)


def test_diffraction_rejects_both_points_on_edge_line():
    edge = WindowEdge(x1=-5.0, x2=5.0, z_e=2.0, w=1.0)
    with pytest.raises(GeometryError):
        diffraction_point((-1.0, 0.0, 2.0), (3.0, 0.0, 2.0), edge)


def test_diffraction_random_vs_golden_section_oracle():
    for _ in range(1000):
        edge = random_edge(RNG)
        tx, rx = random_side_points(RNG)
        sol = diffraction_point(tx, rx, edge)
        expect = oracle_edge_length(tx, rx, edge)
        assert abs(sol.path_length - expect) <= 1e-9 * expect


def test_diffraction_fermat_stationarity_interior():
    # Central finite difference of the two-leg length in lam vanishes at the
    # returned interior solution.
    checked = 0
    for _ in range(400):
        edge = random_edge(RNG)
        tx, rx = random_side_points(RNG)
        sol = diffraction_point(tx, rx, edge)
        if sol.endpoint or not 1e-4 < sol.lam < 1 - 1e-4:
            continue
        h = 1e-6

        def length(lam):
            return oracle_two_leg(tx, rx, edge.point_at(lam))

        deriv = (length(sol.lam + h) - length(sol.lam - h)) / (2 * h)
        # Normalize by the edge span so the tolerance is scale-free.
        assert abs(deriv) / abs(edge.x1 - edge.x2) < 1e-8 * max(1.0, sol.path_length)
        checked += 1
    assert checked > 100


def test_diffraction_minimality_against_sampled_lambdas():
    for _ in range(300):
        edge = random_edge(RNG)
        tx, rx = random_side_points(RNG)
        sol = diffraction_point(tx, rx, edge)
        lams = np.linspace(0.0, 1.0, 199)
        sampled = min(oracle_two_leg(tx, rx, edge.point_at(l)) for l in lams)
        assert sol.path_length <= sampled + 1e-9


def test_diffraction_lower_bound_euclidean():
    for _ in range(300):
        edge = random_edge(RNG)
        tx, rx = random_side_points(RNG)
        p = exact_diffraction_path_length(tx, rx, edge)
        assert p >= euclidean_distance(tx, rx) - 1e-12


def test_diffraction_tx_equals_rx():
    edge = WindowEdge(x1=-5.0, x2=5.0, z_e=4.0, w=1.0)
    p = np.array([1.0, 3.0, 1.0])
    got = exact_diffraction_path_length(p, p, edge)
    # Legs coincide: twice the distance to the nearest edge point.
    nearest = 2.0 * math.sqrt(3.0 ** 2 + 3.0 ** 2)
    assert got == pytest.approx(nearest, rel=1e-12)


def test_diffraction_endpoint_clamping():
    # Both stationary points beyond x2: clamp and flag.
    edge = WindowEdge(x1=-1.0, x2=1.0, z_e=0.0, w=1.0)
    sol = diffraction_point((8.0, 1.0, 0.0), (8.0, -1.0, 0.0), edge)
    assert sol.endpoint
    assert sol.lam in (0.0, 1.0)
    assert sol.q.x == pytest.approx(1.0)
    assert sol.path_length == pytest.approx(oracle_edge_length((8, 1, 0), (8, -1, 0), edge), rel=1e-12)


def test_diffraction_spurious_root_rejected():
    # Edge segment beyond both endpoints' abscissae: the squared stationarity
    # equation has a root on the edge, but it is not a Fermat point and the
    # constrained minimum sits at an edge endpoint.
    edge = WindowEdge(x1=2.0, x2=1.2, z_e=0.0, w=1.0)
    tx = np.array([0.0, 3.0, 0.0])
    rx = np.array([1.0, -1.0, 0.0])
    sol = diffraction_point(tx, rx, edge)
    expect = oracle_edge_length(tx, rx, edge)
    assert sol.endpoint
    assert sol.path_length == pytest.approx(expect, rel=1e-12)
    assert sol.q.x == pytest.approx(1.2, abs=1e-12)


def test_diffraction_frame_invariance():
    for _ in range(100):
        edge = random_edge(RNG)
        tx, rx = random_side_points(RNG)
        base = exact_diffraction_path_length(tx, rx, edge)

        rot = random_rotation(RNG)
        shift = RNG.uniform(-30, 30, 3)
        # Transform the world: points move by p -> rot @ p + shift, so the
        # edge frame (world->local) composes with the inverse map.
        frame = RigidTransform(edge.frame.rotation @ rot.T,
                               edge.frame.translation - edge.frame.rotation @ rot.T @ shift)
        moved_edge = WindowEdge(edge.x1, edge.x2, edge.z_e, edge.w, frame)
        moved = exact_diffraction_path_length(rot @ tx + shift, rot @ rx + shift, moved_edge)
        assert abs(moved - base) <= 1e-9 * base


# ---------------------------------------------------------------------------
# Window-height approximation
# ---------------------------------------------------------------------------

def test_approx_equals_exact_when_offset_matches():
    for _ in range(50):
        edge = random_edge(RNG)
        tx, _ = random_side_points(RNG)
        # Choose a receiver whose local height satisfies z_e - z_n = w/2.
        rx = np.array([RNG.uniform(-8, 8), RNG.uniform(-20, -1), edge.z_e - edge.w / 2.0])
        exact = exact_diffraction_path_length(tx, rx, edge)
        approx = approx_diffraction_path_length(tx, rx, edge)
        assert approx == pytest.approx(exact, rel=1e-12)


def test_approx_w_zero_limit_in_edge_plane():
    edge = WindowEdge(x1=-5.0, x2=5.0, z_e=7.0, w=2.0)
    tx = np.array([2.0, 10.0, 12.0])
    rx = np.array([-1.0, -6.0, 7.0])  # receiver at edge height
    got = approx_diffraction_path_length(tx, rx, edge, w=0.0)
    flat_edge = WindowEdge(x1=-5.0, x2=5.0, z_e=7.0, w=1.0)
    expect = exact_diffraction_path_length(tx, rx, flat_edge)
    assert got == pytest.approx(expect, rel=1e-12)


def test_approx_discrepancy_bounded_by_height_mismatch():
    # Sweep the receiver height: tx above the edge, rx below, so the length's
    # sensitivity to the edge height stays below one.
    edge = WindowEdge(x1=-4.0, x2=4.0, z_e=10.0, w=2.0)
    tx = np.array([1.0, 25.0, 16.0])
    for z_n in np.linspace(6.0, 10.0, 21):
        rx = np.array([-2.0, -5.0, z_n])
        exact = exact_diffraction_path_length(tx, rx, edge)
        approx = approx_diffraction_path_length(tx, rx, edge)
        mismatch = abs((edge.z_e - z_n) - edge.w / 2.0)
        assert abs(approx - exact) <= mismatch + 1e-12


def test_window_edge_invariants():
    with pytest.raises(GeometryError):
        WindowEdge(x1=1.0, x2=1.0, z_e=0.0, w=1.0)
    with pytest.raises(GeometryError):
        WindowEdge(x1=0.0, x2=1.0, z_e=0.0, w=0.0)


def test_plane_normal_invariant():
    with pytest.raises(GeometryError):
        ReflectorPlane(normal=np.array([0.0, 2.0, 0.0]), offset=0.0)
