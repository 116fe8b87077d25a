import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from lane_emden_hole.errors import CoincidentPoints, InsideHole, InvalidRange, MeshTooCoarse, OutsideBall
from lane_emden_hole.ground_state import critical_pair
from lane_emden_hole.greens import (
    PuncturedBall,
    annulus_green_radial,
    composite_green_radial,
    gamma_tilde,
    green_constant,
    greens_ball,
    h_tilde_center,
    h_tilde_profile,
    h_tilde_richardson,
    h_tilde_source,
    h_tilde_source_integral,
    regular_part_exterior,
    regular_part_punctured,
    regular_part_punctured_series,
)

H0_52 = 0.0033669854794  # Richardson-extrapolated H~_0(0) at (5, 1.2)


def _random_points(rng, n, N, lo, hi):
    z = rng.normal(size=(n, N))
    z /= np.linalg.norm(z, axis=1)[:, None]
    return z * rng.uniform(lo, hi, size=(n, 1))


def test_ball_center_image():
    x = np.array([0.3, 0.1, 0, 0, 0])
    G, H = greens_ball(5, x, np.zeros(5))
    g = green_constant(5)
    assert H == pytest.approx(g, rel=1e-15)
    assert G == pytest.approx(g * (np.linalg.norm(x) ** -3 - 1), rel=1e-13)


def test_ball_dirichlet(rng):
    for N in (4, 5):
        x = _random_points(rng, 100, N, 1.0, 1.0)
        y = _random_points(rng, 100, N, 0.0, 0.95)
        G, _ = greens_ball(N, x, y)
        assert np.max(np.abs(G)) < 1e-12


def test_ball_symmetry_and_positivity(rng):
    for N in (4, 5, 6):
        x = _random_points(rng, 100, N, 0.0, 0.99)
        y = _random_points(rng, 100, N, 0.0, 0.99)
        Gxy, Hxy = greens_ball(N, x, y)
        Gyx, Hyx = greens_ball(N, y, x)
        assert np.max(np.abs(Hxy - Hyx)) < 1e-12
        assert np.all(Gxy >= 0)


def test_ball_coincident():
    with pytest.raises(CoincidentPoints):
        greens_ball(4, [0.1, 0, 0, 0], [0.1, 0, 0, 0])


def test_exterior_hand_value():
    pb = PuncturedBall(0.1, 4)
    x = np.array([0.5, 0, 0, 0])
    val = regular_part_exterior(pb, x, x)
    assert green_constant(4) == pytest.approx(1 / (4 * math.pi**2), rel=1e-15)
    assert val.value == pytest.approx(green_constant(4) * 0.01 / 0.24**2, rel=1e-14)
    assert val.value == pytest.approx(4.3977e-3, abs=1e-7)
    assert val.error_bound == 0


def test_exterior_boundary_identity(rng):
    for N in (4, 5):
        eps = 0.1
        pb = PuncturedBall(eps, N)
        x = _random_points(rng, 100, N, eps, eps)
        y = _random_points(rng, 100, N, 0.15, 0.99)
        for xi, yi in zip(x, y):
            val = regular_part_exterior(pb, xi, yi, allow_boundary=True).value
            free = green_constant(N) * np.linalg.norm(xi - yi) ** (2 - N)
            assert val == pytest.approx(free, abs=1e-12)


def test_exterior_symmetry(rng):
    pb = PuncturedBall(0.05, 5)
    x = _random_points(rng, 100, 5, 0.06, 2.0)
    y = _random_points(rng, 100, 5, 0.06, 2.0)
    for xi, yi in zip(x, y):
        a = regular_part_exterior(pb, xi, yi).value
        b = regular_part_exterior(pb, yi, xi).value
        assert abs(a - b) < 1e-12


def test_exterior_inside_hole():
    pb = PuncturedBall(0.1, 4)
    with pytest.raises(InsideHole):
        regular_part_exterior(pb, [0.05, 0, 0, 0], [0.5, 0, 0, 0])


@pytest.mark.parametrize("eps", [0.0, 0.3, -0.1])
def test_punctured_ball_range(eps):
    with pytest.raises(InvalidRange):
        PuncturedBall(eps, 4)


def test_composite_small_hole_limit():
    x, y = np.array([0.4, 0.1, 0, 0]), np.array([-0.2, 0.3, 0, 0])
    H = greens_ball(4, x, y)[1]
    vals = [regular_part_punctured(PuncturedBall(eps, 4), x, y) for eps in (1e-2, 1e-4, 1e-6)]
    assert abs(vals[-1].value - H) < 1e-10
    assert vals[-1].error_bound < 1e-9
    assert vals[0].error_bound > vals[1].error_bound > vals[2].error_bound


def test_composite_domain_errors():
    pb = PuncturedBall(0.1, 4)
    with pytest.raises(InsideHole):
        regular_part_punctured(pb, [0.05, 0, 0, 0], [0.5, 0, 0, 0])
    with pytest.raises(OutsideBall):
        regular_part_punctured(pb, [1.0, 0, 0, 0], [0.5, 0, 0, 0])


def test_series_oracle_boundary_values():
    # The series must reproduce the free kernel on both spheres.
    N, eps = 4, 0.05
    pb = PuncturedBall(eps, N)
    y = np.array([0.0, 0.4, 0.1, 0.0])
    for radius in (1 - 1e-9, eps * (1 + 1e-9)):
        x = radius * np.array([0.6, 0.0, 0.8, 0.0])
        free = green_constant(N) * np.linalg.norm(x - y) ** (2 - N)
        assert regular_part_punctured_series(pb, x, y) == pytest.approx(free, rel=1e-6)


def test_series_oracle_symmetric(rng):
    pb = PuncturedBall(0.05, 5)
    x, y = _random_points(rng, 2, 5, 0.1, 0.9)
    a = regular_part_punctured_series(pb, x, y)
    b = regular_part_punctured_series(pb, y, x)
    assert a == pytest.approx(b, rel=1e-12)


def test_composite_vs_series_example():
    pb = PuncturedBall(0.05, 4)
    x, y = np.array([0.4, 0, 0, 0]), np.array([0.0, 0.4, 0, 0])
    kv = regular_part_punctured(pb, x, y)
    assert abs(kv.value - regular_part_punctured_series(pb, x, y)) <= kv.error_bound


def test_composite_positivity(rng):
    pb = PuncturedBall(0.05, 4)
    x = _random_points(rng, 50, 4, 0.06, 0.99)
    y = _random_points(rng, 50, 4, 0.06, 0.99)
    for xi, yi in zip(x, y):
        kv = regular_part_punctured(pb, xi, yi)
        free = pb.gamma_N * np.linalg.norm(xi - yi) ** -2
        assert free - kv.value + kv.error_bound >= 0


def _sphere_average_n4(f):
    # Average over S^3 of a function of the polar angle.
    return 2 / math.pi * quad(lambda t: f(math.cos(t)) * math.sin(t) ** 2, 0, math.pi, epsabs=0, epsrel=1e-11)[0]


def test_radial_green_is_angular_average():
    N, eps, r, rho = 4, 0.1, 0.3, 0.6
    pb = PuncturedBall(eps, N)
    y = np.array([rho, 0, 0, 0])
    g = green_constant(N)

    def exact(c):
        x = r * np.array([c, math.sqrt(1 - c * c), 0, 0])
        return g * np.linalg.norm(x - y) ** -2 - regular_part_punctured_series(pb, x, y)

    def composite(c):
        x = r * np.array([c, math.sqrt(1 - c * c), 0, 0])
        return g * np.linalg.norm(x - y) ** -2 - regular_part_punctured(pb, x, y).value

    assert _sphere_average_n4(exact) == pytest.approx(annulus_green_radial(N, eps, r, rho), rel=1e-8)
    assert _sphere_average_n4(composite) == pytest.approx(composite_green_radial(N, eps, r, rho), rel=1e-8)


def test_gamma_tilde_value():
    pr = critical_pair(5, 1.2)
    g5 = 1 / (8 * math.pi**2)
    assert gamma_tilde(pr) == pytest.approx(g5**1.2 / (1.6 * 1.4), rel=1e-14)
    assert gamma_tilde(pr) == pytest.approx(2.360e-3, abs=1e-6)


@given(N=st.integers(4, 8), t=st.floats(0.01, 0.99))
def test_gamma_tilde_positive(N, t):
    assert gamma_tilde(critical_pair(N, 1 + t / (N - 2))) > 0


def test_gamma_tilde_blows_up_at_endpoint():
    near = critical_pair(5, 5 / 3 - 1e-6, strict=False)
    val = gamma_tilde(near)
    assert np.isfinite(val) and val > 1e3 * gamma_tilde(critical_pair(5, 1.2))


def test_h_tilde_properties(pair52, h0_52):
    assert h0_52 > gamma_tilde(pair52) > 0


def test_h_tilde_richardson(pair52, h0_52):
    extrap, ratio = h_tilde_richardson(pair52)
    assert 3.5 <= ratio <= 4.5
    assert extrap == pytest.approx(H0_52, rel=1e-9)
    assert h0_52 == pytest.approx(extrap, rel=1e-4)


@pytest.mark.parametrize("N,p", [(5, 1.2), (4, 1.25), (5, 1.05)])
def test_h_tilde_green_representation(N, p):
    # w(0) = w(1) + int_0^1 f(s) s (1 - s^{N-2}) / (N-2) ds for radial -Delta w = f.
    pr = critical_pair(N, p)
    f = lambda s: h_tilde_source(pr, s) * s * (1 - s ** (N - 2)) / (N - 2)  # noqa: E731
    oracle = gamma_tilde(pr) + quad(f, 0, 1, limit=200, points=[1e-6, 1e-3], epsabs=0, epsrel=1e-12)[0]
    extrap, _ = h_tilde_richardson(pr)
    assert extrap == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("N,p", [(5, 1.2), (4, 1.25), (5, 1.05)])
def test_h_tilde_source_quadrature(N, p):
    pr = critical_pair(N, p)
    ref = quad(lambda s: h_tilde_source(pr, s) * s ** (N - 1), 0, 1, epsabs=0, epsrel=1e-13)[0]
    assert h_tilde_source_integral(pr) == pytest.approx(ref, rel=1e-8)


def test_h_tilde_source_near_origin(pair52):
    N, p = 5, 1.2
    r = 1e-8
    expected = pair52.gamma_N**p * p * r ** ((N - 2) * (1 - p))
    assert h_tilde_source(pair52, r) == pytest.approx(expected, rel=1e-6)


def test_h_tilde_mesh_too_coarse(pair52):
    with pytest.raises(MeshTooCoarse):
        h_tilde_center(pair52, 4000, tol=1e-9)
    with pytest.raises(InvalidRange):
        h_tilde_center(pair52, 1000)


@settings(max_examples=10, deadline=None)
@given(N=st.integers(4, 7), t=st.floats(0.05, 0.95))
def test_h_tilde_positive(N, t):
    pr = critical_pair(N, 1 + t / (N - 2))
    _, w = h_tilde_profile(pr, 2000)
    assert np.all(w >= gamma_tilde(pr) * (1 - 1e-12))
