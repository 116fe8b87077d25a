"""Green's kernels of the unit ball, of the exterior of a small ball, of the
punctured ball, and the nonlinear regular part at the centre."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.special import eval_gegenbauer

from .errors import (
    CoincidentPoints,
    InsideHole,
    InvalidRange,
    MeshTooCoarse,
    OutsideBall,
)
from .ground_state import CriticalPair
from .io import write_csv
from .numerics import BandedMatrix, radial_laplacian, solve_banded_linear, sphere_area


def green_constant(N: int) -> float:
    return 1.0 / ((N - 2) * sphere_area(N))


@dataclass(frozen=True)
class PuncturedBall:
    """Unit ball with the closed ball of radius ``epsilon`` removed."""

    epsilon: float
    N: int
    C_lem21: float = 10.0

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.25:
            raise InvalidRange(f"hole radius must lie in (0, 1/4], got {self.epsilon}")
        if int(self.N) != self.N or self.N < 3:
            raise InvalidRange(f"dimension must be an integer >= 3, got {self.N}")

    @property
    def gamma_N(self) -> float:
        return green_constant(self.N)


@dataclass(frozen=True)
class KernelValue:
    value: float
    error_bound: float = 0.0

    def __float__(self):
        return float(self.value)


def _as_point(x, N=None):
    x = np.asarray(x, dtype=float)
    if N is not None and x.shape[-1] != N:
        raise ValueError(f"points must have {N} coordinates")
    return x


def greens_ball(N: int, x, y):
    """(G, H) of the unit ball with the image-charge regular part.

    H(x, y) = gamma_N (|x|^2 |y|^2 - 2 x.y + 1)^{(2-N)/2}, which is the
    symmetric form of gamma_N (|y| |x - y/|y|^2|)^{2-N} and equals gamma_N at
    y = 0.
    """
    x, y = _as_point(x, N), _as_point(y, N)
    g = green_constant(N)
    dist = np.linalg.norm(x - y, axis=-1)
    if np.any(dist < 1e-12):
        raise CoincidentPoints("x and y coincide")
    xx, yy, xy = (x * x).sum(-1), (y * y).sum(-1), (x * y).sum(-1)
    H = g * (xx * yy - 2 * xy + 1.0) ** ((2 - N) / 2)
    G = g * dist ** (2 - N) - H
    return G, H


def _check_annulus(pb: PuncturedBall, x, y, allow_boundary=False, outer=True):
    for z in (x, y):
        rz = np.linalg.norm(z, axis=-1)
        inside = rz < pb.epsilon * (1 - 1e-12) if allow_boundary else rz <= pb.epsilon
        if np.any(inside):
            raise InsideHole(f"point at radius {np.min(rz):g} is not outside the hole of radius {pb.epsilon:g}")
        if outer and np.any(rz >= 1):
            raise OutsideBall(f"point at radius {np.max(rz):g} is not inside the unit ball")


def _exterior_value(N, eps, x, y):
    xx, yy, xy = (x * x).sum(-1), (y * y).sum(-1), (x * y).sum(-1)
    return green_constant(N) * eps ** (N - 2) * (xx * yy - 2 * eps**2 * xy + eps**4) ** ((2 - N) / 2)


def regular_part_exterior(pb: PuncturedBall, x, y, allow_boundary: bool = False) -> KernelValue:
    """Regular part of the Green's function of the exterior of B(0, eps):

        H_{eps,1}(x, y) = gamma_N eps^{N-2} | |y| (x - eps^2 y / |y|^2) |^{2-N}.

    ``allow_boundary`` admits points on the hole's sphere (for boundary
    identity checks).
    """
    x, y = _as_point(x, pb.N), _as_point(y, pb.N)
    _check_annulus(pb, x, y, allow_boundary=allow_boundary, outer=False)
    return KernelValue(float(_exterior_value(pb.N, pb.epsilon, x, y)), 0.0)


def regular_part_punctured(pb: PuncturedBall, x, y) -> KernelValue:
    """Composite H + H_{eps,1} for the punctured ball, with the certified
    bound C_lem21 eps^{N-2} (|x|^{2-N} + |y|^{2-N}) on the neglected part."""
    x, y = _as_point(x, pb.N), _as_point(y, pb.N)
    _check_annulus(pb, x, y)
    N, eps = pb.N, pb.epsilon
    xx, yy, xy = (x * x).sum(-1), (y * y).sum(-1), (x * y).sum(-1)
    H = pb.gamma_N * (xx * yy - 2 * xy + 1.0) ** ((2 - N) / 2)
    value = H + _exterior_value(N, eps, x, y)
    bound = pb.C_lem21 * eps ** (N - 2) * (np.sqrt(xx) ** (2 - N) + np.sqrt(yy) ** (2 - N))
    return KernelValue(float(value), float(bound))


def regular_part_punctured_series(pb: PuncturedBall, x, y, tol: float = 1e-15,
                                  max_terms: int = 4000) -> float:
    """Regular part H_eps of the punctured ball by a Gegenbauer series.

    For fixed y the regular part is harmonic in the annulus and equals the
    free kernel gamma_N |x - y|^{2-N} on both spheres. Expanding the free
    kernel in C_l^{(N-2)/2}(cos theta) turns this into one 2x2 system per
    mode for the coefficients of r^l and r^{2-N-l}.
    """
    x, y = _as_point(x, pb.N), _as_point(y, pb.N)
    _check_annulus(pb, x, y)
    N, eps, g = pb.N, pb.epsilon, pb.gamma_N
    r, s = np.linalg.norm(x), np.linalg.norm(y)
    c = float(np.clip(x @ y / (r * s), -1.0, 1.0))
    lam = (N - 2) / 2
    total = 0.0
    for l in range(max_terms):
        # Boundary data of mode l on |z| = 1 and |z| = eps.
        f1 = g * s**l
        f0 = g * eps**l * s ** (-l - N + 2)
        # A + B = f1,  A eps^l + B eps^{2-N-l} = f0; scale B by eps^{2-N-l}.
        e_l = eps**l
        e_m = eps ** (2 - N - l)
        Bt = (f0 - f1 * e_l) / (1 - e_l / e_m)  # Bt = B eps^{2-N-l}
        A = f1 - Bt / e_m
        term = (A * r**l + Bt * (eps / r) ** (N - 2 + l)) * eval_gegenbauer(l, lam, c)
        total += term
        if l > 10 and abs(A * r**l) + abs(Bt * (eps / r) ** (N - 2 + l)) < tol * abs(total) / (l + 1) ** lam:
            break
    return float(total)


def annulus_green_radial(N: int, eps: float, r, rho):
    """Angular average of the annulus Green's function G_eps(x, y) over the
    sphere |x| = r for fixed |y| = rho (exact radial Green's function)."""
    g = green_constant(N)
    r, rho = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(rho, dtype=float))
    lo, hi = np.minimum(r, rho), np.maximum(r, rho)
    pe = eps ** (2 - N)
    return g * (lo ** (2 - N) - pe) * (hi ** (2 - N) - 1.0) / (1.0 - pe)


def composite_green_radial(N: int, eps: float, r, rho):
    """Angular average of the composite gamma_N|x-y|^{2-N} - H - H_{eps,1}.

    By Newton's theorem the free kernel averages to gamma_N max(r,rho)^{2-N},
    H to gamma_N and H_{eps,1} to gamma_N eps^{N-2} (r rho)^{2-N}.
    """
    g = green_constant(N)
    r, rho = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(rho, dtype=float))
    return g * (np.maximum(r, rho) ** (2 - N) - 1.0 - eps ** (N - 2) * (r * rho) ** (2 - N))


def gamma_tilde(pair: CriticalPair) -> float:
    """gamma_N^p / (((N-2)p-2)(N-(N-2)p))."""
    return pair.gamma_N**pair.p / pair.hyperbola_factor


def h_tilde_source(pair: CriticalPair, r):
    """gamma_N^p [r^{(2-N)p} - (r^{2-N} - 1)^p], evaluated without cancellation."""
    N, p = pair.N, pair.p
    r = np.asarray(r, dtype=float)
    t = np.minimum(r ** (N - 2), 1.0)
    # r^{(2-N)p} (1 - (1 - r^{N-2})^p)
    with np.errstate(divide="ignore"):
        return pair.gamma_N**p * r ** ((2 - N) * p) * -np.expm1(p * np.log1p(-t))


def h_tilde_source_integral(pair: CriticalPair, n: int = 4000, r_min: float = 1e-10) -> float:
    """int_0^1 source(r) r^{N-1} dr on a mesh graded at both ends.

    The source is a power of r near the origin and behaves like
    (1 - r)^p at r = 1, so both ends get geometric clustering.
    """
    N = pair.N
    left = np.geomspace(r_min, 0.5, n)
    right = 1.0 - np.geomspace(0.5, 1e-14, n)[1:]
    r = np.concatenate([left, right])
    return float(simpson(h_tilde_source(pair, r) * r ** (N - 1), x=r))


def h_tilde_profile(pair: CriticalPair, n: int = 4000, r_min: float = 1e-10):
    """Radial solve of -Delta w = source on (0, 1) with w(1) = gamma_tilde.

    The grid is geometric on [r_min, 1]; the innermost cell carries a zero
    flux condition (regularity at the origin). Returns ``(r, w)``.
    """
    if n < 16:
        raise InvalidRange("h_tilde_profile needs at least 16 nodes")
    N = pair.N
    r = np.geomspace(r_min, 1.0, n)
    K, M = radial_laplacian(r, N)
    f = h_tilde_source(pair, r)
    # The innermost cell also covers the ball of radius r_min.
    M = M.copy()
    M[0] += r_min**N / N
    diag = np.zeros(n)
    diag[:-1] += K
    diag[1:] += K
    sub = -K.copy()
    sup = -K.copy()
    rhs = M * f
    diag[-1], sub[-1], rhs[-1] = 1.0, 0.0, gamma_tilde(pair)
    w = solve_banded_linear(BandedMatrix.tridiagonal(sub, diag, sup), rhs)
    return r, w


def h_tilde_center(pair: CriticalPair, n: int = 4000, check: bool = True,
                   tol: float = 5e-3) -> float:
    """H~_0(0) for the unit ball: w(0) of :func:`h_tilde_profile`.

    With ``check`` the solve is repeated with ``2n`` nodes and
    :class:`MeshTooCoarse` is raised when the relative shift exceeds ``tol``.
    """
    if n < 4000:
        raise InvalidRange("h_tilde_center needs n >= 4000")
    value = float(h_tilde_profile(pair, n)[1][0])
    if check:
        fine = float(h_tilde_profile(pair, 2 * n)[1][0])
        if abs(fine - value) > tol * abs(fine):
            raise MeshTooCoarse(f"doubling n shifts H~_0(0) by {abs(fine / value - 1):.2%}")
    return value


def h_tilde_richardson(pair: CriticalPair, ns=(4000, 8000, 16000)):
    """Richardson study over successive doublings.

    Returns ``(extrapolated value, convergence ratio)`` where the ratio of
    successive differences is about 4 for a second-order scheme.
    """
    vals = [float(h_tilde_profile(pair, n)[1][0]) for n in ns]
    d1, d2 = vals[1] - vals[0], vals[2] - vals[1]
    ratio = d1 / d2 if d2 != 0 else np.inf
    extrap = vals[2] + d2 / (ratio - 1) if np.isfinite(ratio) and ratio != 1 else vals[2]
    return float(extrap), float(ratio)


def write_h_tilde_csv(path, pair: CriticalPair, n: int = 4000, comment: str | None = None):
    r, w = h_tilde_profile(pair, n)
    return write_csv(path, {"r": r, "w": w}, comment=comment)
