"""Shared numerical substrate: radial grids, radial quadrature with power-law
tails, banded linear algebra, a damped Newton driver and log-log fitting."""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import lapack

from .errors import (
    DegenerateWindow,
    InvalidRange,
    NoConvergence,
    NonconvergentTail,
    SingularMatrix,
)

MIN_NODES = 8


def sphere_area(N: int) -> float:
    """Surface measure of the unit sphere S^{N-1} in R^N."""
    return 2.0 * pi ** (N / 2) / gamma(N / 2)


@dataclass(frozen=True)
class RadialGrid:
    nodes: np.ndarray
    kind: str
    r_min: float
    r_max: float

    def __post_init__(self):
        r = np.asarray(self.nodes, dtype=float)
        if r.ndim != 1 or r.size < MIN_NODES:
            raise InvalidRange(f"a radial grid needs at least {MIN_NODES} nodes")
        if np.any(np.diff(r) <= 0):
            raise InvalidRange("grid nodes must be strictly increasing")
        if r[0] != self.r_min or r[-1] != self.r_max:
            raise InvalidRange("grid endpoints disagree with r_min/r_max")
        r.setflags(write=False)
        object.__setattr__(self, "nodes", r)

    def __len__(self):
        return self.nodes.size


def build_grid(r_min: float, r_max: float, n: int, kind: str = "uniform",
               split: float = 1.0) -> RadialGrid:
    """Build a radial grid with ``n`` nodes.

    ``kind`` is ``"uniform"``, ``"geometric"`` (constant node ratio, needs
    ``r_min > 0``) or ``"mixed"``: uniform on ``[r_min, split]`` and
    geometric on ``[split, r_max]`` with matching spacing at the joint.
    """
    if not (0 <= r_min < r_max) or n < MIN_NODES:
        raise InvalidRange(f"need 0 <= r_min < r_max and n >= {MIN_NODES}; "
                           f"got r_min={r_min}, r_max={r_max}, n={n}")
    if kind == "uniform":
        nodes = np.linspace(r_min, r_max, n)
    elif kind == "geometric":
        if r_min <= 0:
            raise InvalidRange("geometric grids need r_min > 0")
        nodes = np.geomspace(r_min, r_max, n)
    elif kind == "mixed":
        if not r_min < split < r_max:
            raise InvalidRange("mixed grid needs r_min < split < r_max")
        # Pick the uniform count so that h ~ split * (ratio - 1) at the joint.
        log_span = np.log(r_max / split)
        n_uni = max(2, int(round((n - 1) * (split - r_min) / (split - r_min + split * log_span))))
        n_geo = n - n_uni
        if n_geo < 2:
            raise InvalidRange("mixed grid too small for both parts")
        uni = np.linspace(r_min, split, n_uni + 1)
        geo = np.geomspace(split, r_max, n_geo)[1:]
        nodes = np.concatenate([uni, geo])
    else:
        raise InvalidRange(f"unknown grid kind {kind!r}")
    nodes[0], nodes[-1] = r_min, r_max
    return RadialGrid(nodes=nodes, kind=kind, r_min=float(r_min), r_max=float(r_max))


def integrate_radial(f, grid: RadialGrid | np.ndarray, N: int,
                     tail_order: float | None = None) -> float:
    """|S^{N-1}| * int f(r) r^{N-1} dr over the grid.

    With ``tail_order`` set, the region beyond the last node is added
    analytically assuming ``f(r) = f(r_max) (r / r_max)^(-tail_order)``.
    """
    r = grid.nodes if isinstance(grid, RadialGrid) else np.asarray(grid, dtype=float)
    f = np.asarray(f, dtype=float)
    if f.shape != r.shape:
        raise ValueError("samples and grid have different shapes")
    if not np.all(np.isfinite(f)):
        raise ValueError("integrand is not finite at every node")
    if tail_order is not None and tail_order <= N:
        raise NonconvergentTail(f"tail order {tail_order} must exceed N={N}")
    total = simpson(f * r ** (N - 1), x=r)
    if tail_order is not None:
        R = r[-1]
        total += f[-1] * R**N / (tail_order - N)
    return sphere_area(N) * float(total)


@dataclass
class BandedMatrix:
    """Square matrix in LAPACK diagonal-ordered storage.

    ``data[upper + i - j, j] == A[i, j]``, the same layout as
    :func:`scipy.linalg.solve_banded`.
    """

    lower: int
    upper: int
    data: np.ndarray

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @classmethod
    def zeros(cls, n: int, lower: int, upper: int) -> "BandedMatrix":
        return cls(lower, upper, np.zeros((lower + upper + 1, n)))

    @classmethod
    def from_dense(cls, a, lower: int, upper: int) -> "BandedMatrix":
        a = np.atleast_2d(np.asarray(a, dtype=float))
        n = a.shape[0]
        out = cls.zeros(n, lower, upper)
        for i in range(n):
            for j in range(max(0, i - lower), min(n, i + upper + 1)):
                out.data[upper + i - j, j] = a[i, j]
        return out

    @classmethod
    def tridiagonal(cls, sub, diag, sup) -> "BandedMatrix":
        diag = np.asarray(diag, dtype=float)
        out = cls.zeros(diag.size, 1, 1)
        out.data[0, 1:] = sup
        out.data[1] = diag
        out.data[2, :-1] = sub
        return out

    def to_dense(self) -> np.ndarray:
        n = self.n
        a = np.zeros((n, n))
        for k in range(-self.upper, self.lower + 1):
            row = self.upper + k
            if k >= 0:
                idx = np.arange(0, n - k)
                a[idx + k, idx] = self.data[row, idx]
            else:
                idx = np.arange(-k, n)
                a[idx + k, idx] = self.data[row, idx]
        return a

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.n
        y = np.zeros(n)
        for k in range(-self.upper, self.lower + 1):
            row = self.data[self.upper + k]
            # entries A[j + k, j]
            j0, j1 = max(0, -k), min(n, n - k)
            y[j0 + k:j1 + k] += row[j0:j1] * x[j0:j1]
        return y

    def norm_inf(self) -> float:
        return float(np.max(self.row_abs_sums())) if self.n else 0.0

    def row_abs_sums(self) -> np.ndarray:
        return self.matvec_abs(np.ones(self.n))

    def matvec_abs(self, x) -> np.ndarray:
        return BandedMatrix(self.lower, self.upper, np.abs(self.data)).matvec(np.abs(x))


def solve_banded_linear(matrix: BandedMatrix, rhs) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` by banded LU with partial pivoting.

    Rows are scaled to unit absolute row sum first; :class:`SingularMatrix`
    is raised when a pivot of the scaled system is below ``1e-14``.
    """
    if matrix.lower + matrix.upper + 1 > 5:
        raise ValueError("bandwidth above 5 is not supported")
    b = np.asarray(rhs, dtype=float)
    n, kl, ku = matrix.n, matrix.lower, matrix.upper
    if b.shape[0] != n:
        raise ValueError("rhs length does not match the matrix")
    row_scale = matrix.row_abs_sums()
    if n == 0 or np.any(row_scale == 0.0):
        raise SingularMatrix("matrix has a zero row")
    # Row equilibration: radial operators on geometric grids mix rows whose
    # scales differ by many orders of magnitude, which misleads pivoting.
    ab = np.zeros((2 * kl + ku + 1, n))
    for k in range(-ku, kl + 1):
        row = ku + k
        j0, j1 = max(0, -k), min(n, n - k)
        ab[kl + row, j0:j1] = matrix.data[row, j0:j1] / row_scale[j0 + k:j1 + k]
    b = b / row_scale
    lu, piv, info = lapack.dgbtrf(ab, kl, ku)
    if info < 0:
        raise ValueError(f"dgbtrf: illegal argument {-info}")
    ratio = np.abs(lu[kl + ku])
    if info > 0 or np.min(ratio) < 1e-14:
        i = int(np.argmin(ratio))
        raise SingularMatrix(f"pivot at row {i} is {ratio[i]:.3e} x its row scale")
    x, info = lapack.dgbtrs(lu, kl, ku, b, piv)
    if info != 0:
        raise ValueError(f"dgbtrs: illegal argument {-info}")
    return x


def newton_solve(residual: Callable[[np.ndarray], np.ndarray],
                 jacobian: Callable[[np.ndarray], BandedMatrix],
                 x0, tol: float = 1e-10, max_iter: int = 50,
                 project: Callable[[np.ndarray], np.ndarray] | None = None,
                 max_halvings: int = 20) -> tuple[np.ndarray, int]:
    """Damped Newton iteration in the infinity norm.

    A full step that increases the residual norm is halved up to
    ``max_halvings`` times. ``project`` (e.g. clipping to the admissible set)
    is applied to every trial point. Returns ``(x, iterations)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.array(x0, dtype=float, ndmin=1)
    if project is not None:
        x = project(x)
    F = np.atleast_1d(residual(x))
    norm = float(np.max(np.abs(F)))
    for it in range(1, max_iter + 1):
        if norm <= tol:
            return x, it - 1
        dx = solve_banded_linear(jacobian(x), -F)
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = x + t * dx
            if project is not None:
                trial = project(trial)
            F_trial = np.atleast_1d(residual(trial))
            norm_trial = float(np.max(np.abs(F_trial)))
            if np.isfinite(norm_trial) and norm_trial < norm:
                break
            t *= 0.5
        else:
            raise NoConvergence(f"line search stalled at iteration {it}, residual {norm:.3e}")
        x, F, norm = trial, F_trial, norm_trial
    if norm <= tol:
        return x, max_iter
    raise NoConvergence(f"no convergence after {max_iter} iterations, residual {norm:.3e}")


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor_log: float
    rms_residual: float

    def __call__(self, x):
        return np.exp(self.prefactor_log) * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(points: Sequence[tuple[float, float]], window=None) -> PowerLawFit:
    """Least-squares line through (ln x, ln y); ``window`` is a slice or a
    ``(start, stop)`` index pair."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if window is not None:
        if not isinstance(window, slice):
            window = slice(*window)
        pts = pts[window]
    if pts.shape[0] < 3:
        raise DegenerateWindow("need at least 3 points to fit a power law")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fitting needs positive data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise DegenerateWindow("all abscissae are equal")
    slope, intercept = np.polyfit(lx, ly, 1)
    res = ly - (slope * lx + intercept)
    return PowerLawFit(float(slope), float(intercept), float(np.sqrt(np.mean(res**2))))


def radial_laplacian(nodes, N: int):
    """Conservative finite-difference form of -Delta for radial functions.

    Returns ``(K, M)``: ``K[i]`` couples nodes ``i`` and ``i+1`` and ``M[i]``
    is the volume (without the |S^{N-1}| factor) of the cell around node
    ``i``. The discrete equation at an interior node reads

        K[i-1] (w[i] - w[i-1]) + K[i] (w[i] - w[i+1]) = M[i] f[i].

    The edge coefficients are chosen so that radial harmonics ``A + B r^(2-N)``
    are reproduced exactly; cell interfaces sit at geometric midpoints.
    """
    r = np.asarray(nodes, dtype=float)
    if N < 3:
        raise ValueError("radial_laplacian supports N >= 3")
    with np.errstate(divide="ignore"):
        psi = r ** (2.0 - N)
        K = (N - 2.0) / (psi[:-1] - psi[1:])
    K = np.where(np.isfinite(K), K, 0.0)
    half = np.sqrt(r[:-1] * r[1:])
    edges = np.concatenate([[r[0]], half, [r[-1]]])
    M = (edges[1:] ** N - edges[:-1] ** N) / N
    return K, M


def dirichlet_poisson(nodes, N: int, source, left: float, right: float):
    """Solve -Delta w = source radially with w(r0)=left, w(r_end)=right.

    Returns ``(w, residual)`` with ``residual`` the rowwise relative
    backward error ``|A w - b|_i / (|A| |w| + |b|)_i`` of the discrete system.
    """
    K, M = radial_laplacian(nodes, N)
    f = np.asarray(source, dtype=float)
    n = f.size
    diag = np.ones(n)
    sub = np.zeros(n - 1)
    sup = np.zeros(n - 1)
    rhs = np.empty(n)
    diag[1:-1] = K[:-1] + K[1:]
    sub[:-1] = -K[:-1]
    sup[1:] = -K[1:]
    rhs[1:-1] = M[1:-1] * f[1:-1]
    rhs[0], rhs[-1] = left, right
    A = BandedMatrix.tridiagonal(sub, diag, sup)
    w = solve_banded_linear(A, rhs)
    return w, relative_residual(A, w, rhs)


def relative_residual(A: BandedMatrix, x, b) -> float:
    r = np.abs(A.matvec(x) - b)
    scale = A.matvec_abs(x) + np.abs(b)
    scale = np.where(scale > 0, scale, 1.0)
    return float(np.max(r / scale))
