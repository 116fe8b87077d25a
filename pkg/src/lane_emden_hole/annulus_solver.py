"""Direct radial solve of the Lane-Emden system on the annulus eps < r < 1
with Newton continuation in eps."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .ansatz import AnnulusMesh, annulus_mesh, bubble_params, project_bubble
from .errors import ConvergedToZero, InvalidRange, LaneEmdenError, NoConvergence
from .ground_state import CriticalPair, GroundState, bubble_radial
from .greens import PuncturedBall
from .io import write_csv
from .numerics import (
    BandedMatrix,
    PowerLawFit,
    fit_power_law,
    newton_solve,
    radial_laplacian,
    solve_banded_linear,
    sphere_area,
)

SOLVER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SolveResult:
    pair: CriticalPair
    epsilon: float
    mesh: AnnulusMesh
    u: np.ndarray
    v: np.ndarray
    sup_u: float
    sup_v: float
    argmax_r: float
    newton_iters: int
    residual_norm: float
    energy: float
    initializer: str = "given"

    @property
    def params(self):
        return self.pair, self.epsilon


@dataclass(frozen=True, eq=False)
class SweepReport:
    results: list
    rate_fit: PowerLawFit
    energy_fit: PowerLawFit | None
    predicted_rate: float
    predicted_energy_rate: float
    c0: float | None = None
    failures: list = field(default_factory=list)

    def rate_error(self) -> float:
        return abs(self.rate_fit.exponent / self.predicted_rate - 1.0)

    def energy_rate_error(self) -> float:
        if self.energy_fit is None:
            return np.inf
        return abs(self.energy_fit.exponent / self.predicted_energy_rate - 1.0)


def _spow(x, e):
    return np.sign(x) * np.abs(x) ** e


class _System:
    """Finite-volume residual and banded Jacobian with interleaved unknowns
    (u_0, v_0, u_1, v_1, ...), so that the Jacobian has two sub- and two
    super-diagonals."""

    def __init__(self, pair: CriticalPair, r: np.ndarray, scale_u: float, scale_v: float):
        self.p, self.q = pair.p, pair.q
        self.K, self.M = radial_laplacian(r, pair.N)
        n = r.size
        self.n = n
        diag = np.zeros(n)
        diag[:-1] += self.K
        diag[1:] += self.K
        self.diag = diag
        # Row scaling: residuals measured as relative nodal corrections.
        self.su = np.where(diag > 0, 1.0 / (diag * scale_u), 1.0)
        self.sv = np.where(diag > 0, 1.0 / (diag * scale_v), 1.0)

    def lap(self, w):
        K = self.K
        out = self.diag * w
        out[:-1] -= K * w[1:]
        out[1:] -= K * w[:-1]
        return out

    def residual(self, x):
        u, v = x[0::2], x[1::2]
        Fu = self.lap(u) - self.M * _spow(v, self.p)
        Fv = self.lap(v) - self.M * _spow(u, self.q)
        Fu[[0, -1]] = u[[0, -1]]
        Fv[[0, -1]] = v[[0, -1]]
        F = np.empty_like(x)
        F[0::2] = Fu * self.su
        F[1::2] = Fv * self.sv
        return F

    def jacobian(self, x):
        u, v = x[0::2], x[1::2]
        n, K = self.n, self.K
        J = BandedMatrix.zeros(2 * n, 2, 2)
        data = J.data

        def put(rows, cols, vals):
            data[2 + rows - cols, cols] = vals

        i = np.arange(1, n - 1)
        for comp, other, expo, scale in ((0, 1, self.p, self.su), (1, 0, self.q, self.sv)):
            rows = 2 * i + comp
            src = v if comp == 0 else u
            put(rows, rows, self.diag[i] * scale[i])
            put(rows, rows - 2, -K[i - 1] * scale[i])
            put(rows, rows + 2, -K[i] * scale[i])
            put(rows, 2 * i + other, -self.M[i] * expo * np.abs(src[i]) ** (expo - 1) * scale[i])
        for b in (0, n - 1):
            put(np.array([2 * b]), np.array([2 * b]), np.array([self.su[b]]))
            put(np.array([2 * b + 1]), np.array([2 * b + 1]), np.array([self.sv[b]]))
        return J


def _energy(pair, mesh, u, v):
    N, p, q = pair.N, pair.p, pair.q
    K, M = radial_laplacian(mesh.r, N)
    S = sphere_area(N)
    grad = S * np.sum(K * np.diff(u) * np.diff(v))
    return float(grad - S * np.sum(M * np.abs(v) ** (p + 1)) / (p + 1)
                 - S * np.sum(M * np.abs(u) ** (q + 1)) / (q + 1))


def solve_system(pair: CriticalPair, epsilon: float, mesh: AnnulusMesh, initial,
                 tol: float = SOLVER_TOL, max_iter: int = 50) -> SolveResult:
    """Damped Newton on the coupled finite-volume system with negative values
    clipped between iterations."""
    r = mesh.r
    if abs(r[0] - epsilon) > 1e-15 * epsilon:
        raise InvalidRange("mesh does not start at epsilon")
    u0, v0 = (np.asarray(a, dtype=float) for a in initial)
    if u0.shape != r.shape or v0.shape != r.shape:
        raise InvalidRange("initial profiles must live on the mesh")
    if np.any(u0 < 0) or np.any(v0 < 0):
        raise InvalidRange("initial profiles must be nonnegative")
    scale_u = float(np.max(u0)) if np.max(u0) > 0 else 1.0
    scale_v = float(np.max(v0)) if np.max(v0) > 0 else 1.0
    sysm = _System(pair, r, scale_u, scale_v)
    x0 = np.empty(2 * r.size)
    x0[0::2], x0[1::2] = u0, v0
    x0[[0, 1, -2, -1]] = 0.0
    x, iters = newton_solve(sysm.residual, sysm.jacobian, x0, tol=tol, max_iter=max_iter,
                            project=lambda z: np.maximum(z, 0.0))
    # Quadratic convergence makes a few extra unclipped steps nearly free; they
    # push the discrete residual well below the scaled tolerance, which the
    # independent-stencil check needs, and confirm the clip is inactive.
    res = float(np.max(np.abs(sysm.residual(x))))
    for _ in range(3):
        trial = x + solve_banded_linear(sysm.jacobian(x), -sysm.residual(x))
        res_trial = float(np.max(np.abs(sysm.residual(trial))))
        if not res_trial < res or np.any(trial < 0):
            break
        x, res = trial, res_trial
        iters += 1
    u, v = x[0::2].copy(), x[1::2].copy()
    sup_u, sup_v = float(u.max()), float(v.max())
    if sup_u < 1e-8:
        raise ConvergedToZero("Newton converged to the trivial solution")
    return SolveResult(pair, float(epsilon), mesh, u, v, sup_u, sup_v, float(r[np.argmax(u)]),
                       int(iters), res, _energy(pair, mesh, u, v))


def stencil_residual(sr: SolveResult) -> float:
    """Interior residual of -Delta u = v^p and -Delta v = u^q under an
    independent fourth-order stencil in log r, relative to the source size.

    Requires a geometric mesh (uniform in log r).
    """
    r = sr.mesh.r
    t = np.log(r)
    h = np.diff(t)
    if np.ptp(h) > 1e-9 * h.mean():
        raise InvalidRange("stencil_residual needs a geometric mesh")
    h = h.mean()
    N, p, q = sr.pair.N, sr.pair.p, sr.pair.q
    worst = 0.0
    for w, src in ((sr.u, sr.v**p), (sr.v, sr.u**q)):
        d1 = (-w[4:] + 8 * w[3:-1] - 8 * w[1:-3] + w[:-4]) / (12 * h)
        d2 = (-w[4:] + 16 * w[3:-1] - 30 * w[2:-2] + 16 * w[1:-3] - w[:-4]) / (12 * h * h)
        lap = (d2 + (N - 2) * d1) / r[2:-2] ** 2
        worst = max(worst, float(np.max(np.abs(-lap - src[2:-2])) / np.max(np.abs(src))))
    return worst


def interior_maxima(sr: SolveResult) -> tuple[int, int]:
    """Number of sign changes of the discrete derivative of u and v."""
    out = []
    for w in (sr.u, sr.v):
        s = np.sign(np.diff(w))
        s = s[s != 0]
        out.append(int(np.count_nonzero(np.diff(s))))
    return out[0], out[1]


def _rescale(sr: SolveResult, mesh: AnnulusMesh, lam: float):
    """Warm start: previous solution dilated by ``lam`` with the bubble
    amplitudes mu^{-N/(q+1)}, mu^{-N/(p+1)}."""
    pair = sr.pair
    N, p, q = pair.N, pair.p, pair.q
    lr_old = np.log(sr.mesh.r)
    lr = np.log(mesh.r / lam)
    u = lam ** (-N / (q + 1)) * np.interp(lr, lr_old, sr.u, left=0.0, right=0.0)
    v = lam ** (-N / (p + 1)) * np.interp(lr, lr_old, sr.v, left=0.0, right=0.0)
    u[[0, -1]] = 0.0
    v[[0, -1]] = 0.0
    return u, v


def continuation_sweep(pair: CriticalPair, eps_list, d_init: float, gs: GroundState,
                       n_annulus: int = 20000, c0: float | None = None,
                       tol: float = SOLVER_TOL) -> SweepReport:
    """Solve along decreasing eps, starting from the ansatz (𝒫U, PV) and
    warm-starting each later point from the rescaled previous solution."""
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list[:-1], eps_list[1:])):
        raise InvalidRange("eps_list must be decreasing")
    if eps_list[0] > 0.1:
        raise InvalidRange("the first eps must be at most 1e-1")
    if not d_init > 0:
        raise InvalidRange("d_init must be positive")
    N, p, q, alpha = pair.N, pair.p, pair.q, pair.alpha
    results, failures = [], []
    prev = None
    for eps in eps_list:
        mu = eps**alpha * d_init
        mesh = annulus_mesh(PuncturedBall(eps, N), n_annulus, mu)
        delta = min(0.1, min(d_init, 1 / d_init) / 2)

        def from_ansatz():
            pb = project_bubble(gs, bubble_params(pair, eps, d_init, delta=delta), mesh)
            init = (np.maximum(pb.PcalU, 0.0), np.maximum(pb.PV, 0.0))
            return replace(solve_system(pair, eps, mesh, init, tol=tol), initializer="ansatz")

        try:
            if prev is None:
                sr = from_ansatz()
            else:
                # The rescaled previous solution still vanishes on the old,
                # relatively larger hole; over long steps in eps that guess
                # can stall Newton, and the ansatz is the fallback.
                init = _rescale(prev, mesh, (eps / prev.epsilon) ** alpha)
                try:
                    sr = replace(solve_system(pair, eps, mesh, init, tol=tol), initializer="warm")
                except (NoConvergence, ConvergedToZero):
                    sr = replace(from_ansatz(), initializer="ansatz-fallback")
        except LaneEmdenError as exc:
            failures.append((eps, f"{exc.code}: {exc}"))
            break
        results.append(sr)
        prev = sr
    if failures and len(results) < 3:
        eps, msg = failures[0]
        raise NoConvergence(f"sweep failed at eps={eps:g}: {msg}")
    rate_fit = fit_power_law([(r.epsilon, r.sup_u) for r in results])
    energy_fit = None
    if c0 is not None:
        gaps = [(r.epsilon, r.energy - c0) for r in results]
        if all(g > 0 for _, g in gaps):
            energy_fit = fit_power_law(gaps)
    return SweepReport(results, rate_fit, energy_fit, -alpha * N / (q + 1),
                       alpha * pair.energy_exponent, c0, failures)


@dataclass(frozen=True)
class Similarity:
    distance: float
    mu_best: float
    mu_ratio: float


def profile_similarity(sr: SolveResult, gs: GroundState, d_ref: float = 1.0,
                       r_hi: float = 0.5) -> Similarity:
    """Best-fitting bubble scale for the computed u.

    Minimizes the volume-weighted L^2 distance between u and U_{mu,0} on
    [eps, r_hi] over mu, and returns the relative distance, mu_best and
    mu_best / (eps^alpha d_ref).
    """
    pair = sr.pair
    N = pair.N
    r = sr.mesh.r
    sel = r <= r_hi
    rr, uu = r[sel], sr.u[sel]
    wts = sr.mesh.weights()[sel]
    norm_u = np.sqrt(np.sum(wts * uu**2))

    def dist2(log_mu):
        Ub = bubble_radial(gs, np.exp(log_mu), rr)[0]
        return np.sum(wts * (uu - Ub) ** 2) / norm_u**2

    mu_guess = sr.epsilon**pair.alpha * d_ref
    lo, hi = np.log(mu_guess) - 3.0, np.log(mu_guess) + 3.0
    grid = np.linspace(lo, hi, 61)
    vals = [dist2(g) for g in grid]
    j = int(np.argmin(vals))
    a, b = grid[max(j - 1, 0)], grid[min(j + 1, grid.size - 1)]
    res = minimize_scalar(dist2, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
    # Brent stalls near sqrt(machine eps) in log mu; Gauss-Newton with the
    # analytic scale derivative d U_mu / d log mu = -(N/(q+1)) U_mu - r U_mu'
    # finishes the job.
    x, f = float(res.x), float(res.fun)
    for _ in range(8):
        mu = np.exp(x)
        Ub, _, dUb, _ = bubble_radial(gs, mu, rr)
        jac = -(N / (pair.q + 1)) * Ub - rr * dUb
        step = np.sum(wts * jac * (uu - Ub)) / np.sum(wts * jac**2)
        trial = min(max(x + step, a), b)
        f_trial = dist2(trial)
        if not f_trial < f:
            break
        x, f = trial, f_trial
    mu_best = float(np.exp(x))
    return Similarity(float(np.sqrt(f)), mu_best, mu_best / mu_guess)


def write_sweep_csv(path, report: SweepReport, gs: GroundState | None = None,
                    comment: str | None = None):
    rows = report.results
    mu_best = [profile_similarity(r, gs).mu_best if gs is not None else np.nan for r in rows]
    return write_csv(path, {
        "eps": [r.epsilon for r in rows],
        "sup_u": [r.sup_u for r in rows],
        "sup_v": [r.sup_v for r in rows],
        "argmax_r": [r.argmax_r for r in rows],
        "mu_best": mu_best,
        "newton_iters": [r.newton_iters for r in rows],
        "residual_norm": [r.residual_norm for r in rows],
        "energy": [r.energy for r in rows],
    }, comment=comment)
