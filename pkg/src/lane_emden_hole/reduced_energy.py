"""Reduced energy: the constants c0, c1, c2, the landscape Theta(d, tau), its
saddle point and Hessian, and the numerical energy of the ansatz."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ansatz import ProjectedBubble
from .errors import ConsistencyFailure, NewtonDivergence
from .ground_state import GroundState, moment_integrals, partial_moment
from .io import write_csv
from .numerics import radial_laplacian, sphere_area


@dataclass(frozen=True)
class EnergyConstants:
    c0: float
    c1: float
    c2: float
    provenance: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LandscapePoint:
    d: float
    tau: np.ndarray
    theta: float
    grad: np.ndarray


def energy_constants(gs: GroundState, h_tilde_0: float) -> EnergyConstants:
    pair = gs.pair
    N, p = pair.N, pair.p
    if not h_tilde_0 > 0:
        raise ValueError("H~_0(0) must be positive")
    int_q1, int_q = moment_integrals(gs)
    c0 = 2.0 / N * int_q1
    c1 = (gs.b_tail / pair.gamma_N) ** p * h_tilde_0 * int_q / (p + 1)
    c2 = 1.0 / pair.gamma_N
    prov = {"N": N, "p": p, "a_tail": gs.a_tail, "b_tail": gs.b_tail, "v0": gs.v0,
            "h_tilde_0": h_tilde_0, "int_U_q1": int_q1, "int_U_q": int_q}
    return EnergyConstants(c0, c1, c2, prov)


def _uv(gs, t):
    t = np.array([t])
    return gs.U(t)[0], gs.V(t)[0], gs.dU(t)[0], gs.dV(t)[0]


def theta(ec: EnergyConstants, gs: GroundState, d: float, tau) -> LandscapePoint:
    """Theta(d, tau) = c1 d^{(N-2)p-2} + c2 d^{2-N} U(tau) V(tau) and its
    analytic gradient (d first, then tau)."""
    N, k = gs.pair.N, gs.pair.energy_exponent
    if not d > 0:
        raise ValueError("d must be positive")
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    t = float(np.linalg.norm(tau))
    U, V, dU, dV = _uv(gs, t)
    val = ec.c1 * d**k + ec.c2 * d ** (2 - N) * U * V
    g_d = ec.c1 * k * d ** (k - 1) + ec.c2 * (2 - N) * d ** (1 - N) * U * V
    g_tau = ec.c2 * d ** (2 - N) * (dU * V + U * dV) * (tau / t if t > 0 else np.zeros_like(tau))
    return LandscapePoint(float(d), tau, float(val), np.concatenate([[g_d], g_tau]))


def saddle_closed_form(ec: EnergyConstants, gs: GroundState) -> float:
    """d~ = [c2 (N-2) V(0) / (c1 ((N-2)p-2))]^{1/((N-2)p+N-4)}."""
    N, p = gs.pair.N, gs.pair.p
    k = gs.pair.energy_exponent
    return float((ec.c2 * (N - 2) * gs.v0 / (ec.c1 * k)) ** (1.0 / ((N - 2) * p + N - 4)))


def _fd_hessian(ec, gs, z, h=1e-6):
    n = z.size
    Hm = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h * max(1.0, abs(z[j]))
        gp = theta(ec, gs, z[0] + e[0], z[1:] + e[1:]).grad
        gm = theta(ec, gs, z[0] - e[0], z[1:] - e[1:]).grad
        Hm[:, j] = (gp - gm) / (2 * e[j])
    return 0.5 * (Hm + Hm.T)


def refine_saddle(ec: EnergyConstants, gs: GroundState, start, tol: float = 1e-8,
                  max_iter: int = 50):
    """Damped Newton on grad Theta with a finite-difference Hessian."""
    z = np.asarray(start, dtype=float).copy()
    g = theta(ec, gs, z[0], z[1:]).grad
    for it in range(max_iter):
        Hm = _fd_hessian(ec, gs, z)
        step = np.linalg.solve(Hm, -g)
        t = 1.0
        for _ in range(30):
            trial = z + t * step
            if trial[0] > 0:
                g_trial = theta(ec, gs, trial[0], trial[1:]).grad
                if np.linalg.norm(g_trial) < np.linalg.norm(g):
                    break
            t *= 0.5
        else:
            raise NewtonDivergence(f"line search failed at iteration {it}")
        z, g = trial, g_trial
        if np.linalg.norm(t * step) < tol * max(1.0, np.linalg.norm(z)) and np.linalg.norm(g) < 1e-8:
            return z, it + 1
    raise NewtonDivergence(f"no convergence in {max_iter} iterations")


def saddle_point(ec: EnergyConstants, gs: GroundState, check: bool = True):
    """(d~, 0). With ``check`` a Newton solve from (2 d~, 0.1 e_1) must land
    back on the closed form to 1e-8, otherwise NewtonDivergence is raised."""
    N = gs.pair.N
    d = saddle_closed_form(ec, gs)
    tau = np.zeros(N)
    if check:
        start = np.concatenate([[2 * d], 0.1 * np.eye(N)[0]])
        z, _ = refine_saddle(ec, gs, start)
        if abs(z[0] - d) > 1e-8 * d or np.linalg.norm(z[1:]) > 1e-8:
            raise NewtonDivergence(f"Newton converged to {z}, not to ({d}, 0)")
    return d, tau


def saddle_hessian(ec: EnergyConstants, gs: GroundState) -> np.ndarray:
    """D^2 Theta(d~, 0) assembled from the closed-form second derivatives."""
    pair = gs.pair
    N, p = pair.N, pair.p
    d = saddle_closed_form(ec, gs)
    V0 = gs.v0
    Hm = np.zeros((N + 1, N + 1))
    Hm[0, 0] = d ** (-N) * ec.c2 * (N - 2) * ((N - 2) * p + N - 4) * V0
    Hm[1:, 1:] = -ec.c2 / N * d ** (2 - N) * (V0 ** (p + 1) + 1.0) * np.eye(N)
    return Hm


def hessian_signature(ec: EnergyConstants, gs: GroundState):
    eig = np.linalg.eigvalsh(saddle_hessian(ec, gs))
    return int(np.sum(eig > 0)), int(np.sum(eig < 0)), eig


def landscape(ec: EnergyConstants, gs: GroundState, d_values, tau_values):
    """Theta on a grid of d and tau = t e_1."""
    N = gs.pair.N
    pts = []
    for d in d_values:
        for t in tau_values:
            pts.append(theta(ec, gs, float(d), t * np.eye(N)[0]))
    return pts


def write_landscape_csv(path, points, N: int, comment: str | None = None):
    cols = {"d": [pt.d for pt in points]}
    for j in range(N):
        cols[f"tau_{j + 1}"] = [pt.tau[j] for pt in points]
    cols["theta"] = [pt.theta for pt in points]
    cols["grad_norm"] = [np.linalg.norm(pt.grad) for pt in points]
    return write_csv(path, cols, comment=comment)


@dataclass(frozen=True)
class EnergyBreakdown:
    J: float
    J_minus_c0: float
    cross_gradient: float
    cross_PV: float
    cross_U: float
    consistency: float


def energy_breakdown(gs: GroundState, pb: ProjectedBubble, c0: float | None = None) -> EnergyBreakdown:
    """Energy of the ansatz (𝒫U, PV) split as

        J = (2/N) int_{Omega_eps} U_mu^{q+1} + 1/(p+1) int w U_mu^q
            - 1/(q+1) int [(U_mu - w)^{q+1} - U_mu^{q+1} + (q+1) w U_mu^q],

    with 𝒫U = U_mu - w. The first term is taken from the ground state by
    scaling, so J - c0 is formed without cancellation.
    """
    pair = gs.pair
    N, p, q = pair.N, pair.p, pair.q
    mesh = pb.mesh
    r = mesh.r
    S = sphere_area(N)
    K, M = radial_laplacian(r, N)
    wts = S * M
    mu, eps = pb.params.mu, pb.params.epsilon
    U, w = pb.U_mu, pb.w
    if c0 is None:
        c0 = 2.0 / N * moment_integrals(gs)[0]
    # Scale invariance: int_{eps<|x|<1} U_mu^{q+1} = int_{eps/mu<|y|<1/mu} U^{q+1}.
    hole = partial_moment(gs, q + 1, 0.0, eps / mu)
    outer = partial_moment(gs, q + 1, 1.0 / mu, np.inf)
    PcU = np.maximum(pb.PcalU, 0.0)
    rem = PcU ** (q + 1) - U ** (q + 1) + (q + 1) * w * U**q
    J_minus_c0 = (-2.0 / N * (hole + outer) + np.sum(wts * w * U**q) / (p + 1)
                  - np.sum(wts * rem) / (q + 1))
    grad = S * float(np.sum(K * np.diff(pb.PcalU) * np.diff(pb.PV)))
    cross_PV = float(np.sum(wts * np.maximum(pb.PV, 0.0) ** (p + 1)))
    cross_U = float(np.sum(wts * PcU * U**q))
    vals = np.array([grad, cross_PV, cross_U])
    consistency = float(np.ptp(vals) / np.max(np.abs(vals)))
    return EnergyBreakdown(c0 + J_minus_c0, float(J_minus_c0), grad, cross_PV, cross_U, consistency)


def reduced_energy_numeric(gs: GroundState, pb: ProjectedBubble, c0: float | None = None,
                           tol: float = 1e-4) -> float:
    """J_eps(d, 0) = I_eps(𝒫U, PV); raises ConsistencyFailure when the three
    evaluations of the cross term disagree by more than ``tol``."""
    eb = energy_breakdown(gs, pb, c0)
    if eb.consistency > tol:
        raise ConsistencyFailure(f"cross-term evaluations disagree by {eb.consistency:.2e}")
    return eb.J
