"""Projected bubbles PU, PV and the refined projection 𝒫U on the radial
annulus, the hole potential 𝒜, and the ansatz residual."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import InvalidRange, UnderResolvedMesh
from .ground_state import CriticalPair, GroundState, bubble_radial
from .greens import PuncturedBall, composite_green_radial
from .io import write_csv
from .numerics import RadialGrid, dirichlet_poisson, radial_laplacian, sphere_area

MIN_CORE_NODES = 50
LINEAR_TOL = 1e-10


@dataclass(frozen=True)
class AnnulusMesh:
    pb: PuncturedBall
    grid: RadialGrid
    N: int

    def __post_init__(self):
        r = self.grid.nodes
        if r[0] != self.pb.epsilon or r[-1] != 1.0:
            raise InvalidRange("annulus mesh must run from epsilon to 1")

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def count_in(self, lo: float, hi: float) -> int:
        r = self.r
        return int(np.count_nonzero((r >= lo) & (r <= hi)))

    def weights(self) -> np.ndarray:
        """Cell volumes (with the sphere factor) of the finite-volume scheme."""
        _, M = radial_laplacian(self.r, self.N)
        return sphere_area(self.N) * M


def annulus_mesh(pb: PuncturedBall, n: int = 20000, mu: float | None = None,
                 min_core: int = MIN_CORE_NODES) -> AnnulusMesh:
    """Geometric mesh on [eps, 1].

    The constant node ratio clusters nodes at the hole and resolves every
    scale between eps and 1, the bubble scale mu included. With ``mu`` given,
    ``n`` is raised until [eps, 10 mu] holds at least ``min_core`` nodes.
    """
    eps = pb.epsilon
    if mu is not None and 10 * mu > eps:
        span = np.log(1.0 / eps)
        core = np.log(min(10 * mu, 1.0) / eps)
        n = max(n, int(np.ceil(min_core * span / core)) + 2)
    nodes = np.geomspace(eps, 1.0, n)
    nodes[0], nodes[-1] = eps, 1.0
    return AnnulusMesh(pb, RadialGrid(nodes, "geometric", eps, 1.0), pb.N)


@dataclass(frozen=True)
class BubbleParams:
    d: float
    tau: np.ndarray
    epsilon: float
    alpha: float
    delta: float = 0.1

    def __post_init__(self):
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float))
        object.__setattr__(self, "tau", tau)
        if not 0 < self.delta < 1:
            raise InvalidRange("delta must lie in (0, 1)")
        if not self.delta <= self.d <= 1 / self.delta or np.linalg.norm(tau) > 1 / self.delta:
            raise InvalidRange(f"(d, tau) = ({self.d}, {tau}) is outside the admissible set for delta={self.delta}")

    @property
    def mu(self) -> float:
        return self.epsilon**self.alpha * self.d

    @property
    def xi(self) -> np.ndarray:
        return self.mu * self.tau


def bubble_params(pair: CriticalPair, epsilon: float, d: float, tau=None,
                  delta: float = 0.1) -> BubbleParams:
    tau = np.zeros(pair.N) if tau is None else tau
    return BubbleParams(float(d), tau, float(epsilon), pair.alpha, delta)


@dataclass(frozen=True, eq=False)
class ProjectedBubble:
    params: BubbleParams
    mesh: AnnulusMesh
    PU: np.ndarray
    PV: np.ndarray
    PcalU: np.ndarray
    U_mu: np.ndarray
    V_mu: np.ndarray
    w: np.ndarray
    linear_residual: float

    def to_csv(self, path, comment: str | None = None):
        return write_csv(path, {"r": self.mesh.r, "U_mu": self.U_mu, "V_mu": self.V_mu,
                                "PU": self.PU, "PV": self.PV, "PcalU": self.PcalU},
                         comment=comment)


def _harmonic_correction(r, N, left, right):
    """Discrete harmonic with the given end values (exactly A + B r^{2-N})."""
    return dirichlet_poisson(r, N, np.zeros_like(r), left, right)


def project_bubble(gs: GroundState, params: BubbleParams, mesh: AnnulusMesh) -> ProjectedBubble:
    """PU, PV and 𝒫U for a bubble centred at the hole (tau = 0).

    The bubble satisfies the limit system exactly, so PU and PV differ from
    it by radial harmonics fixed by the boundary values. 𝒫U = U_mu - w where
    -Delta w = V_mu^p - (PV)^p with w = U_mu on both spheres; solving for the
    small correction w keeps the projection accurate near the bubble core.
    """
    N, p = gs.pair.N, gs.pair.p
    if np.any(params.tau != 0):
        raise InvalidRange("project_bubble only handles tau = 0")
    mu, eps = params.mu, params.epsilon
    if abs(mesh.pb.epsilon - eps) > 1e-15 * eps:
        raise InvalidRange("mesh and parameters disagree on epsilon")
    if mesh.count_in(eps, 10 * mu) < MIN_CORE_NODES:
        raise UnderResolvedMesh(f"fewer than {MIN_CORE_NODES} nodes in [eps, 10 mu]")
    r = mesh.r
    U, V, _, _ = bubble_radial(gs, mu, r)
    hU, res_u = _harmonic_correction(r, N, U[0], U[-1])
    hV, res_v = _harmonic_correction(r, N, V[0], V[-1])
    PU, PV = U - hU, V - hV
    PU[[0, -1]] = 0.0
    PV[[0, -1]] = 0.0
    PV_pos = np.maximum(PV, 0.0)
    src = V**p - PV_pos**p
    w, res_w = dirichlet_poisson(r, N, src, U[0], U[-1])
    PcalU = U - w
    PcalU[[0, -1]] = 0.0
    return ProjectedBubble(params, mesh, PU, PV, PcalU, U, V, w, max(res_u, res_v, res_w))


def _quad_pieces(f, a, b, breaks):
    pts = sorted(x for x in breaks if a < x < b)
    edges = [a] + pts + [b]
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, e = quad(f, lo, hi, limit=200, epsabs=0.0, epsrel=1e-10)
        total += val
        err += e
    return total, err


def compute_A(gs: GroundState, params: BubbleParams, x: float, kappa: float = 0.05,
              C_lem21: float = 10.0) -> tuple[float, float]:
    """Hole potential 𝒜 at radius ``x`` for tau = 0, with the composite
    Green's function standing in for G_eps.

    The angular integration is done in closed form, leaving

        𝒜(x) = |S^{N-1}| int_{eps/mu}^{mu^{kappa-1}} Gbar(x, mu s) V^{p-1}(s) s ds.

    Returns ``(value, certified error)``; the error propagates the composite's
    bound C_lem21 eps^{N-2}(|x|^{2-N} + |y|^{2-N}).
    """
    N, p = gs.pair.N, gs.pair.p
    eps, mu = params.epsilon, params.mu
    if not eps < x < 1:
        raise InvalidRange(f"x = {x} must lie strictly between eps and 1")
    if not 0 < kappa < 1:
        raise InvalidRange("kappa must lie in (0, 1)")
    if np.any(params.tau != 0):
        raise InvalidRange("compute_A only handles tau = 0")
    lo, hi = eps / mu, mu ** (kappa - 1)
    S = sphere_area(N)

    def weight(s):
        return gs.V(np.array([s]))[0] ** (p - 1) * s

    def integrand(s):
        return float(composite_green_radial(N, eps, x, mu * s)) * weight(s)

    def err_integrand(s):
        return C_lem21 * eps ** (N - 2) * (x ** (2 - N) + (mu * s) ** (2 - N)) * weight(s)

    breaks = [x / mu, 1.0, 10.0, gs.grid.r_max]
    val, _ = _quad_pieces(integrand, lo, hi, breaks)
    err, _ = _quad_pieces(err_integrand, lo, hi, breaks)
    return S * val, S * err


def A_envelope(pair: CriticalPair, mu: float, x):
    """mu^{(N-2)p-N} x^{2-(N-2)p}."""
    N, p = pair.N, pair.p
    return mu ** ((N - 2) * p - N) * np.asarray(x, dtype=float) ** (2 - (N - 2) * p)


def ansatz_residual(gs: GroundState, pb: ProjectedBubble) -> float:
    """L^{(q+1)/q}(Omega_eps) norm of U_mu^q - (𝒫U)^q."""
    N, q = gs.pair.N, gs.pair.q
    s = (q + 1) / q
    diff = np.abs(pb.U_mu**q - np.maximum(pb.PcalU, 0.0) ** q)
    return float(np.sum(pb.mesh.weights() * diff**s) ** (1 / s))
