"""Exponents on the Sobolev hyperbola and the radial ground state of the
entire-space Lane-Emden system

    -Delta U = V^p,  -Delta V = U^q  in R^N,   U(0) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy.interpolate import BPoly

from .errors import (
    BracketNotFound,
    ExponentOutOfRange,
    IndexOutOfRange,
    TailNotResolved,
)
from .io import write_csv
from .numerics import RadialGrid, build_grid, integrate_radial, sphere_area


@dataclass(frozen=True)
class CriticalPair:
    N: int
    p: float
    q: float
    alpha: float
    p_star: float
    q_star: float
    gamma_N: float

    @property
    def u_decay(self) -> float:
        """Decay exponent of U at infinity."""
        if self.p < self.N / (self.N - 2):
            return (self.N - 2) * self.p - 2
        return self.N - 2.0

    @property
    def hyperbola_factor(self) -> float:
        """((N-2)p-2)(N-(N-2)p), the constant linking the tail constants."""
        N, p = self.N, self.p
        return ((N - 2) * p - 2) * (N - (N - 2) * p)

    @property
    def energy_exponent(self) -> float:
        """(N-2)p-2: the power of mu_eps carried by the reduced energy."""
        return (self.N - 2) * self.p - 2


def critical_pair(N: int, p: float, strict: bool = True) -> CriticalPair:
    """Exponent bundle for dimension ``N`` and exponent ``p``.

    ``q`` is derived from ``p`` on the Sobolev hyperbola. With ``strict``
    (the default) ``N >= 4`` and ``1 < p < (N-1)/(N-2)`` are enforced;
    ``strict=False`` only requires ``2/(N-2) < p``, which is useful for
    sanity checks against closed-form scalar bubbles.
    """
    if int(N) != N or N < 3:
        raise ExponentOutOfRange(f"dimension must be an integer >= 3, got {N}")
    N = int(N)
    p = float(p)
    if strict:
        if N < 4 or not 1 < p < (N - 1) / (N - 2):
            raise ExponentOutOfRange(
                f"need N >= 4 and 1 < p < {(N - 1) / (N - 2):g}, got N={N}, p={p}")
    elif not 2 / (N - 2) < p:
        raise ExponentOutOfRange(f"need p > 2/(N-2), got p={p}")
    q = 1.0 / ((N - 2) / N - 1.0 / (p + 1)) - 1.0
    alpha = (N - 2) / ((N - 2) * p + N - 4)
    p_star = 1.0 / (p / (p + 1) - 1.0 / N)
    q_star = 1.0 / (q / (q + 1) - 1.0 / N)
    gamma_N = 1.0 / ((N - 2) * sphere_area(N))
    return CriticalPair(N, p, q, alpha, p_star, q_star, gamma_N)


def _spow(x, e):
    return np.sign(x) * np.abs(x) ** e


def _rk4_batch(N, p, q, s, r, stop_on_crossing=True):
    """Integrate the radial system for a batch of v(0) values ``s``.

    Returns an array of shape ``(len(r), 4, len(s))`` holding (u, u', v, v').
    Trajectories are frozen once a component becomes nonpositive.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    m = s.size
    Y = np.empty((r.size, 4, m))
    Y[0] = [np.ones(m), np.zeros(m), s, np.zeros(m)]
    # Series start at the regular singular point: u'' (0) = -v0^p / N, v''(0) = -1/N.
    h = r[1] - r[0]
    cu = -s**p / (2 * N)
    cv = -np.ones(m) / (2 * N)
    Y[1] = [1 + cu * h * h, 2 * cu * h, s + cv * h * h, 2 * cv * h]

    def rhs(rr, y):
        u, du, v, dv = y
        return np.array([du, -_spow(v, p) - (N - 1) / rr * du,
                         dv, -_spow(u, q) - (N - 1) / rr * dv])

    alive = np.ones(m, dtype=bool)
    with np.errstate(all="ignore"):
        for i in range(1, r.size - 1):
            y = Y[i]
            if stop_on_crossing:
                alive &= (y[0] > 0) & (y[2] > 0)
                if not alive.any():
                    Y[i + 1:] = y
                    break
            hi = r[i + 1] - r[i]
            ri = r[i]
            k1 = rhs(ri, y)
            k2 = rhs(ri + hi / 2, y + hi / 2 * k1)
            k3 = rhs(ri + hi / 2, y + hi / 2 * k2)
            k4 = rhs(ri + hi, y + hi * k3)
            nxt = y + hi / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            Y[i + 1] = np.where(alive, nxt, y) if stop_on_crossing else nxt
    return Y


def _classify(Y, r, N, decay):
    """+1 = overshoot (v(0) too large), -1 = undershoot."""
    u, v = Y[:, 0, :], Y[:, 2, :]
    big = np.iinfo(np.int64).max
    iu = np.where((u <= 0).any(axis=0), np.argmax(u <= 0, axis=0), big)
    iv = np.where((v <= 0).any(axis=0), np.argmax(v <= 0, axis=0), big)
    out = np.where(iu < iv, 1, np.where(iv < iu, -1, 0))
    # Undecided trajectories: a growing weighted profile r^decay u at the far
    # end signals undershoot, a shrinking one overshoot.
    i0 = int(0.9 * r.size)
    w = r[[i0, -1], None] ** decay * u[[i0, -1]]
    trend = np.where(w[1] > w[0], -1, 1)
    return np.where(out == 0, trend, out)


def shoot_v0(N: int, p: float, q: float, r_shoot: np.ndarray, decay: float,
             lo: float = 0.0, hi: float = 10.0, tol: float = 1e-14,
             batch: int = 16) -> tuple[float, float]:
    """Multisection on v(0) in ``(lo, hi]``; returns the final bracket."""
    ends = _classify(_rk4_batch(N, p, q, [max(lo, 1e-8), hi], r_shoot), r_shoot, N, decay)
    if not (ends[0] == -1 and ends[1] == 1):
        raise BracketNotFound(f"no sign change of the shooting criterion on ({lo}, {hi}]")
    lo = max(lo, 1e-8)
    while hi - lo > tol * max(1.0, hi):
        s = np.linspace(lo, hi, batch + 2)[1:-1]
        c = _classify(_rk4_batch(N, p, q, s, r_shoot), r_shoot, N, decay)
        new_lo = s[c == -1].max() if (c == -1).any() else lo
        new_hi = s[c == 1].min() if (c == 1).any() else hi
        if (new_lo, new_hi) == (lo, hi):
            break
        lo, hi = new_lo, new_hi
    return lo, hi


def _tail_design(r, exponents):
    return np.column_stack([np.ones_like(r)] + [r ** (-e) for e in exponents])


def fit_tail_constant(r, weighted, exponents: Iterable[float]):
    """Fit ``weighted(r) ~ c0 + sum_j c_j r^(-e_j)``.

    Returns ``(coefficients, relative rms, drift)`` where drift is the relative
    change of ``c0`` between fits on the two halves of the window.
    """
    r = np.asarray(r, dtype=float)
    w = np.asarray(weighted, dtype=float)
    exps = list(exponents)
    A = _tail_design(r, exps)
    coef, *_ = np.linalg.lstsq(A, w, rcond=None)
    c0 = coef[0]
    rms = float(np.sqrt(np.mean((A @ coef - w) ** 2)) / abs(c0))
    mid = r.size // 2
    halves = []
    for sl in (slice(0, mid), slice(mid, None)):
        c, *_ = np.linalg.lstsq(_tail_design(r[sl], exps), w[sl], rcond=None)
        halves.append(c[0])
    drift = float(abs(halves[0] - halves[1]) / abs(c0))
    return coef, rms, drift


def _correction_exponents(pair: CriticalPair):
    """Relative exponents of the next-order tail corrections of r^k U and
    r^{N-2} V.

    Besides the generic 1/r term, r^k U picks up the harmonic r^{2-N} piece,
    which is relatively of order r^{-(N-(N-2)p)}. When U itself decays like
    r^{2-N} the first corrections are 1/r and 1/r^2.
    """
    N, p = pair.N, pair.p
    sigma = N - (N - 2) * p
    if sigma <= 0:
        u_exps = [1.0, 2.0]
    elif abs(sigma - 1.0) < 0.1:
        u_exps = [1.0]
    else:
        u_exps = [1.0, sigma]
    return u_exps, [1.0]


@dataclass(frozen=True, eq=False)
class GroundState:
    pair: CriticalPair
    grid: RadialGrid
    u: np.ndarray
    v: np.ndarray
    du: np.ndarray
    dv: np.ndarray
    a_tail: float
    b_tail: float
    shooting_v0: float
    tail_u_coef: np.ndarray = field(default_factory=lambda: np.zeros(1))
    tail_v_coef: np.ndarray = field(default_factory=lambda: np.zeros(1))
    tail_rms: tuple = (0.0, 0.0)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @cached_property
    def _splines(self):
        N, p, q = self.pair.N, self.pair.p, self.pair.q
        r = self.r
        with np.errstate(divide="ignore", invalid="ignore"):
            d2u = np.where(r > 0, -_spow(self.v, p) - (N - 1) / r * self.du, -self.v[0] ** p / N)
            d2v = np.where(r > 0, -_spow(self.u, q) - (N - 1) / r * self.dv, -1.0 / N)
        su = BPoly.from_derivatives(r, np.column_stack([self.u, self.du, d2u]))
        sv = BPoly.from_derivatives(r, np.column_stack([self.v, self.dv, d2v]))
        return su, sv, su.derivative(), sv.derivative()

    def _tail(self, rr, which, deriv=False):
        N = self.pair.N
        if which == "u":
            k, coef = self.pair.u_decay, self.tail_u_coef
            exps = [0.0] + _correction_exponents(self.pair)[0]
        else:
            k, coef = N - 2.0, self.tail_v_coef
            exps = [0.0] + _correction_exponents(self.pair)[1]
        total = np.zeros_like(rr)
        for c, e in zip(coef, exps):
            if deriv:
                total += -(k + e) * c * rr ** (-(k + e) - 1)
            else:
                total += c * rr ** (-(k + e))
        return total

    def _eval(self, rr, which, deriv=False):
        rr = np.abs(np.asarray(rr, dtype=float))
        su, sv, dsu, dsv = self._splines
        spline = {("u", False): su, ("v", False): sv, ("u", True): dsu, ("v", True): dsv}[(which, deriv)]
        inside = rr <= self.grid.r_max
        out = np.empty_like(rr)
        out[inside] = spline(rr[inside])
        if (~inside).any():
            out[~inside] = self._tail(rr[~inside], which, deriv)
        return out

    def U(self, r):
        """Radial profile U(|x|); the fitted tail is used beyond ``r_max``."""
        return self._eval(r, "u")

    def V(self, r):
        return self._eval(r, "v")

    def dU(self, r):
        return self._eval(r, "u", deriv=True)

    def dV(self, r):
        return self._eval(r, "v", deriv=True)

    @property
    def v0(self) -> float:
        return float(self.v[0])

    def identity_ratio(self) -> float:
        """b^p / (a ((N-2)p-2)(N-(N-2)p)); equals 1 for the exact ground state."""
        return self.b_tail**self.pair.p / (self.a_tail * self.pair.hyperbola_factor)

    def to_csv(self, path, comment: str | None = None):
        return write_csv(path, {"r": self.r, "u": self.u, "v": self.v,
                                "du": self.du, "dv": self.dv}, comment=comment)


def tail_constants(gs: GroundState, check: bool = True) -> tuple[float, float]:
    """Fit a_{N,p} = lim r^k U and b_{N,p} = lim r^{N-2} V on the last decade."""
    coef_u, coef_v, rms, drift = _fit_tails(gs.pair, gs.r, gs.u, gs.v)
    if check:
        _check_tail_quality(rms, drift)
    return float(coef_u[0]), float(coef_v[0])


def _fit_tails(pair, r, u, v):
    N = pair.N
    R = r[-1]
    win = r >= R / 10
    if win.sum() < 6:
        raise TailNotResolved("fewer than 6 nodes in the last decade of the grid")
    rw = r[win]
    u_exps, v_exps = _correction_exponents(pair)
    coef_u, rms_u, drift_u = fit_tail_constant(rw, rw**pair.u_decay * u[win], u_exps)
    coef_v, rms_v, drift_v = fit_tail_constant(rw, rw ** (N - 2) * v[win], v_exps)
    return coef_u, coef_v, (rms_u, rms_v), (drift_u, drift_v)


def _check_tail_quality(rms, drift):
    if max(drift) > 0.01:
        raise TailNotResolved(f"tail fit drifts by {max(drift):.2%} between window halves")
    if max(rms) > 5e-3:
        raise TailNotResolved(f"tail fit rms {max(rms):.2e} exceeds 5e-3")


def integrate_profiles(pair: CriticalPair, v0: float, r: np.ndarray):
    """Integrate from the origin with u(0)=1, v(0)=v0; returns (u, du, v, dv)."""
    Y = _rk4_batch(pair.N, pair.p, pair.q, [v0], np.asarray(r, dtype=float), stop_on_crossing=False)
    return Y[:, 0, 0], Y[:, 1, 0], Y[:, 2, 0], Y[:, 3, 0]


def shooting_grid(r_max: float, n: int, r_shoot: float | None = None):
    """Output grid (mixed uniform/geometric) and its geometric extension used
    only while shooting."""
    grid = build_grid(0.0, r_max, n, kind="mixed")
    r = grid.nodes
    ratio = r[-1] / r[-2]
    r_shoot = max(1e5, 100 * r_max) if r_shoot is None else r_shoot
    n_ext = int(np.ceil(np.log(r_shoot / r_max) / np.log(ratio)))
    ext = r_max * ratio ** np.arange(1, n_ext + 1)
    return grid, np.concatenate([r, ext])


def solve_limit_system(pair: CriticalPair, r_max: float = 1000.0, n: int = 4000,
                       tol: float = 1e-14, v0: float | None = None,
                       check: bool = True) -> GroundState:
    """Radial ground state by shooting on v(0).

    A trajectory is an overshoot when u reaches zero before v and an
    undershoot when v reaches zero first; trajectories that stay positive on
    the extended shooting range are classified by the trend of r^k u at its
    far end. Passing ``v0`` skips the shooting and integrates from that value.
    """
    if r_max < 50 or n < 2000:
        raise ValueError("solve_limit_system needs r_max >= 50 and n >= 2000")
    N, p, q = pair.N, pair.p, pair.q
    grid, r_ext = shooting_grid(r_max, n)
    if v0 is None:
        lo, hi = shoot_v0(N, p, q, r_ext, pair.u_decay, tol=tol)
        v0 = 0.5 * (lo + hi)
    u, du, v, dv = integrate_profiles(pair, v0, grid.nodes)
    if check and not (np.all(u > 0) and np.all(v > 0)):
        raise TailNotResolved("profile is not positive on [0, r_max]; raise the shooting range")
    coef_u, coef_v, rms, drift = _fit_tails(pair, grid.nodes, u, v)
    if check:
        _check_tail_quality(rms, drift)
    gs = GroundState(pair=pair, grid=grid, u=u, v=v, du=du, dv=dv,
                     a_tail=float(coef_u[0]), b_tail=float(coef_v[0]), shooting_v0=float(v0),
                     tail_u_coef=coef_u, tail_v_coef=coef_v, tail_rms=rms)
    return gs


def curvature_residuals(gs: GroundState, r_fit: float = 0.05) -> tuple[float, float]:
    """Residuals of -N u''(0) = v(0)^p and -N v''(0) = 1.

    The second derivatives come from an even polynomial fit of the computed
    profiles on ``[0, r_fit]``, not from the ODE right-hand side.
    """
    N, p = gs.pair.N, gs.pair.p
    r = gs.r
    m = r <= r_fit
    X = np.column_stack([np.ones(m.sum()), r[m] ** 2, r[m] ** 4, r[m] ** 6])
    cu, *_ = np.linalg.lstsq(X, gs.u[m], rcond=None)
    cv, *_ = np.linalg.lstsq(X, gs.v[m], rcond=None)
    u2, v2 = 2 * cu[1], 2 * cv[1]
    return float(-N * u2 - gs.v0**p), float(-N * v2 - 1.0)


def bubble_eval(gs: GroundState, mu: float, xi, x):
    """(U_{mu,xi}(x), V_{mu,xi}(x)); ``x`` may be a stack of points."""
    N, p, q = gs.pair.N, gs.pair.p, gs.pair.q
    x = np.asarray(x, dtype=float)
    xi = np.broadcast_to(np.asarray(xi, dtype=float), x.shape)
    rho = np.linalg.norm(x - xi, axis=-1) / mu
    return mu ** (-N / (q + 1)) * gs.U(rho), mu ** (-N / (p + 1)) * gs.V(rho)


def bubble_radial(gs: GroundState, mu: float, r):
    """Radial bubble centred at the origin: (U_mu(r), V_mu(r), U_mu'(r), V_mu'(r))."""
    N, p, q = gs.pair.N, gs.pair.p, gs.pair.q
    rho = np.asarray(r, dtype=float) / mu
    cu, cv = mu ** (-N / (q + 1)), mu ** (-N / (p + 1))
    return cu * gs.U(rho), cv * gs.V(rho), cu / mu * gs.dU(rho), cv / mu * gs.dV(rho)


def kernel_eval(gs: GroundState, l: int, mu: float, xi, x):
    """Kernel elements of the linearized system at (mu, xi).

    ``l = 0`` is the dilation direction, ``l = 1..N`` the translations.
    """
    N, p, q = gs.pair.N, gs.pair.p, gs.pair.q
    if not 0 <= l <= N:
        raise IndexOutOfRange(f"kernel index {l} outside 0..{N}")
    x = np.asarray(x, dtype=float)
    y = (x - np.broadcast_to(np.asarray(xi, dtype=float), x.shape)) / mu
    rho = np.linalg.norm(y, axis=-1)
    dU, dV = gs.dU(rho), gs.dV(rho)
    if l == 0:
        psi = rho * dU + N * gs.U(rho) / (q + 1)
        phi = rho * dV + N * gs.V(rho) / (p + 1)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            direction = np.where(rho > 0, y[..., l - 1] / np.where(rho > 0, rho, 1.0), 0.0)
        psi, phi = dU * direction, dV * direction
    return mu ** (-N / (q + 1) - 1) * psi, mu ** (-N / (p + 1) - 1) * phi


def moment_integrals(gs: GroundState) -> tuple[float, float]:
    """(int U^{q+1}, int U^q) over R^N."""
    k, q, N = gs.pair.u_decay, gs.pair.q, gs.pair.N
    I1 = integrate_radial(gs.u ** (q + 1), gs.grid, N, tail_order=k * (q + 1))
    I0 = integrate_radial(gs.u**q, gs.grid, N, tail_order=k * q)
    return I1, I0


def partial_moment(gs: GroundState, power: float, r_lo: float = 0.0, r_hi: float = np.inf,
                   n: int = 4001) -> float:
    """int_{r_lo < |y| < r_hi} U^power dy, evaluated on a dedicated grid."""
    N = gs.pair.N
    k = gs.pair.u_decay
    if r_hi <= r_lo:
        return 0.0
    if np.isinf(r_hi):
        inner = partial_moment(gs, power, r_lo, max(gs.grid.r_max, 2 * max(r_lo, 1.0)), n)
        R = max(gs.grid.r_max, 2 * max(r_lo, 1.0))
        tail = gs.U(np.array([R]))[0] ** power * R**N / (k * power - N)
        return inner + sphere_area(N) * float(tail)
    if r_lo == 0.0:
        r = np.concatenate([np.linspace(0, min(1.0, r_hi), n)[:-1],
                            np.geomspace(min(1.0, r_hi), r_hi, n)]) if r_hi > 1 else np.linspace(0, r_hi, n)
    else:
        r = np.geomspace(r_lo, r_hi, n)
    return integrate_radial(gs.U(r) ** power, r, N)
