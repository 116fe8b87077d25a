"""Command-line experiment runner.

    python -m lane_emden_hole groundstate --config run.yaml --out results/
    python -m lane_emden_hole landscape|project|sweep|report ...

Exit status: 0 on success, 1 on a numerical failure, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .ansatz import (
    A_envelope,
    annulus_mesh,
    ansatz_residual,
    bubble_params,
    compute_A,
    project_bubble,
)
from .annulus_solver import (
    continuation_sweep,
    interior_maxima,
    profile_similarity,
    stencil_residual,
    write_sweep_csv,
)
from .errors import ExponentOutOfRange, InvalidRange, LaneEmdenError
from .ground_state import critical_pair, curvature_residuals, moment_integrals, solve_limit_system
from .greens import PuncturedBall, gamma_tilde, h_tilde_center
from .io import write_record
from .numerics import fit_power_law
from .reduced_energy import (
    energy_breakdown,
    energy_constants,
    hessian_signature,
    landscape,
    refine_saddle,
    saddle_closed_form,
    theta,
    write_landscape_csv,
)

INPUT_ERRORS = (ExponentOutOfRange, InvalidRange)


class ConfigError(ValueError):
    code = "invalid-config"


@dataclass
class RunConfig:
    N: int = 5
    p: float = 1.2
    eps_list: list = field(default_factory=lambda: [1e-2, 3e-3, 1e-3, 3e-4, 1e-4])
    d: object = "saddle"
    r_max: float = 1000.0
    n_grid: int = 4000
    n_annulus: int = 20000
    kappa: float = 0.05
    C_lem21: float = 10.0
    output_dir: str = "results"
    seed: int = 0
    rate_tol: float = 0.15
    energy_rate_tol: float = 0.25

    def validate(self):
        critical_pair(self.N, self.p)
        eps = [float(e) for e in self.eps_list]
        if len(eps) < 1 or any(e <= 0 for e in eps):
            raise ConfigError("eps_list must hold positive values")
        if any(b >= a for a, b in zip(eps[:-1], eps[1:])):
            raise ConfigError("eps_list must be decreasing")
        if eps[0] > 0.1:
            raise ConfigError("eps_list must start at or below 1e-1")
        if not (self.d == "saddle" or (isinstance(self.d, (int, float)) and self.d > 0)):
            raise ConfigError("d must be 'saddle' or a positive number")
        if self.r_max < 50 or self.n_grid < 2000:
            raise ConfigError("need r_max >= 50 and n_grid >= 2000")
        if self.n_annulus < 100:
            raise ConfigError("n_annulus must be at least 100")
        if not 0 < self.kappa < 1:
            raise ConfigError("kappa must lie in (0, 1)")
        if self.C_lem21 <= 0:
            raise ConfigError("C_lem21 must be positive")
        self.eps_list = eps
        return self

    def digest(self) -> str:
        """Hash of everything that affects results (the output directory is
        excluded so that reruns elsewhere stay byte-identical)."""
        payload = {k: v for k, v in asdict(self).items() if k != "output_dir"}
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def header(self) -> str:
        return f"config-sha256={self.digest()} lane_emden_hole={__version__}"


def load_config(path: str | None) -> RunConfig:
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
    # Nested sections are flattened: {"sweep": {"eps_list": ...}} works too.
    flat = {}
    for key, val in data.items():
        if isinstance(val, dict):
            flat.update(val)
        else:
            flat[key] = val
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return RunConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


class _Session:
    """Lazily computed shared objects for one CLI invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.pair = critical_pair(cfg.N, cfg.p)
        self._gs = self._ec = self._h0 = None

    @property
    def gs(self):
        if self._gs is None:
            self._gs = solve_limit_system(self.pair, self.cfg.r_max, self.cfg.n_grid)
        return self._gs

    @property
    def h0(self):
        if self._h0 is None:
            self._h0 = h_tilde_center(self.pair)
        return self._h0

    @property
    def ec(self):
        if self._ec is None:
            self._ec = energy_constants(self.gs, self.h0)
        return self._ec

    @property
    def d(self) -> float:
        return saddle_closed_form(self.ec, self.gs) if self.cfg.d == "saddle" else float(self.cfg.d)


def cmd_groundstate(s: _Session, out: Path) -> dict:
    gs, pair = s.gs, s.pair
    int_q1, int_q = moment_integrals(gs)
    cu, cv = curvature_residuals(gs)
    gs.to_csv(out / "groundstate.csv", comment=s.cfg.header())
    rec = {
        "N": pair.N, "p": pair.p, "q": pair.q, "alpha": pair.alpha,
        "v0": gs.v0, "a_tail": gs.a_tail, "b_tail": gs.b_tail,
        "tail_identity_ratio": gs.identity_ratio(),
        "int_U_q1": int_q1, "int_U_q": int_q,
        "curvature_residual_u": cu, "curvature_residual_v": cv,
        "tail_fit_rms": list(gs.tail_rms),
    }
    write_record(out / "constants.json", rec, comment=s.cfg.header())
    return rec


def cmd_landscape(s: _Session, out: Path) -> dict:
    gs, ec, pair = s.gs, s.ec, s.pair
    N = pair.N
    d_closed = saddle_closed_form(ec, gs)
    z, newton_iters = refine_saddle(ec, gs, np.concatenate([[2 * d_closed], 0.1 * np.eye(N)[0]]))
    n_pos, n_neg, eig = hessian_signature(ec, gs)
    at_saddle = theta(ec, gs, d_closed, np.zeros(N))
    k = pair.energy_exponent
    # The derivative in d vanishes exactly when both terms balance.
    lhs = ec.c1 * k * d_closed ** (k - 1)
    rhs = ec.c2 * (N - 2) * gs.v0 * d_closed ** (1 - N)
    pts = landscape(ec, gs, d_closed * np.geomspace(0.25, 4.0, 41), np.linspace(0.0, 2.0, 21))
    write_landscape_csv(out / "landscape.csv", pts, N, comment=s.cfg.header())
    rec = {
        "c0": ec.c0, "c1": ec.c1, "c2": ec.c2, "h_tilde_0": s.h0, "gamma_tilde": gamma_tilde(pair),
        "d_tilde": d_closed, "d_newton": float(z[0]), "tau_newton": z[1:],
        "newton_iterations": newton_iters,
        "d_agreement": abs(z[0] - d_closed) / d_closed,
        "theta_at_saddle": at_saddle.theta,
        "grad_norm_at_saddle": float(np.linalg.norm(at_saddle.grad)),
        "stationarity_balance": abs(lhs - rhs) / rhs,
        "hessian_eigenvalues": eig, "signature": f"{n_pos}+,{n_neg}-",
        "signature_ok": bool(n_pos == 1 and n_neg == N),
    }
    write_record(out / "saddle.json", rec, comment=s.cfg.header())
    return rec


def cmd_project(s: _Session, out: Path) -> dict:
    gs, pair, cfg = s.gs, s.pair, s.cfg
    d = s.d
    delta = min(d, 1 / d) / 2
    rows = []
    for eps in cfg.eps_list:
        bp = bubble_params(pair, eps, d, delta=delta)
        pbal = PuncturedBall(eps, pair.N, cfg.C_lem21)
        mesh = annulus_mesh(pbal, cfg.n_annulus, bp.mu)
        proj = project_bubble(gs, bp, mesh)
        proj.to_csv(out / f"projection_eps_{eps:.0e}.csv", comment=cfg.header())
        eb = energy_breakdown(gs, proj, s.ec.c0)
        radii = np.geomspace(2 * eps, 0.9, 20)
        A = [compute_A(gs, bp, float(x), cfg.kappa, cfg.C_lem21) for x in radii]
        ratio = np.array([a for a, _ in A]) / A_envelope(pair, bp.mu, radii)
        rows.append({
            "eps": eps, "mu": bp.mu, "d": d,
            "J_minus_c0": eb.J_minus_c0,
            "scaled_energy": eb.J_minus_c0 / eps ** (pair.alpha * pair.energy_exponent),
            "theta": theta(s.ec, gs, d, np.zeros(pair.N)).theta,
            "cross_term_consistency": eb.consistency,
            "ansatz_residual": ansatz_residual(gs, proj),
            "linear_residual": proj.linear_residual,
            "A_envelope_constant": float(np.max(ratio)),
        })
    rec = {"projections": rows}
    if len(rows) >= 3:
        fit = fit_power_law([(r["eps"], r["ansatz_residual"]) for r in rows])
        rec["ansatz_residual_exponent"] = -fit.exponent
        rec["ansatz_residual_exponent_bound"] = 0.9 * pair.alpha * pair.energy_exponent
    write_record(out / "projection.json", rec, comment=cfg.header())
    return rec


def cmd_sweep(s: _Session, out: Path) -> dict:
    gs, pair, cfg = s.gs, s.pair, s.cfg
    rep = continuation_sweep(pair, cfg.eps_list, s.d, gs, cfg.n_annulus, c0=s.ec.c0)
    write_sweep_csv(out / "sweep.csv", rep, gs, comment=cfg.header())
    per_eps = []
    for r in rep.results:
        sim = profile_similarity(r, gs, s.d)
        mu = r.epsilon**pair.alpha * s.d
        per_eps.append({
            "eps": r.epsilon, "stencil_residual": stencil_residual(r),
            "interior_maxima": list(interior_maxima(r)),
            "similarity_distance": sim.distance, "mu_best_ratio": sim.mu_ratio,
            "sup_v_scaled": r.sup_v * mu ** (pair.N / (pair.p + 1)) / gs.v0,
        })
    rec = {
        "predicted_rate": rep.predicted_rate,
        "measured_rate": rep.rate_fit.exponent,
        "rate_relative_error": rep.rate_error(),
        "rate_pass": bool(len(rep.results) >= 3 and rep.rate_error() <= cfg.rate_tol),
        "predicted_energy_rate": rep.predicted_energy_rate,
        "measured_energy_rate": rep.energy_fit.exponent if rep.energy_fit else None,
        "energy_rate_relative_error": rep.energy_rate_error() if rep.energy_fit else None,
        "energy_rate_pass": bool(rep.energy_fit is not None and rep.energy_rate_error() <= cfg.energy_rate_tol),
        "failures": [{"eps": e, "error": m} for e, m in rep.failures],
        "points": per_eps,
    }
    write_record(out / "sweep_report.json", rec, comment=cfg.header())
    if rep.failures:
        raise _PartialFailure(f"sweep stopped early: {rep.failures[0][1]}")
    return rec


class _PartialFailure(LaneEmdenError):
    code = "partial-failure"


def cmd_report(s: _Session, out: Path) -> dict:
    """Run every stage and write a plain-text summary."""
    gsr = cmd_groundstate(s, out)
    lsr = cmd_landscape(s, out)
    pjr = cmd_project(s, out)
    swr = cmd_sweep(s, out)
    lines = [
        f"# {s.cfg.header()}",
        f"N={s.pair.N} p={s.pair.p} q={s.pair.q:.12g} alpha={s.pair.alpha:.12g}",
        f"tail identity b^p/(a k sigma) = {gsr['tail_identity_ratio']:.8f}",
        f"saddle d~ = {lsr['d_tilde']:.10g}, signature {lsr['signature']}",
        f"sup_u slope {swr['measured_rate']:.6f} vs predicted {swr['predicted_rate']:.6f} "
        f"({'pass' if swr['rate_pass'] else 'FAIL'})",
    ]
    if swr["measured_energy_rate"] is not None:
        lines.append(f"energy slope {swr['measured_energy_rate']:.6f} vs predicted "
                     f"{swr['predicted_energy_rate']:.6f} ({'pass' if swr['energy_rate_pass'] else 'FAIL'})")
    for row in pjr["projections"]:
        lines.append(f"eps={row['eps']:.0e}: (J-c0)/mu_eps^k = {row['scaled_energy']:.6g}, "
                     f"Theta = {row['theta']:.6g}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return {"lines": lines}


COMMANDS = {
    "groundstate": cmd_groundstate,
    "landscape": cmd_landscape,
    "project": cmd_project,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
    parser = argparse.ArgumentParser(prog="lane-emden-hole", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=(fn.__doc__ or name).splitlines()[0])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg.output_dir = args.out
        cfg.validate()
    except (ConfigError, *INPUT_ERRORS) as exc:
        print(f"error: {getattr(exc, 'code', 'invalid-input')}: {exc}", file=sys.stderr)
        return 2
    if args.dry_run:
        print(f"# {cfg.header()}")
        print(yaml.safe_dump(asdict(cfg), sort_keys=True), end="")
        return 0
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        COMMANDS[args.command](_Session(cfg), out)
    except INPUT_ERRORS as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 2
    except LaneEmdenError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    print(f"{args.command}: wrote results to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
