"""From the ground state to the blow-up rate, at (N, p) = (5, 1.2).

1. Solve the limit system and the nonlinear regular part at the origin.
2. Assemble the reduced-energy constants and locate the saddle d~.
3. Solve the annulus problem along eps = 1e-2 ... 1e-4 by continuation,
   starting from the projected bubble, and fit the decay of sup u.

    python3 demos/blowup_sweep.py
"""

import numpy as np

from lane_emden_hole.annulus_solver import continuation_sweep, profile_similarity
from lane_emden_hole.greens import h_tilde_center
from lane_emden_hole.ground_state import critical_pair, solve_limit_system
from lane_emden_hole.reduced_energy import energy_constants, hessian_signature, saddle_point, theta

pair = critical_pair(5, 1.2)
gs = solve_limit_system(pair)
h0 = h_tilde_center(pair)
ec = energy_constants(gs, h0)
d, tau = saddle_point(ec, gs)
n_pos, n_neg, _ = hessian_signature(ec, gs)
print(f"H~_0(0) = {h0:.10f}")
print(f"c0 = {ec.c0:.6f}, c1 = {ec.c1:.6f}, c2 = {ec.c2:.6f}")
print(f"saddle d~ = {d:.9f}, Theta(d~, 0) = {theta(ec, gs, d, tau).theta:.6f}, "
      f"Hessian signature {n_pos}+ / {n_neg}-")

eps_list = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
rep = continuation_sweep(pair, eps_list, d, gs, c0=ec.c0)
print("\n     eps        sup_u        argmax_r   Newton  mu_best/(eps^alpha d~)")
for sr in rep.results:
    sim = profile_similarity(sr, gs, d_ref=d)
    print(f"  {sr.epsilon:.0e}  {sr.sup_u:12.6f}  {sr.argmax_r:.4e}  {sr.newton_iters:6d}  {sim.mu_ratio:.4f}")

print(f"\nsup_u slope {rep.rate_fit.exponent:.5f}, predicted {rep.predicted_rate:.5f} "
      f"({rep.rate_error():.1%} off)")
print(f"energy slope {rep.energy_fit.exponent:.5f}, predicted {rep.predicted_energy_rate:.5f} "
      f"({rep.energy_rate_error():.1%} off)")
print(f"scaled sup_u * eps^(alpha N/(q+1)): "
      f"{np.array([sr.sup_u * sr.epsilon ** (-rep.predicted_rate) for sr in rep.results]).round(4)}")
