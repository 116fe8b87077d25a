"""Ground state of the limit system at (N, p) = (5, 1.2).

Shoots for v(0), fits the tail constants, checks the tail identity and the
curvature identities at the origin, and prints a few profile values.

    python3 demos/ground_state_tour.py
"""

import numpy as np

from lane_emden_hole.ground_state import critical_pair, curvature_residuals, moment_integrals, solve_limit_system

pair = critical_pair(5, 1.2)
print(f"critical partner q = {pair.q:.6f}, blow-up exponent alpha = {pair.alpha:.6f}")

gs = solve_limit_system(pair)
print(f"v(0) = {gs.v0:.15f}")
print(f"tail constants a = {gs.a_tail:.8f}, b = {gs.b_tail:.8f}")
print(f"b^p / (a ((N-2)p-2)(N-(N-2)p)) = {gs.identity_ratio():.8f}")

cu, cv = curvature_residuals(gs)
print(f"curvature residuals at the origin: {cu:.2e}, {cv:.2e}")

q1, q0 = moment_integrals(gs)
print(f"int U^(q+1) = {q1:.8f}, int U^q = {q0:.8f}")

r = np.array([0.0, 1.0, 10.0, 100.0, 1000.0])
for ri, u, v in zip(r, gs.U(r), gs.V(r)):
    print(f"  r = {ri:7.1f}   U = {u:.6e}   V = {v:.6e}")
