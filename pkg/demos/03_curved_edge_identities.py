"""Identities on a curved boundary.

The domain edge is the parabola x2 = x1^2/4. Straightening it produces a
coefficient matrix A that differs from the identity by O(|z|), a volume
factor mu = 1 + O(|z|) and a field beta(z) = z + O(|z|^2). We fit those
rates, check the seam condition on the flat boundary, and evaluate the
Pohozaev identity under quadrature refinement.

Run:  python demos/03_curved_edge_identities.py
"""

import numpy as np

from almgren import get_scenario, pohozaev_check, setup
from almgren.diagnostics import derivative_identity_check, pohozaev_convergence
from almgren.straightening import verify_expansions

st = setup(get_scenario("parabola_edge"))
cf, prob, r0 = st.problem.cf, st.problem, st.domain.r0

rep = verify_expansions(cf, r0 * np.array([0.5, 0.25, 0.125, 0.0625]))
print("fitted decay rates of the deviations from the flat case")
for key, slope in rep.slopes.items():
    print(f"  {key:12s} {slope:6.3f}")
print(f"seam defect a_Nj(y', 0): {cf.seam_defect(10_000):.1e}")

factors, gaps, order = pohozaev_convergence(prob, 0.2)
print("\nPohozaev relative gap at r = 0.2 under refinement")
for f, g in zip(factors, gaps):
    print(f"  nodes x{f:<6g} {g:.2e}")
print(f"  fitted order {order:.1f}")
print(f"gap at r = {0.5 * r0:g}: {pohozaev_check(prob, 0.5 * r0):.2e}")

chk = derivative_identity_check(prob, 0.4 * r0)
print("\nH' and D' against their surface forms (gap / envelope)")
for key, val in chk.slack.items():
    print(f"  {key:7s} {val:.3e}")
