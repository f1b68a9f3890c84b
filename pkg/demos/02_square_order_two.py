"""An order-two boundary point on the unit square.

The eigenfunction sin(pi x1) sin(2 pi x2) has a nodal line x1 = 1/2 that meets
the edge x2 = 0. At that corner of the nodal set the solution vanishes to
order two, and the blow-up limit is a multiple of y1*y2.

The Fourier coefficients of lambda^-2 W(lambda .) against the half-sphere
eigenfunctions show which mode survives.

Run:  python demos/02_square_order_two.py   (about half a minute)
"""

import numpy as np

from almgren import blowup_analysis, frequency_profile, get_scenario, setup
from almgren.sphere_eig import eigenspace_of_degree

st = setup(get_scenario("order2_square"))
prof = frequency_profile(st.problem, st.radii)
print(f"gamma = {prof.gamma:.8f}, m0 = {prof.m0}, classified = {prof.classified}")

Y = eigenspace_of_degree(2, 2, 0.5).functions[0]
print(f"degree-2 eigenfunction: {Y.polynomial}")

bl = blowup_analysis(st.problem, prof.m0, st.lambdas)
scaled = bl.table * bl.lambdas[:, None] ** (-prof.m0)
print("\n lambda     " + "  ".join(f"{lab:>10s}" for lab in bl.labels))
for lam, row in zip(bl.lambdas[::2], scaled[::2]):
    print(f" {lam:8.2e}  " + "  ".join(f"{v:10.3e}" for v in row))
print(f"\ndominance of phi_2_1 at the smallest lambda: {bl.dominance:.3g}")
print(f"beta = {bl.beta[0]:.10f}, route gap {bl.route_gap:.1e}")
print(f"Bessel inequality held at every lambda: {bl.bessel_ok}")
print(f"trace discrepancy: {np.array2string(bl.trace[::3], precision=2)}")
