"""Randomized audit of the weighted Hardy, Poincare and trace inequalities.

Hardy and Poincare have explicit constants, so they are checked directly on
100 seeded random polynomials. The Sobolev-trace constant is unknown; it is
calibrated on one batch and then tested, with a 10% margin, on a batch the
calibration never saw.

Run:  python demos/04_inequality_audit.py   (under a minute)
"""

from almgren import inequality_audit

summary = inequality_audit(n=100)
print("calibrated trace constants:")
for key, c in summary.constants.items():
    N, s = key.split(",")
    print(f"  N={N} s={s}: S = {c:.4f}")
print()
for tag in summary.counts:
    print(f"{tag:14s} {summary.violations[tag]:3d} violations / {summary.counts[tag]}  worst lhs/rhs {summary.worst_ratio[tag]:.3f}")
print("\naudit", "passed" if summary.passed else "FAILED")
