"""Condition-number bounds under row equilibration, on random matrices.

Checks, per draw: the determinant-based upper bound U(A) dominates kappa(A);
equilibrating multiplies U by an exactly-predicted factor <= 1; the row-angle
lower bounds hold; and equilibration lowers the lower bound too. Also tallies
how often a random positive diagonal scaling beats row equilibration (rare,
and never by more than sqrt(n)).
"""

import numpy as np

from pinnlab.precond import verify_precond_suite

report = verify_precond_suite(n_matrices=2000, n_diagonals=50, size=6, seed=42)
checked = report["checked"]
print(f"matrices: {report['n_matrices']}, diagonals each: {report['n_diagonals']}")
for key, bad in report["violations"].items():
    print(f"  {key:26s} {bad:6d} violations / {checked[key]} checks")
print(f"worst kappa(EA)/kappa(DA) ratio: {report['worst_vds_ratio']:.4f} "
      f"(sqrt(n) = {np.sqrt(report['size']):.3f})")
