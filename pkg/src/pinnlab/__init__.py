"""Research engine for Gaussian-activated and row-equilibrated PINNs.

Subpackage map:

* ``linalg``      dense eigensolver / SVD / determinant / Lanczos substrate
* ``precond``     row equilibration and condition-number bounds
* ``activations`` activation kinds with analytic derivatives to third order
* ``network``     feedforward nets, second-order jets, reverse gradients
* ``pde``         benchmark problems, Cole-Hopf oracle, samplers
* ``ntk``         empirical NTK blocks, width sweeps, Lipschitz estimates
* ``training``    full-batch Adam, metrics, Hessian and landscape diagnostics
* ``experiments`` config-driven runner and architecture presets
"""

__version__ = "0.1.0"

from . import activations, linalg, network, ntk, pde, precond, training  # noqa: F401
