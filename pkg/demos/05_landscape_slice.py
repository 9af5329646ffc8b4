"""Loss-landscape slice along the two most curved Hessian eigenvectors.

Trains a small Gaussian PINN briefly on the Poisson benchmark, estimates the
top Hessian eigenpairs with Lanczos over finite-difference Hessian-vector
products, and prints the loss surface on the spanned plane.
"""

import numpy as np

from pinnlab import activations as act
from pinnlab import network as nw
from pinnlab.pde import poisson_problem
from pinnlab.training import (TrainConfig, landscape_slice, make_samples,
                              pinn_loss_closures, train)

problem = poisson_problem("benchmark")
net = nw.init_he((1, 32, 32, 1), act.gaussian(0.2), seed=3)
samples = make_samples(problem, 2, 200, seed=3)
train(net, problem, samples, TrainConfig(epochs=400, learning_rate=1e-3,
                                         metric_stride=400, test_grid=(128,)))

loss, loss_grad = pinn_loss_closures(net, problem, samples)
slc = landscape_slice(loss, loss_grad, nw.flat_params(net),
                      grid_half_width=0.4, grid_points=7, lanczos_iters=12, seed=0)
print(f"top-2 Hessian eigenvalues: {slc.top_eigenvalues[0]:.3e}, {slc.top_eigenvalues[1]:.3e}")
print(f"center loss: {slc.center_loss:.4e}")
grid = slc.grid.reshape(7, 7, 3)
print("loss surface (rows alpha, cols beta):")
for row in grid:
    print("  " + " ".join(f"{v:9.3e}" for v in row[:, 2]))
