"""Train a Gaussian-activated PINN on the 1-D Poisson benchmark.

Solves -u'' = 25 pi^2 sin(5 pi x) on [-1, 1] with u(+-1) = 0 (exact solution
sin(5 pi x)) twice: once with a plain Gaussian-activated network (G-PINN) and
once with row-equilibrated inner weights (EG-PINN). Prints the loss/error
trajectory of both. Expect a couple of minutes of runtime.
"""

import numpy as np

from pinnlab import activations as act
from pinnlab import network as nw
from pinnlab.pde import poisson_problem
from pinnlab.training import TrainConfig, make_samples, train

EPOCHS = 3000
LR = 1e-3

problem = poisson_problem("benchmark")
for label, equilibrate in (("G-PINN ", False), ("EG-PINN", True)):
    net = nw.init_he((1, 128, 128, 1), act.gaussian(0.2), seed=1,
                     equilibrate_inner=equilibrate)
    samples = make_samples(problem, n_boundary=2, n_residual=1000, seed=1)
    config = TrainConfig(epochs=EPOCHS, learning_rate=LR, seed=1,
                         metric_stride=500, test_grid=(1001,))
    print(f"--- {label} (Gaussian s=0.2, widths 1-128-128-1, lr={LR:g}) ---")
    records, net = train(net, problem, samples, config)
    for r in records:
        print(f"  epoch {r.epoch:5d}  loss {r.loss_total:10.3e}  "
              f"rel L2 test {r.rel_l2_test_error:9.3e}")
