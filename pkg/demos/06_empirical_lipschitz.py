"""Empirical Lipschitz constant of a Gaussian network versus head width.

The maximum input-Jacobian norm over a standard-normal sample grows far
slower than sqrt(width) as the last hidden layer widens, the regularity that
the NTK analysis relies on.
"""

import numpy as np

from pinnlab.activations import gaussian
from pinnlab.network import init_he
from pinnlab.ntk import empirical_lipschitz

prev = None
for n3 in (64, 128, 256, 512, 1024):
    net = init_he((200, 64, 64, n3, 1), gaussian(0.1), seed=5)
    val = empirical_lipschitz(net, n_samples=300, seed=11)
    ratio = "" if prev is None else f"  ratio vs previous: {val / prev:.3f} (sqrt(2) = 1.414)"
    print(f"n3 = {n3:5d}: ELip = {val:9.4f}{ratio}")
    prev = val
