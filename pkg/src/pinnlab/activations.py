"""Activation functions with analytic derivatives up to third order.

Third derivatives are needed because reverse accumulation through a
second-order forward pass differentiates the activation's second derivative
once more. Conventions:

* gaussian(s):  x -> exp(-x^2 / s^2); |phi'| <= 2/s everywhere, with the
  maximum sqrt(2)/s * exp(-1/2) attained at x = -s/sqrt(2).
* sine(f):      x -> sin(f x)
* wavelet(s):   x -> sin(x) * exp(-x^2 / (2 s^2)), a real Gabor atom
* tanh, identity as usual
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("gaussian", "tanh", "sine", "wavelet", "identity")


@dataclass(frozen=True)
class Activation:
    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind in ("gaussian", "sine", "wavelet") and not self.param > 0.0:
            raise ValueError(f"{self.kind} needs a positive parameter, got {self.param}")

    def label(self) -> str:
        if self.kind in ("gaussian", "wavelet"):
            return f"{self.kind}(s={self.param:g})"
        if self.kind == "sine":
            return f"sine(f={self.param:g})"
        return self.kind


def gaussian(s: float) -> Activation:
    return Activation("gaussian", float(s))


def tanh() -> Activation:
    return Activation("tanh")


def sine(f: float) -> Activation:
    return Activation("sine", float(f))


def wavelet(s: float) -> Activation:
    return Activation("wavelet", float(s))


def identity() -> Activation:
    return Activation("identity")


def derivs3(act: Activation, z, order: int = 3):
    """(value, d1, d2, d3) of the activation at z, elementwise.

    `order` caps the highest derivative actually computed (0..3); higher
    entries come back as None. Training forward passes need order 2, reverse
    accumulation through second-order jets needs 3, plain evaluation 0.
    """
    z = np.asarray(z, dtype=np.float64)
    if act.kind == "identity":
        one = np.ones_like(z) if order >= 1 else None
        zero = np.zeros_like(z) if order >= 2 else None
        zero3 = np.zeros_like(z) if order >= 3 else None
        return z.copy(), one, zero, zero3
    if act.kind == "gaussian":
        a = -2.0 / (act.param * act.param)
        E = np.exp(0.5 * a * z * z)  # exp(-z^2/s^2)
        if order == 0:
            return E, None, None, None
        az = a * z
        d1 = az * E
        if order == 1:
            return E, d1, None, None
        az2 = az * az
        d2 = (a + az2) * E
        d3 = az * ((3.0 * a + az2) * E) if order >= 3 else None
        return E, d1, d2, d3
    if act.kind == "tanh":
        t = np.tanh(z)
        if order == 0:
            return t, None, None, None
        sech2 = 1.0 - t * t
        if order == 1:
            return t, sech2, None, None
        d2 = -2.0 * t * sech2
        d3 = sech2 * (6.0 * t * t - 2.0) if order >= 3 else None
        return t, sech2, d2, d3
    if act.kind == "sine":
        f = act.param
        s = np.sin(f * z)
        if order == 0:
            return s, None, None, None
        c = np.cos(f * z)
        return (s, f * c,
                -(f * f) * s if order >= 2 else None,
                -(f ** 3) * c if order >= 3 else None)
    # wavelet: sin(z) * exp(-z^2/(2 s^2))
    s2 = act.param * act.param
    E = np.exp(-z * z / (2.0 * s2))
    sn = np.sin(z)
    v = sn * E
    if order == 0:
        return v, None, None, None
    cs = np.cos(z)
    u = z / s2
    d1 = E * (cs - u * sn)
    if order == 1:
        return v, d1, None, None
    d2 = E * ((u * u - 1.0 - 1.0 / s2) * sn - 2.0 * u * cs)
    if order == 2:
        return v, d1, d2, None
    d3 = E * ((-u ** 3 + 3.0 * z / (s2 * s2) + 3.0 * u) * sn + (3.0 * u * u - 1.0 - 3.0 / s2) * cs)
    return v, d1, d2, d3


def activation_eval(act: Activation, x):
    """(value, first derivative, second derivative) at x."""
    v, d1, d2, _ = derivs3(act, x)
    return v, d1, d2
