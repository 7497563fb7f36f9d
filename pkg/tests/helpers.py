"""Independent numerical oracles shared by the test modules."""

from __future__ import annotations

import numpy as np
from scipy.linalg import block_diag, expm

from sea_impedance.lti import StateSpace


def random_stable(rng, n, m=1, p=1, min_damping=0.15):
    """Block-diagonal stable A with real and lightly damped complex modes."""
    blocks = []
    k = 0
    while k < n:
        if n - k >= 2 and rng.random() < 0.5:
            wn = 10 ** rng.uniform(-1, 1)
            z = rng.uniform(min_damping, 0.9)
            blocks.append(np.array([[-z * wn, wn * np.sqrt(1 - z * z)], [-wn * np.sqrt(1 - z * z), -z * wn]]))
            k += 2
        else:
            blocks.append(np.array([[-(10 ** rng.uniform(-1, 1))]]))
            k += 1
    A = block_diag(*blocks)
    T = rng.standard_normal((n, n)) + 2 * np.eye(n)
    A = np.linalg.solve(T, A @ T)
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)), np.zeros((p, m)))


def impulse_energy(sys, T=20.0, h=1e-4):
    """Trapezoid quadrature of ||C e^{At} B||_F^2 using the exact step map."""
    Phi = expm(sys.A * h)
    x = sys.B.copy()
    total = 0.0
    prev = float(np.sum((sys.C @ x) ** 2))
    for _ in range(int(round(T / h))):
        x = Phi @ x
        cur = float(np.sum((sys.C @ x) ** 2))
        total += 0.5 * h * (prev + cur)
        prev = cur
    return np.sqrt(total)
