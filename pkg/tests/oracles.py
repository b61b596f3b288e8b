"""Reference solutions computed without the package's discretization.

Flat-strip symbol m(k) (Psi_0[0] cos kx = -m(k) cos kx) from two routes:

* ``symbol_closed_form``: stream function in the basis e^{kz}, e^{-kz},
  z e^{kz}, z e^{-kz}; the 4x4 boundary system is solved in 40-digit
  arithmetic.
* ``symbol_collocation``: the same fourth-order ODE written as a first-order
  system and collocated on Chebyshev points (numpy.polynomial).

Boundary conditions for (d^2 - k^2)^2 psi = 0 on -b < z < 0, u = psi',
w = k^2 psi (per cos/sin pair): no slip psi(-b) = psi'(-b) = 0; zero shear
psi'' + k^2 psi = 0 and unit normal stress psi''' - 3 k^2 psi' = 1 at z = 0.
"""

from __future__ import annotations

import mpmath as mp
import numpy as np
from numpy.polynomial import chebyshev as C


def symbol_closed_form(k: int, b: float = 1.0, dps: int = 40) -> float:
    with mp.workdps(dps):
        k = mp.mpf(k)
        b = mp.mpf(b)

        def basis(z, order):
            # d^n/dz^n of e^{kz}, e^{-kz}, z e^{kz}, z e^{-kz}
            ep, em = mp.e ** (k * z), mp.e ** (-k * z)
            return [
                k**order * ep,
                (-k) ** order * em,
                (z * k**order + order * k ** (order - 1) if order else z) * ep,
                (z * (-k) ** order + order * (-k) ** (order - 1) if order else z) * em,
            ]

        rows = [
            basis(-b, 0),
            basis(-b, 1),
            [a + k * k * c for a, c in zip(basis(0, 2), basis(0, 0))],
            [a - 3 * k * k * c for a, c in zip(basis(0, 3), basis(0, 1))],
        ]
        coef = mp.lu_solve(mp.matrix(rows), mp.matrix([0, 0, 0, 1]))
        psi0 = sum(c * v for c, v in zip(coef, basis(0, 0)))
        return float(-k * k * psi0)


def _cheb_diff(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and first-derivative matrix built from numpy's Chebyshev series."""
    t = np.cos(np.pi * np.arange(n) / (n - 1))
    V = C.chebvander(t, n - 1)
    Vinv = np.linalg.inv(V)
    dV = np.stack([C.chebval(t, C.chebder(np.eye(n)[j])) for j in range(n)], axis=1)
    return t, dV @ Vinv


def symbol_collocation(k: int, b: float = 1.0, n: int = 128) -> float:
    """Collocation of Y' = A Y, Y = (psi, psi', psi'', psi''')."""
    t, D = _cheb_diff(n)
    D = D * (2.0 / b)  # z = b (t - 1) / 2
    I = np.eye(n)
    Z = np.zeros((n, n))
    A = np.block(
        [
            [D, -I, Z, Z],
            [Z, D, -I, Z],
            [Z, Z, D, -I],
            [k**4 * I, Z, -2 * k * k * I, D],
        ]
    )
    rhs = np.zeros(4 * n)
    top, bot = 0, n - 1
    # One interior equation per block is replaced by a boundary condition.
    rows = [bot, n + bot, 2 * n + top, 3 * n + top]
    bcs = np.zeros((4, 4 * n))
    bcs[0, bot] = 1.0
    bcs[1, n + bot] = 1.0
    bcs[2, 2 * n + top] = 1.0
    bcs[2, top] = k * k
    bcs[3, 3 * n + top] = 1.0
    bcs[3, n + top] = -3 * k * k
    A[rows] = bcs
    rhs[rows] = [0.0, 0.0, 0.0, 1.0]
    Y = np.linalg.solve(A, rhs)
    return float(-k * k * Y[top])


def curvature_closed_form(amp: float, x: np.ndarray) -> np.ndarray:
    """-eta'' (1 + eta'^2)^(-3/2) for eta = amp cos x."""
    d1 = -amp * np.sin(x)
    d2 = -amp * np.cos(x)
    return -d2 * (1.0 + d1**2) ** -1.5


def jacobian_dense(amp: float, delta: float, b: float, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """d rho / dz for eta = amp cos x, evaluated pointwise (single mode |k| = 1)."""
    X, Z = np.meshgrid(x, z, indexing="ij")
    lift = amp * np.exp(delta * Z) * np.cos(X)
    return lift / b + (b + Z) / b * delta * lift + 1.0
