"""Fourier x Chebyshev discretization of the periodic strip T x (-b, 0).

Horizontal fields are stored as complex Fourier coefficients in numpy FFT
order with the normalization ``u_hat[k] = mean_j u(x_j) exp(-i k x_j)``, so
that ``u(x) = sum_k u_hat[k] exp(i k x)``.  The vertical direction uses
Chebyshev Gauss-Lobatto points ``t_j = cos(pi j / (Nz - 1))`` mapped to
``z = b (t - 1) / 2``; index 0 is the surface ``z = 0`` and index ``Nz - 1``
is the bottom ``z = -b``.

Sobolev norms use ``||u||_{H^s}^2 = 2 pi sum_k (1 + k^2)^s |u_hat[k]|^2``,
which is Parseval's identity on [0, 2 pi) for ``s = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid on the flattened strip."""

    Nx: int
    Nz: int
    b: float = 1.0
    d: int = 1
    Lx: float = TWO_PI

    def __post_init__(self) -> None:
        if self.d != 1:
            raise ValueError("only surface dimension d = 1 is implemented")
        if self.Nx < 8 or self.Nx % 2:
            raise ValueError(f"Nx must be even and >= 8, got {self.Nx}")
        if self.Nz < 8:
            raise ValueError(f"Nz must be >= 8, got {self.Nz}")
        if not self.b > 0:
            raise ValueError(f"depth b must be positive, got {self.b}")
        if not np.isclose(self.Lx, TWO_PI):
            raise ValueError("the horizontal period is fixed to 2*pi")

    @cached_property
    def x(self) -> np.ndarray:
        return TWO_PI * np.arange(self.Nx) / self.Nx

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order."""
        return np.fft.fftfreq(self.Nx, 1.0 / self.Nx)

    @cached_property
    def t(self) -> np.ndarray:
        return chebyshev_nodes(self.Nz)

    @cached_property
    def z(self) -> np.ndarray:
        return 0.5 * self.b * (self.t - 1.0)

    @cached_property
    def Dz(self) -> np.ndarray:
        """Chebyshev differentiation matrix in the physical z variable."""
        return (2.0 / self.b) * chebyshev_diff_matrix(self.Nz)

    @cached_property
    def wz(self) -> np.ndarray:
        """Clenshaw-Curtis weights for integrals over z in [-b, 0]."""
        return 0.5 * self.b * clenshaw_curtis_weights(self.Nz)

    @cached_property
    def Dx(self) -> np.ndarray:
        """Spectral x-derivative on grid values (Nyquist mode annihilated)."""
        return fourier_diff_matrix(self.Nx)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask in FFT order: keeps |k| < Nx/3."""
        return np.abs(self.k) < self.Nx / 3.0

    @property
    def n_real_modes(self) -> int:
        """Dimension of the real Fourier basis without the Nyquist mode."""
        return self.Nx - 1

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.Nx * factor, self.Nz * factor, self.b)


# ---------------------------------------------------------------- Chebyshev


def chebyshev_nodes(n: int) -> np.ndarray:
    """Gauss-Lobatto points cos(pi j/(n-1)), descending from 1 to -1."""
    return np.cos(np.pi * np.arange(n) / (n - 1))


def chebyshev_diff_matrix(n: int) -> np.ndarray:
    """Collocation derivative on the Gauss-Lobatto points (Trefethen's cheb)."""
    N = n - 1
    t = chebyshev_nodes(n)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dT = t[:, None] - t[None, :]
    D = np.outer(c, 1.0 / c) / (dT + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    # Exact diagonal corners improve roundoff on fine grids.
    D[0, 0] = (2 * N * N + 1) / 6.0
    D[-1, -1] = -D[0, 0]
    return D


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Quadrature weights on the Gauss-Lobatto points for [-1, 1]."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(n - 2)
    interior = slice(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N * N - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[interior]) / (4 * k * k - 1)
        v -= np.cos(N * theta[interior]) / (N * N - 1)
    else:
        w[0] = w[N] = 1.0 / (N * N)
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[interior]) / (4 * k * k - 1)
    w[interior] = 2.0 * v / N
    return w


def chebyshev_interp_matrix(n: int, t_out: np.ndarray) -> np.ndarray:
    """Barycentric interpolation from the n Gauss-Lobatto points to t_out."""
    t = chebyshev_nodes(n)
    wb = (-1.0) ** np.arange(n)
    wb[0] *= 0.5
    wb[-1] *= 0.5
    t_out = np.asarray(t_out, dtype=float)
    diff = t_out[:, None] - t[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0.0)
    diff[exact] = 1.0
    W = wb[None, :] / diff
    W /= W.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    W[rows] = exact[rows].astype(float)
    return W


def chebyshev_tn_functional(n: int) -> np.ndarray:
    """Weights returning the top Chebyshev coefficient of nodal data."""
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    return (-1.0) ** np.arange(n) / c / (n - 1)


# ---------------------------------------------------------------- Fourier


def real_basis_synthesis(Nx: int, x: np.ndarray) -> np.ndarray:
    """Matrix E with E[i, :] = (1, cos x_i, sin x_i, ..., cos K x_i, sin K x_i), K = Nx/2 - 1."""
    K = Nx // 2 - 1
    x = np.asarray(x, dtype=float)
    E = np.empty((x.size, 2 * K + 1))
    E[:, 0] = 1.0
    kx = np.outer(x, np.arange(1, K + 1))
    E[:, 1::2] = np.cos(kx)
    E[:, 2::2] = np.sin(kx)
    return E


def real_basis_analysis(Nx: int) -> np.ndarray:
    """Discrete projection Q onto the real basis; Q @ E = I on the uniform grid."""
    x = TWO_PI * np.arange(Nx) / Nx
    Q = real_basis_synthesis(Nx, x).T * (2.0 / Nx)
    Q[0] *= 0.5
    return Q


def real_basis_derivative(Nx: int) -> np.ndarray:
    """d/dx acting on real-basis coefficient vectors."""
    K = Nx // 2 - 1
    m = 2 * K + 1
    Dk = np.zeros((m, m))
    for k in range(1, K + 1):
        c, s = 2 * k - 1, 2 * k
        Dk[s, c] = -k
        Dk[c, s] = k
    return Dk


def fourier_diff_matrix(Nx: int) -> np.ndarray:
    x = TWO_PI * np.arange(Nx) / Nx
    E = real_basis_synthesis(Nx, x)
    return E @ real_basis_derivative(Nx) @ real_basis_analysis(Nx)


# ---------------------------------------------------------------- fields


@dataclass(frozen=True, eq=False)
class SurfaceField:
    """Real periodic function on the torus held by its Fourier coefficients."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.grid.Nx,):
            raise ValueError(f"expected {self.grid.Nx} coefficients, got shape {c.shape}")
        mirror = np.conj(c[(-np.arange(c.size)) % c.size])
        scale = max(np.max(np.abs(c)), 1e-300)
        if np.max(np.abs(c - mirror)) > 1e-12 * scale:
            raise ValueError("coefficients are not Hermitian (field is not real)")
        c = 0.5 * (c + mirror)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # constructors
    @classmethod
    def from_values(cls, grid: GridSpec, values: np.ndarray) -> "SurfaceField":
        values = np.asarray(values, dtype=float)
        return cls(grid, np.fft.fft(values) / grid.Nx)

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "SurfaceField":
        return cls.from_values(grid, fn(grid.x))

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "SurfaceField":
        return cls.from_values(grid, np.full(grid.Nx, float(c)))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SurfaceField":
        return cls.constant(grid, 0.0)

    @classmethod
    def from_real_coeffs(cls, grid: GridSpec, c: np.ndarray) -> "SurfaceField":
        """Inverse of ``real_coeffs``; c = (a0, a1, b1, a2, b2, ...)."""
        c = np.asarray(c, dtype=float)
        K = grid.Nx // 2 - 1
        if c.size > 2 * K + 1:
            raise ValueError(f"at most {2 * K + 1} real coefficients fit on this grid")
        full = np.zeros(2 * K + 1)
        full[: c.size] = c
        hat = np.zeros(grid.Nx, dtype=complex)
        hat[0] = full[0]
        ks = np.arange(1, K + 1)
        hat[ks] = 0.5 * (full[1::2] - 1j * full[2::2])
        hat[-ks] = np.conj(hat[ks])
        return cls(grid, hat)

    # views
    @property
    def values(self) -> np.ndarray:
        return np.real(np.fft.ifft(self.coeffs) * self.grid.Nx)

    def real_coeffs(self) -> np.ndarray:
        """Coefficients in the real basis (1, cos x, sin x, ...), Nyquist dropped."""
        K = self.grid.Nx // 2 - 1
        out = np.empty(2 * K + 1)
        out[0] = self.coeffs[0].real
        hk = self.coeffs[1 : K + 1]
        out[1::2] = 2.0 * hk.real
        out[2::2] = -2.0 * hk.imag
        return out

    @property
    def mean(self) -> float:
        return float(self.coeffs[0].real)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Trigonometric interpolant at arbitrary points (Nyquist split evenly)."""
        x = np.asarray(x, dtype=float)
        k = self.grid.k.copy()
        c = self.coeffs.copy()
        nyq = self.grid.Nx // 2
        k[nyq] = nyq
        c[nyq] = 0.5 * c[nyq]
        val = np.exp(1j * np.outer(x, k)) @ c
        val += c[nyq] * np.exp(-1j * nyq * x)
        return np.real(val)

    def resample(self, grid: GridSpec) -> "SurfaceField":
        """Same function on another grid (zero padding or truncation)."""
        return SurfaceField.from_values(grid, self.evaluate(grid.x))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    # arithmetic on coefficients (linear operations need no dealiasing)
    def _check(self, other: "SurfaceField") -> None:
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SurfaceField):
            self._check(other)
            return SurfaceField(self.grid, self.coeffs + other.coeffs)
        return SurfaceField.from_values(self.grid, self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SurfaceField):
            self._check(other)
            return SurfaceField(self.grid, self.coeffs - other.coeffs)
        return SurfaceField.from_values(self.grid, self.values - float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return SurfaceField(self.grid, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SurfaceField):
            raise TypeError("use dealiased_product for field products")
        return SurfaceField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SurfaceField(self.grid, self.coeffs / float(scalar))


@dataclass(frozen=True, eq=False)
class VolumeField:
    """Nodal values on the (x, z) collocation grid, one block per component."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.shape[1:] != (self.grid.Nx, self.grid.Nz):
            raise ValueError(
                f"blocks must have shape {(self.grid.Nx, self.grid.Nz)}, got {v.shape[1:]}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, grid: GridSpec, ncomp: int = 1) -> "VolumeField":
        return cls(grid, np.zeros((ncomp, grid.Nx, grid.Nz)))

    @classmethod
    def from_function(cls, grid: GridSpec, fn, ncomp: int = 1) -> "VolumeField":
        X, Z = np.meshgrid(grid.x, grid.z, indexing="ij")
        vals = np.asarray(fn(X, Z), dtype=float).reshape((ncomp, grid.Nx, grid.Nz))
        return cls(grid, vals)

    def interpolate(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        """Spectral interpolant evaluated on the tensor grid x by z."""
        g = self.grid
        hat = np.fft.fft(self.values, axis=1) / g.Nx
        k = g.k.copy()
        nyq = g.Nx // 2
        k[nyq] = nyq
        hat[:, nyq] *= 0.5
        ex = np.exp(1j * np.outer(np.asarray(x, float), k))
        ex_n = np.exp(-1j * nyq * np.asarray(x, float))
        along_x = np.einsum("xk,ckz->cxz", ex, hat) + ex_n[None, :, None] * hat[:, nyq][:, None, :]
        t = 2.0 * np.asarray(z, float) / g.b + 1.0
        W = chebyshev_interp_matrix(g.Nz, t)
        return np.real(np.einsum("cxz,qz->cxq", along_x, W))


# ---------------------------------------------------------------- operations


def deriv_x(u: SurfaceField, order: int = 1) -> SurfaceField:
    """Multiply coefficients by (ik)^order; the Nyquist mode is dropped for odd orders."""
    if order < 1:
        raise ValueError("order must be >= 1")
    k = u.grid.k.copy()
    if order % 2:
        k[u.grid.Nx // 2] = 0.0
    return SurfaceField(u.grid, u.coeffs * (1j * k) ** order)


def smooth_lift(u: SurfaceField, delta: float, z: float) -> SurfaceField:
    """Apply the Poisson-type kernel exp(delta z |D|) at depth z <= 0."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if z > 0 or z < -u.grid.b - 1e-14:
        raise ValueError(f"z must lie in [-b, 0], got {z}")
    return SurfaceField(u.grid, u.coeffs * np.exp(delta * z * np.abs(u.grid.k)))


def sobolev_norm(u: SurfaceField, s: float) -> float:
    w = (1.0 + u.grid.k**2) ** s
    return float(np.sqrt(TWO_PI * np.sum(w * np.abs(u.coeffs) ** 2)))


def project_mean_zero(u: SurfaceField) -> SurfaceField:
    c = u.coeffs.copy()
    c[0] = 0.0
    return SurfaceField(u.grid, c)


def inner(u: SurfaceField, v: SurfaceField) -> float:
    """L^2(0, 2 pi) inner product."""
    return float(TWO_PI * np.real(np.vdot(v.coeffs, u.coeffs)))


def dealias(u: SurfaceField) -> SurfaceField:
    return SurfaceField(u.grid, u.coeffs * u.grid.dealias_mask)


def dealias_values(grid: GridSpec, values: np.ndarray, axis: int = 0) -> np.ndarray:
    """2/3-rule filter of real grid values along ``axis``."""
    hat = np.fft.fft(values, axis=axis)
    shape = [1] * hat.ndim
    shape[axis] = grid.Nx
    hat *= grid.dealias_mask.reshape(shape)
    return np.real(np.fft.ifft(hat, axis=axis))


def dealiased_product(u: SurfaceField, v: SurfaceField) -> SurfaceField:
    u._check(v)
    return dealias(SurfaceField.from_values(u.grid, dealias(u).values * dealias(v).values))
