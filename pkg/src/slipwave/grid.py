"""Discrete function spaces on the periodic strip.

The horizontal directions live on a torus of period ``L`` sampled at ``N_x``
uniform points per direction; the vertical direction is a Chebyshev-Gauss-
Lobatto grid on ``[0, b]``.  Spectral coefficients follow the Fourier-series
convention ``f(x) = sum_xi c(xi) exp(2 pi i xi . x)`` with frequencies
``xi = j / L`` on the integer lattice, so a unit constant has a single unit
coefficient at ``xi = 0``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "chebyshev_ops", "ChebOps"]


def _cheb_matrix(m):
    # Differentiation matrix on the m+1 extrema cos(pi*k/m), k=0..m (descending).
    if m == 0:
        return np.array([1.0]), np.zeros((1, 1))
    k = np.arange(m + 1)
    t = np.cos(np.pi * k / m)
    c = np.hstack([2.0, np.ones(m - 1), 2.0]) * (-1.0) ** k
    X = np.tile(t, (m + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(m + 1))
    D -= np.diag(D.sum(axis=1))
    return t, D


def _clenshaw_curtis(m):
    # Quadrature weights on the m+1 extrema grid for integrals over [-1, 1].
    if m == 0:
        return np.array([2.0])
    w = np.zeros(m + 1)
    theta = np.pi * np.arange(m + 1) / m
    ii = np.arange(1, m)
    v = np.ones(m - 1)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m**2 - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k**2 - 1)
        v -= np.cos(m * theta[ii]) / (m**2 - 1)
    else:
        w[0] = w[m] = 1.0 / m**2
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k**2 - 1)
    w[ii] = 2.0 * v / m
    return w


@dataclass(frozen=True)
class ChebOps:
    """Vertical collocation operators on [0, b]: ascending nodes, spectral
    differentiation matrix, and quadrature weights exact for degree < n_z."""

    n_z: int
    b: float

    @cached_property
    def nodes(self):
        # t descends from 1 to -1, so z = b (1 - t) / 2 ascends from 0 to b.
        t, _ = _cheb_matrix(self.n_z - 1)
        return self.b * (1.0 - t) / 2.0

    @cached_property
    def D(self):
        _, Dt = _cheb_matrix(self.n_z - 1)
        return -(2.0 / self.b) * Dt

    @cached_property
    def D2(self):
        return self.D @ self.D

    @cached_property
    def weights(self):
        return (self.b / 2.0) * _clenshaw_curtis(self.n_z - 1)

    def integrate(self, values, axis=-1):
        return np.tensordot(values, self.weights, axes=([axis], [0]))


def chebyshev_ops(n_z, b):
    """Return (nodes, differentiation matrix, integration weights) on [0, b]."""
    if n_z < 2:
        raise ValueError("need at least two Chebyshev nodes")
    ops = ChebOps(n_z, b)
    return ops.nodes, ops.D, ops.weights


@dataclass(frozen=True)
class Grid:
    """Horizontal torus lattice plus vertical Chebyshev grid.

    Parameters
    ----------
    L : horizontal period.
    d : number of horizontal dimensions (1 or 2); velocity fields have
        n = d + 1 components.
    N_x : Fourier modes per horizontal direction (even).
    N_z : Chebyshev nodes on [0, b], endpoints included.
    b : strip depth.
    """

    L: float
    d: int
    N_x: int
    N_z: int
    b: float

    def __post_init__(self):
        if self.L <= 0 or self.b <= 0:
            raise ValueError("L and b must be positive")
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if self.N_x < 8 or self.N_x % 2:
            raise ValueError("N_x must be even and at least 8")
        if self.N_z < 8:
            raise ValueError("N_z must be at least 8")

    @property
    def n(self):
        return self.d + 1

    @property
    def freq_shape(self):
        return (self.N_x,) * self.d

    @property
    def n_modes(self):
        return self.N_x**self.d

    @cached_property
    def xi(self):
        """Frequency lattice, shape freq_shape + (d,), FFT ordering."""
        f = np.fft.fftfreq(self.N_x, d=self.L / self.N_x)
        axes = np.meshgrid(*(f,) * self.d, indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def xi_flat(self):
        return self.xi.reshape(self.n_modes, self.d)

    @cached_property
    def xi_abs(self):
        return np.sqrt((self.xi**2).sum(axis=-1))

    @cached_property
    def x_nodes(self):
        return np.arange(self.N_x) * (self.L / self.N_x)

    @cached_property
    def x_points(self):
        """Physical horizontal coordinates, shape phys_shape + (d,)."""
        axes = np.meshgrid(*(self.x_nodes,) * self.d, indexing="ij")
        return np.stack(axes, axis=-1)

    @cached_property
    def cheb(self):
        return ChebOps(self.N_z, self.b)

    @property
    def z_nodes(self):
        return self.cheb.nodes

    # -- horizontal transforms -------------------------------------------------

    def _haxes(self):
        return tuple(range(self.d))

    def to_coefficients(self, samples):
        """Forward transform over the horizontal axes (first d axes)."""
        samples = np.asarray(samples)
        if samples.shape[: self.d] != self.freq_shape:
            raise ValueError(
                f"horizontal sample shape {samples.shape[:self.d]} does not "
                f"match grid {self.freq_shape}"
            )
        return np.fft.fftn(samples, axes=self._haxes()) / self.n_modes

    def to_samples(self, coeffs, real=True):
        """Inverse transform over the horizontal axes."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[: self.d] != self.freq_shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape[:self.d]} does not match "
                f"grid {self.freq_shape}"
            )
        out = np.fft.ifftn(coeffs * self.n_modes, axes=self._haxes())
        return out.real if real else out

    def index_of(self, mode):
        """Lattice index of the integer mode vector (j_1, .., j_d)."""
        mode = np.atleast_1d(np.asarray(mode, dtype=int))
        return tuple(int(j) % self.N_x for j in mode)

    def hermitian_defect(self, coeffs):
        """Max |c(-xi) - conj(c(xi))| over the lattice (0 for real fields)."""
        coeffs = np.asarray(coeffs)
        rev = coeffs
        for ax in self._haxes():
            rev = np.roll(np.flip(rev, axis=ax), 1, axis=ax)
        return float(np.abs(rev - np.conj(coeffs)).max())
