"""Spectral field containers and frequency-space filtering.

``SurfaceSpectrum`` holds coefficients indexed by the horizontal frequency
lattice (optionally with a trailing component axis); ``StripSpectrum`` adds a
Chebyshev node axis before the component axis.  Both are thin wrappers over
complex ndarrays; all heavy lifting happens in free functions that take and
return these containers.
"""

from dataclasses import dataclass

import numpy as np

from .grid import Grid

__all__ = [
    "SurfaceSpectrum",
    "StripSpectrum",
    "DataTuple",
    "SolutionState",
    "frequency_filter",
]


@dataclass
class SurfaceSpectrum:
    """Complex coefficients over the frequency lattice.

    ``coeffs`` has shape ``freq_shape`` for scalar fields or
    ``freq_shape + (m,)`` for fields with m components.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape[: self.grid.d] != self.grid.freq_shape:
            raise ValueError("coefficient shape does not match grid lattice")
        if self.coeffs.ndim > self.grid.d + 1:
            raise ValueError("surface coefficients admit at most one component axis")

    @property
    def ncomp(self):
        return 1 if self.coeffs.ndim == self.grid.d else self.coeffs.shape[-1]

    @classmethod
    def zeros(cls, grid, ncomp=None):
        shape = grid.freq_shape if ncomp is None else grid.freq_shape + (ncomp,)
        return cls(grid, np.zeros(shape, dtype=complex))

    @classmethod
    def from_samples(cls, grid, samples):
        return cls(grid, grid.to_coefficients(samples))

    def to_samples(self, real=True):
        return self.grid.to_samples(self.coeffs, real=real)

    def copy(self):
        return SurfaceSpectrum(self.grid, self.coeffs.copy())

    def hermitian_defect(self):
        return self.grid.hermitian_defect(self.coeffs)

    def __add__(self, other):
        return SurfaceSpectrum(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SurfaceSpectrum(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return SurfaceSpectrum(self.grid, self.coeffs * a)

    __rmul__ = __mul__


@dataclass
class StripSpectrum:
    """Complex coefficients over (frequency, Chebyshev node, component).

    ``coeffs`` has shape ``freq_shape + (N_z, m)`` with m in {1, n}.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        g = self.grid
        if self.coeffs.ndim == g.d + 1:
            # scalar field given without component axis
            self.coeffs = self.coeffs[..., None]
        expected = g.freq_shape + (g.N_z,)
        if self.coeffs.shape[:-1] != expected:
            raise ValueError("strip coefficient shape does not match grid")
        if self.coeffs.shape[-1] not in (1, g.n):
            raise ValueError(f"component count must be 1 or {g.n}")

    @property
    def ncomp(self):
        return self.coeffs.shape[-1]

    @classmethod
    def zeros(cls, grid, ncomp=1):
        return cls(grid, np.zeros(grid.freq_shape + (grid.N_z, ncomp), dtype=complex))

    @classmethod
    def from_samples(cls, grid, samples):
        samples = np.asarray(samples)
        if samples.ndim == grid.d + 1:
            samples = samples[..., None]
        return cls(grid, grid.to_coefficients(samples))

    def to_samples(self, real=True):
        return self.grid.to_samples(self.coeffs, real=real)

    def copy(self):
        return StripSpectrum(self.grid, self.coeffs.copy())

    def hermitian_defect(self):
        return self.grid.hermitian_defect(self.coeffs)

    def dz(self, order=1):
        """Vertical spectral derivative along the node axis."""
        D = self.grid.cheb.D
        out = self.coeffs
        for _ in range(order):
            out = np.einsum("ij,...jc->...ic", D, out)
        return StripSpectrum(self.grid, out)

    def at_node(self, k):
        """Surface trace at vertical node k (0 = bottom, N_z-1 = top)."""
        c = self.coeffs[..., k, :]
        if c.shape[-1] == 1:
            c = c[..., 0]
        return SurfaceSpectrum(self.grid, c)

    def __add__(self, other):
        return StripSpectrum(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return StripSpectrum(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return StripSpectrum(self.grid, self.coeffs * a)

    __rmul__ = __mul__


@dataclass
class DataTuple:
    """Forcing tuple (f, g, h, k, l) for the linearized surface problem.

    f: interior vector field (n components); g: interior scalar;
    h: surface scalar; k: surface vector (n components); l: tangential
    surface vector (n - 1 components) or None for the l = 0 problem.
    """

    f: StripSpectrum
    g: StripSpectrum
    h: SurfaceSpectrum
    k: SurfaceSpectrum
    l: SurfaceSpectrum | None = None

    @property
    def grid(self):
        return self.f.grid

    @classmethod
    def zeros(cls, grid, with_l=True):
        return cls(
            f=StripSpectrum.zeros(grid, grid.n),
            g=StripSpectrum.zeros(grid, 1),
            h=SurfaceSpectrum.zeros(grid),
            k=SurfaceSpectrum.zeros(grid, grid.n),
            l=SurfaceSpectrum.zeros(grid, grid.d) if with_l else None,
        )

    def copy(self):
        return DataTuple(
            self.f.copy(), self.g.copy(), self.h.copy(), self.k.copy(),
            None if self.l is None else self.l.copy(),
        )

    def _zip(self, other, op):
        lsum = None
        if self.l is not None and other.l is not None:
            lsum = op(self.l, other.l)
        elif self.l is not None or other.l is not None:
            raise ValueError("cannot combine tuples with and without l data")
        return DataTuple(
            op(self.f, other.f), op(self.g, other.g),
            op(self.h, other.h), op(self.k, other.k), lsum,
        )

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __mul__(self, a):
        return DataTuple(
            self.f * a, self.g * a, self.h * a, self.k * a,
            None if self.l is None else self.l * a,
        )

    __rmul__ = __mul__


@dataclass
class SolutionState:
    """Solution triple (u, p, eta): velocity, pressure, free surface."""

    u: StripSpectrum
    p: StripSpectrum
    eta: SurfaceSpectrum

    @property
    def grid(self):
        return self.u.grid

    @classmethod
    def zeros(cls, grid):
        return cls(
            u=StripSpectrum.zeros(grid, grid.n),
            p=StripSpectrum.zeros(grid, 1),
            eta=SurfaceSpectrum.zeros(grid),
        )

    def copy(self):
        return SolutionState(self.u.copy(), self.p.copy(), self.eta.copy())

    def __add__(self, other):
        return SolutionState(self.u + other.u, self.p + other.p, self.eta + other.eta)

    def __sub__(self, other):
        return SolutionState(self.u - other.u, self.p - other.p, self.eta - other.eta)

    def __mul__(self, a):
        return SolutionState(self.u * a, self.p * a, self.eta * a)

    __rmul__ = __mul__


def frequency_filter(field, indicator):
    """Zero all coefficients whose frequency fails the indicator.

    ``indicator`` receives the lattice array of shape freq_shape + (d,) and
    returns a boolean mask of shape freq_shape.  Kept coefficients are copied
    bit-for-bit, so the operation is idempotent and commutes with any
    per-frequency map.
    """
    grid = field.grid
    mask = np.asarray(indicator(grid.xi), dtype=bool)
    if mask.shape != grid.freq_shape:
        raise ValueError("indicator must return a mask over the frequency lattice")
    shape = mask.shape + (1,) * (field.coeffs.ndim - grid.d)
    out = np.where(mask.reshape(shape), field.coeffs, 0.0 + 0.0j)
    return type(field)(grid, out)
