"""Reproducible random fields for tests and the verification harness.

All randomness flows through numpy's Philox counter-based bit generator keyed
by (seed, stream), so any oracle value can be regenerated from the two
integers recorded in a run summary.  Random fields are band-limited to
|j| <= N_x/3 per axis (the dealiasing band) and use low-degree vertical
Chebyshev profiles, so they are fully resolved on the grid.
"""

import numpy as np

from .fields import DataTuple, SolutionState, StripSpectrum, SurfaceSpectrum
from .norms import vertical_integral

__all__ = [
    "generator",
    "random_surface",
    "random_strip",
    "random_velocity",
    "random_data_tuple",
    "random_strong_state",
]


def generator(seed, stream=0):
    """Counter-based RNG for the given (seed, stream) pair."""
    return np.random.Generator(np.random.Philox(key=np.uint64([seed, stream])))


def _band_window(grid, cutoff_frac=1.0 / 3.0, decay=2.0):
    jmax = cutoff_frac * (grid.N_x / 2.0)
    j_abs = grid.xi_abs * grid.L
    w = np.exp(-decay * (j_abs / max(jmax, 1.0)) ** 2)
    w[j_abs > jmax] = 0.0
    return w


def random_surface(grid, rng, ncomp=None, amplitude=1.0, mean_free=True):
    """Random real surface field with a smooth band-limited spectrum."""
    shape = grid.freq_shape if ncomp is None else grid.freq_shape + (ncomp,)
    noise = rng.standard_normal(shape)
    c = grid.to_coefficients(noise)
    w = _band_window(grid)
    c = c * (w.reshape(w.shape + (1,) * (c.ndim - grid.d)))
    if mean_free:
        c[(0,) * grid.d] = 0.0
    field = SurfaceSpectrum(grid, c)
    scale = float(np.abs(field.to_samples()).max())
    if scale > 0:
        field = field * (amplitude / scale)
    return field


def _vertical_basis(grid, degree, bottom_zero=False):
    z = grid.z_nodes
    t = 2.0 * z / grid.b - 1.0
    basis = np.polynomial.chebyshev.chebvander(t, degree)  # (N_z, degree+1)
    if bottom_zero:
        basis = basis * (z / grid.b)[:, None]
    return basis


def random_strip(grid, rng, ncomp=1, amplitude=1.0, degree=8, decay=0.45,
                 bottom_zero=()):
    """Random real strip field: band-limited horizontally, polynomial in z.

    ``bottom_zero`` lists component indices whose trace at z = 0 vanishes.
    """
    coeffs = np.zeros(grid.freq_shape + (grid.N_z, ncomp), dtype=complex)
    plain = _vertical_basis(grid, degree)
    pinned = _vertical_basis(grid, degree, bottom_zero=True)
    for comp in range(ncomp):
        basis = pinned if comp in bottom_zero else plain
        for kdeg in range(degree + 1):
            c = random_surface(grid, rng, amplitude=decay**kdeg,
                               mean_free=False)
            coeffs[..., comp] += c.coeffs[..., None] * basis[:, kdeg]
    field = StripSpectrum(grid, coeffs)
    scale = float(np.abs(field.to_samples()).max())
    if scale > 0:
        field = field * (amplitude / scale)
    return field


def random_velocity(grid, rng, amplitude=1.0, degree=8):
    """Random velocity field with vanishing bottom normal trace."""
    return random_strip(grid, rng, ncomp=grid.n, amplitude=amplitude,
                        degree=degree, bottom_zero=(grid.d,))


def random_data_tuple(grid, rng, amplitude=1.0, with_l=True):
    """Random admissible data tuple.

    The zero-mode of h is adjusted to match the vertical integral of the
    zero-mode of g; on the torus that mean compatibility is what finiteness
    of the low-frequency seminorm requires.
    """
    data = DataTuple(
        f=random_strip(grid, rng, ncomp=grid.n, amplitude=amplitude),
        g=random_strip(grid, rng, ncomp=1, amplitude=amplitude),
        h=random_surface(grid, rng, amplitude=amplitude, mean_free=False),
        k=random_surface(grid, rng, ncomp=grid.n, amplitude=amplitude,
                         mean_free=False),
        l=random_surface(grid, rng, ncomp=grid.d, amplitude=amplitude,
                         mean_free=False) if with_l else None,
    )
    zero = (0,) * grid.d
    data.h.coeffs[zero] = vertical_integral(data.g).coeffs[zero]
    return data


def random_strong_state(grid, rng, amplitude=1.0, degree=8):
    """Random smooth (u, p) pair with u_n = 0 at the bottom."""
    u = random_velocity(grid, rng, amplitude=amplitude, degree=degree)
    p = random_strip(grid, rng, ncomp=1, amplitude=amplitude, degree=degree)
    return u, p
