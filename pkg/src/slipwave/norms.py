"""Discrete Sobolev norms, the low-frequency seminorm, and the anisotropic
surface norm.

Horizontal Plancherel sums run over the coefficient lattice (one term per
mode, no extra measure factor), so a single unit-coefficient mode at xi_0 has
H^s norm (1 + |xi_0|^2)^{s/2}.  Vertical integrals use Clenshaw-Curtis
quadrature on [0, b].  Strip H^s norms combine fractional horizontal weights
(1 + |xi|^2)^{s-m} with integer vertical derivative orders m = 0 .. ceil(s).
"""

import warnings

import numpy as np

from .fields import DataTuple, SolutionState, StripSpectrum, SurfaceSpectrum

__all__ = [
    "IncompatibleMeanWarning",
    "norm_hs",
    "seminorm_hdot_minus1",
    "norm_xs",
    "korn_ratio",
    "norm_y",
    "norm_z",
    "norm_x_state",
    "vertical_integral",
    "divergence",
]


class IncompatibleMeanWarning(UserWarning):
    """Nonzero lattice mean fed to a mean-free seminorm."""


def _sq(coeffs):
    return (coeffs.real**2 + coeffs.imag**2)


def _surface_weighted(field, weight):
    c = field.coeffs
    mag = _sq(c)
    if c.ndim > field.grid.d:
        mag = mag.sum(axis=-1)
    return float((weight * mag).sum())


def _surface_hs_sq(field, s):
    w = (1.0 + field.grid.xi_abs**2) ** s
    return _surface_weighted(field, w)


def _strip_hs_sq(field, s):
    grid = field.grid
    orders = int(np.ceil(s))
    wz = grid.cheb.weights
    total = 0.0
    term = field
    for m in range(orders + 1):
        w = (1.0 + grid.xi_abs**2) ** max(s - m, 0.0)
        node_sq = _sq(term.coeffs).sum(axis=-1)
        total += float((w * np.tensordot(node_sq, wz, axes=([-1], [0]))).sum())
        if m < orders:
            term = term.dz()
    return total


def norm_hs(field, s):
    """Discrete H^s norm of a surface or strip spectrum (s >= 0)."""
    if s < 0:
        raise ValueError("norm_hs requires s >= 0")
    if isinstance(field, SurfaceSpectrum):
        return float(np.sqrt(_surface_hs_sq(field, s)))
    if isinstance(field, StripSpectrum):
        return float(np.sqrt(_strip_hs_sq(field, s)))
    raise TypeError(f"unsupported field type {type(field)!r}")


def seminorm_hdot_minus1(field):
    """Low-frequency seminorm (sum_{xi != 0} |xi|^{-2} |c|^2)^{1/2}.

    A nonzero lattice mean makes the continuum seminorm infinite; here the
    mean is dropped, the seminorm of the mean-free part is returned, and an
    ``IncompatibleMeanWarning`` is emitted.
    """
    grid = field.grid
    c = field.coeffs
    mag = _sq(c)
    if c.ndim > grid.d:
        mag = mag.sum(axis=-1)
    zero = (0,) * grid.d
    mean_sq = mag[zero]
    scale = float(np.sqrt(mag.sum()))
    if np.sqrt(mean_sq) > 1e-13 * max(scale, 1e-300):
        warnings.warn(
            "incompatible-mean: nonzero lattice mean dropped from the "
            "low-frequency seminorm",
            IncompatibleMeanWarning,
            stacklevel=2,
        )
    inv = np.zeros_like(grid.xi_abs)
    mask = grid.xi_abs > 0
    inv[mask] = grid.xi_abs[mask] ** -2
    return float(np.sqrt((inv * mag).sum()))


def norm_xs(field, s):
    """Anisotropic surface norm: weight (xi_1^2 + |xi|^4)/|xi|^2 inside the
    unit ball, (1 + |xi|^2)^s outside; the zero mode must vanish."""
    grid = field.grid
    c = field.coeffs
    zero = (0,) * grid.d
    scale = float(np.sqrt(_sq(c).sum()))
    if abs(c[zero]) > 1e-12 * max(scale, 1e-300):
        raise ValueError("norm_xs requires a mean-free field")
    absxi = grid.xi_abs
    xi1 = grid.xi[..., 0]
    low = absxi < 1.0
    w = np.where(low, 0.0, (1.0 + absxi**2) ** s)
    safe = np.where(absxi > 0, absxi, 1.0)
    w_low = (xi1**2 + absxi**4) / safe**2
    w = np.where(low & (absxi > 0), w_low, w)
    return float(np.sqrt(_surface_weighted(field, w)))


def xs_split(field, threshold=1.0):
    """Split into low/high frequency parts at |xi| = threshold."""
    from .fields import frequency_filter

    low = frequency_filter(field, lambda xi: np.sqrt((xi**2).sum(-1)) < threshold)
    high = frequency_filter(field, lambda xi: np.sqrt((xi**2).sum(-1)) >= threshold)
    return low, high


def vertical_integral(field):
    """Integrate a strip spectrum over [0, b]; returns a surface spectrum."""
    grid = field.grid
    c = np.tensordot(field.coeffs, grid.cheb.weights, axes=([-2], [0]))
    if c.shape[-1] == 1:
        c = c[..., 0]
    return SurfaceSpectrum(grid, c)


def symmetric_gradient(u):
    """Coefficients of D u = grad u + (grad u)^T, shape freq + (N_z, n, n)."""
    grid = u.grid
    if u.ncomp != grid.n:
        raise ValueError("symmetric gradient needs a full velocity field")
    ik = 2j * np.pi * grid.xi  # freq + (d,)
    dz = u.dz().coeffs
    n = grid.n
    G = np.zeros(grid.freq_shape + (grid.N_z, n, n), dtype=complex)
    for j in range(grid.d):
        G[..., j, :] = ik[..., j][..., None, None] * u.coeffs
    G[..., grid.d, :] = dz
    return G + np.swapaxes(G, -1, -2)


def divergence(u):
    """Spectral divergence of a velocity strip field."""
    grid = u.grid
    ik = 2j * np.pi * grid.xi
    out = u.dz().coeffs[..., grid.d]
    for j in range(grid.d):
        out = out + ik[..., j][..., None] * u.coeffs[..., j]
    return StripSpectrum(grid, out[..., None])


def korn_ratio(u):
    """Ratio of the H^1 norm to the symmetric-gradient-plus-bottom-trace norm.

    The denominator is (||D u||_{L^2}^2 + ||u(., 0)||_{L^2}^2)^{1/2}; the
    bottom normal trace must vanish.
    """
    grid = u.grid
    if u.ncomp != grid.n:
        raise ValueError("korn_ratio needs a vector field with n components")
    un0 = np.abs(u.coeffs[..., 0, grid.d]).max()
    scale = np.abs(u.coeffs).max()
    if scale == 0.0:
        raise ValueError("korn_ratio undefined for the zero field")
    if un0 > 1e-10 * scale:
        raise ValueError("korn_ratio requires u_n = 0 on the bottom boundary")
    wz = grid.cheb.weights
    G = symmetric_gradient(u)
    dsq = float(
        (np.tensordot(_sq(G).sum(axis=(-1, -2)), wz, axes=([-1], [0]))).sum()
    )
    trace_sq = float(_sq(u.coeffs[..., 0, :]).sum())
    denom = np.sqrt(dsq + trace_sq)
    return norm_hs(u, 1.0) / denom


def _trace_defect(data):
    """h - int_0^b g dz as a surface spectrum (mean-compatibility quantity)."""
    return data.h - vertical_integral(data.g)


def norm_y(data, s, warn_mean=True):
    """Discrete norm of the five-component data tuple at regularity s."""
    total = (
        _strip_hs_sq(data.f, s)
        + _strip_hs_sq(data.g, s + 1.0)
        + _surface_hs_sq(data.h, s + 1.5)
        + _surface_hs_sq(data.k, s + 0.5)
    )
    if data.l is not None:
        total += _surface_hs_sq(data.l, s + 0.5)
    defect = _trace_defect(data)
    if warn_mean:
        sem = seminorm_hdot_minus1(defect)
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IncompatibleMeanWarning)
            sem = seminorm_hdot_minus1(defect)
    return float(np.sqrt(total + sem**2))


def norm_z(data, s, warn_mean=True):
    """Same as norm_y but ignoring the l slot (the l = 0 data space)."""
    stripped = DataTuple(data.f, data.g, data.h, data.k, None)
    return norm_y(stripped, s, warn_mean=warn_mean)


def norm_x_state(state, s):
    """Discrete solution norm: H^{s+2} x H^{s+1} x X^{s+5/2}."""
    return float(
        np.sqrt(
            _strip_hs_sq(state.u, s + 2.0)
            + _strip_hs_sq(state.p, s + 1.0)
            + norm_xs(state.eta, s + 2.5) ** 2
        )
    )
