"""Compatibility functional, free-surface construction, and the full linear
solve.

The bilinear pairing of a data tuple (f, g, h, k, l) against the adjoint
profiles (V, Q) at one frequency reads

    Lambda(xi) = int_0^b [ f . conj(V) - g conj(Q) ] dz
                 - k . conj(V(b)) + h + (1/alpha) l' . conj(V'(0)),

where primes select tangential components.  Lambda vanishes exactly on data
produced by the forward operator together with its top normal trace; the
free surface is eta(xi) = Lambda(xi) / rho(xi) away from xi = 0, with the
zero mode pinned to 0 (rho vanishes only there).  Subtracting the eta terms
from the data then lands it in the solvable range, and a per-frequency solve
of the slip (or no-slip) problem finishes the isomorphism inversion.
"""

import logging

import numpy as np

from .bvp import get_lattice_solver
from .fields import DataTuple, SolutionState, StripSpectrum, SurfaceSpectrum
from .norms import norm_hs, norm_xs, norm_y, seminorm_hdot_minus1, vertical_integral
from .params import BoundaryMode
from .symbols import build_symbol_table

__all__ = [
    "compute_lambda",
    "construct_eta",
    "solve_linear_full",
    "apply_forward",
    "divergence_trace_check",
]

log = logging.getLogger(__name__)


def _data_as_flat(data):
    grid = data.grid
    F = grid.n_modes
    f = data.f.coeffs.reshape(F, grid.N_z, grid.n)
    g = data.g.coeffs.reshape(F, grid.N_z)
    h = data.h.coeffs.reshape(F)
    k = data.k.coeffs.reshape(F, grid.n)
    l = None if data.l is None else data.l.coeffs.reshape(F, grid.d)
    return f, g, h, k, l


def compute_lambda(data, params, noslip=False, table=None):
    """Compatibility functional of the data tuple, one value per frequency."""
    grid = data.grid
    table = table or build_symbol_table(grid, params, noslip=noslip)
    f, g, h, k, l = _data_as_flat(data)
    wz = grid.cheb.weights
    Vc = np.conj(table.V)
    Qc = np.conj(table.Q)
    lam = np.einsum("fzc,fzc,z->f", f, Vc, wz)
    lam -= np.einsum("fz,fz,z->f", g, Qc, wz)
    lam -= np.einsum("fc,fc->f", k, Vc[:, -1, :])
    lam += h
    if l is not None:
        lam += np.einsum("fc,fc->f", l, Vc[:, 0, : grid.d]) / params.alpha
    return SurfaceSpectrum(grid, lam.reshape(grid.freq_shape))


def construct_eta(data, params, noslip=False, table=None):
    """Free surface from the compatibility functional: eta = Lambda / rho.

    The zero mode is pinned to 0; rho vanishing anywhere else on the lattice
    is a hard error.
    """
    grid = data.grid
    params.require_surface(grid.d)
    table = table or build_symbol_table(grid, params, noslip=noslip)
    lam = compute_lambda(data, params, noslip=noslip, table=table).coeffs.reshape(-1)
    rho = table.rho
    zero_mode = np.all(grid.xi_flat == 0.0, axis=1)
    bad = (np.abs(rho) == 0.0) & ~zero_mode
    if bad.any():
        raise ZeroDivisionError(
            f"rho vanishes at nonzero frequency {grid.xi_flat[bad][0].tolist()}"
        )
    eta = np.zeros_like(lam)
    np.divide(lam, rho, out=eta, where=~zero_mode)
    return SurfaceSpectrum(grid, eta.reshape(grid.freq_shape))


def _eta_shifts(grid, eta_flat, sigma):
    """Spectral data shifts induced by the surface: gravity column for f,
    transport for h, capillary normal stress for k."""
    ik = 2j * np.pi * grid.xi_flat
    grad_eta = ik * eta_flat[:, None]  # (F, d)
    h_shift = grad_eta[:, 0]  # times gamma by the caller
    lap_eta = -(4.0 * np.pi**2) * (grid.xi_flat**2).sum(axis=1) * eta_flat
    k_shift = sigma * lap_eta
    return grad_eta, h_shift, k_shift


def solve_linear_full(data, params, mode="generic", threads=None):
    """Invert the linearized free-surface operator.

    mode: 'generic' uses the five-component data tuple; 'l-zero' solves the
    four-component problem with homogeneous slip data; 'noslip' solves the
    no-slip variant.  Returns the (u, p, eta) state.
    """
    grid = data.grid
    params.require_surface(grid.d)
    noslip = mode == "noslip"
    if mode == "l-zero" and data.l is not None and np.abs(data.l.coeffs).max() > 0:
        raise ValueError("l-zero mode expects homogeneous slip data")
    if mode == "generic" and data.l is None:
        raise ValueError("generic mode needs the l component (use l-zero)")
    table = build_symbol_table(grid, params, noslip=noslip, threads=threads)
    eta = construct_eta(data, params, noslip=noslip, table=table)

    F = grid.n_modes
    f, g, h, k, l = _data_as_flat(data)
    eta_flat = eta.coeffs.reshape(F)
    grad_eta, h_shift, k_shift = _eta_shifts(grid, eta_flat, params.sigma)
    f_mod = f.copy()
    f_mod[:, :, : grid.d] -= grad_eta[:, None, :]
    k_mod = k.copy()
    k_mod[:, grid.d] -= k_shift

    bvp_mode = BoundaryMode.NOSLIP if noslip else BoundaryMode.SLIP
    solver = get_lattice_solver(grid, params, bvp_mode, threads=threads)
    l_arg = None
    if mode == "generic":
        l_arg = l
    elif mode == "l-zero" and not noslip:
        l_arg = np.zeros((F, grid.d), dtype=complex)
    w, q = solver.solve_all(f_mod, g, k_mod, l_arg)

    state = SolutionState(
        u=StripSpectrum(grid, w.reshape(grid.freq_shape + (grid.N_z, grid.n))),
        p=StripSpectrum(grid, q.reshape(grid.freq_shape + (grid.N_z, 1))),
        eta=eta,
    )
    if log.isEnabledFor(logging.DEBUG):
        s = 2.0
        dn = norm_y(data, s, warn_mean=False)
        if dn > 0:
            log.debug("eta construction constant ||eta||_X / ||data|| = %.3e",
                      norm_xs(eta, s + 2.5) / dn)
    return state


def apply_forward(state, params, mode="generic", threads=None):
    """Apply the forward linearized operator to a state.

    Returns the data tuple (f, g, h, k, l); l is omitted for 'noslip'.  All
    components are evaluated from the same spectral derivatives used by the
    solver rows, at every vertical node.
    """
    grid = state.grid
    F = grid.n_modes
    n = grid.n
    d = grid.d
    N = grid.N_z
    noslip = mode == "noslip"
    w = state.u.coeffs.reshape(F, N, n)
    q = state.p.coeffs.reshape(F, N)
    eta_flat = state.eta.coeffs.reshape(F)

    ik = 2j * np.pi * grid.xi_flat  # (F, d)
    k2 = 4.0 * np.pi**2 * (grid.xi_flat**2).sum(axis=1)  # (F,)
    D = grid.cheb.D
    dw = np.einsum("ij,fjc->fic", D, w)
    ddw = np.einsum("ij,fjc->fic", D, dw)
    dq = np.einsum("ij,fj->fi", D, q)

    div = dw[:, :, d].copy()
    for m in range(d):
        div += ik[:, m, None] * w[:, :, m]
    ddiv = np.einsum("ij,fj->fi", D, div)

    transport = k2[:, None] - params.gamma * ik[:, 0, None]
    f_out = np.empty((F, N, n), dtype=complex)
    for j in range(d):
        f_out[:, :, j] = (ik[:, j, None] * q - ddw[:, :, j]
                          + transport * w[:, :, j]
                          - ik[:, j, None] * div)
    f_out[:, :, d] = dq - ddw[:, :, d] + transport * w[:, :, d] - ddiv

    grad_eta, h_shift, k_shift = _eta_shifts(grid, eta_flat, params.sigma)
    f_out[:, :, :d] += grad_eta[:, None, :]

    h_out = w[:, -1, d] + params.gamma * h_shift

    k_out = np.empty((F, n), dtype=complex)
    for j in range(d):
        k_out[:, j] = -(dw[:, -1, j] + ik[:, j] * w[:, -1, d])
    k_out[:, d] = q[:, -1] - 2.0 * dw[:, -1, d] + k_shift

    l_out = None
    if not noslip:
        l_out = np.empty((F, d), dtype=complex)
        beta = params.beta
        for j in range(d):
            l_out[:, j] = (-params.alpha * (dw[:, 0, j] + ik[:, j] * w[:, 0, d])
                           + np.einsum("m,fm->f", beta[j], w[:, 0, :]))

    fs = grid.freq_shape
    return DataTuple(
        f=StripSpectrum(grid, f_out.reshape(fs + (N, n))),
        g=StripSpectrum(grid, div.reshape(fs + (N, 1))),
        h=SurfaceSpectrum(grid, h_out.reshape(fs)),
        k=SurfaceSpectrum(grid, k_out.reshape(fs + (n,))),
        l=None if l_out is None else SurfaceSpectrum(grid, l_out.reshape(fs + (d,))),
    )


def divergence_trace_check(u):
    """Low-frequency seminorm of u_n(., b) - int_0^b div u dz, and its ratio
    to the proved bound 2 pi sqrt(b) ||u||_{L^2}."""
    from .norms import divergence

    grid = u.grid
    if u.ncomp != grid.n:
        raise ValueError("divergence trace check needs a velocity field")
    bottom = np.abs(u.coeffs[..., 0, grid.d]).max()
    scale = max(np.abs(u.coeffs).max(), 1e-300)
    if bottom > 1e-10 * scale:
        raise ValueError("bottom normal trace must vanish")
    top_normal = SurfaceSpectrum(grid, u.coeffs[..., -1, grid.d])
    integrated = vertical_integral(divergence(u))
    value = seminorm_hdot_minus1(top_normal - integrated)
    bound = 2.0 * np.pi * np.sqrt(grid.b) * norm_hs(u, 0.0)
    ratio = value / bound if bound > 0 else 0.0
    return value, ratio
