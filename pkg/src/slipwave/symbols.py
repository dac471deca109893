"""Frequency symbols of the normal-stress problem and their proved bounds.

``m`` is the multiplier taking applied normal stress on the top boundary to
the vertical velocity trace, evaluated at reversed wave speed; ``rho`` is the
surface divisor

    rho(xi) = 2 pi i gamma xi_1 + (1 + 4 pi^2 |xi|^2 sigma) conj(m(xi)),

whose inverse turns the compatibility functional into the free surface.  All
asymptotic statements are two-sided with unknown constants, so checks fit the
constants over a sweep and test their stability instead of asserting absolute
values.

High frequencies confine the solution to a boundary layer of width
~ 1 / (2 pi |xi|) below the top; the vertical resolution is raised like
sqrt(|xi| b) to keep the layer resolved during wide sweeps.
"""

import csv
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .bvp import solve_adjoint
from .grid import ChebOps
from .params import BoundaryMode
from .bvp import get_lattice_solver

__all__ = [
    "SymbolTable",
    "build_symbol_table",
    "compute_m",
    "compute_rho",
    "rho_weight",
    "profile_bounds_check",
    "fit_asymptotic_slopes",
    "alpha_uniformity_probe",
    "write_symbol_csv",
    "SYMBOL_CSV_HEADER",
]


def resolved_cheb(xi, params, n_z_base):
    """Vertical operators with enough nodes to resolve the top boundary
    layer at this frequency."""
    absxi = float(np.sqrt((np.atleast_1d(xi) ** 2).sum()))
    need = int(math.ceil(7.7 * math.sqrt(max(absxi * params.b, 1.0)))) + 16
    return ChebOps(max(n_z_base, min(need, 480)), params.b)


def compute_m(xi, params, n_z=48, noslip=False, cheb=None):
    """Normal-stress-to-surface-velocity multiplier at reversed speed."""
    cheb = cheb or resolved_cheb(xi, params, n_z)
    sol = solve_adjoint(xi, 1.0, params, cheb, noslip=noslip)
    return complex(sol.w[-1, params.n - 1])


def compute_rho(xi, params, n_z=48, noslip=False, m=None):
    """Surface divisor built from the reversed-speed multiplier."""
    if params.gamma == 0.0:
        raise ValueError("rho requires a nonzero wave speed")
    if m is None:
        m = compute_m(xi, params, n_z=n_z, noslip=noslip)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xi_sq = float((xi**2).sum())
    return (2j * np.pi * params.gamma * xi[0]
            + (1.0 + 4.0 * np.pi**2 * xi_sq * params.sigma) * np.conj(m))


def rho_weight(xi_vecs, sigma):
    """Two-sided comparison weight for |rho|^2: (xi_1^2 + |xi|^4) inside the
    unit ball and (1 + |xi|^2) outside; sigma = 0 replaces the low-frequency
    weight by |xi|^2."""
    xi_vecs = np.atleast_2d(np.asarray(xi_vecs, dtype=float))
    r2 = (xi_vecs**2).sum(axis=-1)
    low = r2 < 1.0
    if sigma > 0:
        low_w = xi_vecs[:, 0] ** 2 + r2**2
    else:
        low_w = r2
    return np.where(low, low_w, 1.0 + r2)


@dataclass
class SymbolTable:
    """Adjoint profiles and symbols for every lattice frequency.

    V has shape (n_modes, N_z, n); Q has shape (n_modes, N_z); m and rho are
    flat arrays over the lattice.  Immutable once built; cached per
    (grid, params, problem kind).
    """

    grid: object
    params: object
    noslip: bool
    V: np.ndarray
    Q: np.ndarray
    m: np.ndarray
    rho: np.ndarray

    def m_lattice(self):
        return self.m.reshape(self.grid.freq_shape)

    def rho_lattice(self):
        return self.rho.reshape(self.grid.freq_shape)


_TABLE_CACHE = OrderedDict()
_TABLE_CACHE_SIZE = 6


def build_symbol_table(grid, params, noslip=False, threads=None):
    key = (grid, params.key(), noslip)
    if key in _TABLE_CACHE:
        _TABLE_CACHE.move_to_end(key)
        return _TABLE_CACHE[key]
    mode = BoundaryMode.ADJOINT_NOSLIP if noslip else BoundaryMode.ADJOINT_SLIP
    solver = get_lattice_solver(grid, params, mode, threads=threads)
    F = grid.n_modes
    n = grid.n
    k_hat = np.zeros((F, n), dtype=complex)
    k_hat[:, n - 1] = 1.0
    f_hat = np.zeros((F, grid.N_z, n), dtype=complex)
    g_hat = np.zeros((F, grid.N_z), dtype=complex)
    l_hat = None if noslip else np.zeros((F, n - 1), dtype=complex)
    V, Q = solver.solve_all(f_hat, g_hat, k_hat, l_hat)
    m = V[:, -1, n - 1].copy()
    xi_sq = (grid.xi_flat**2).sum(axis=-1)
    rho = (2j * np.pi * params.gamma * grid.xi_flat[:, 0]
           + (1.0 + 4.0 * np.pi**2 * xi_sq * params.sigma) * np.conj(m))
    table = SymbolTable(grid=grid, params=params, noslip=noslip,
                        V=V, Q=Q, m=m, rho=rho)
    _TABLE_CACHE[key] = table
    while len(_TABLE_CACHE) > _TABLE_CACHE_SIZE:
        _TABLE_CACHE.popitem(last=False)
    return table


def clear_symbol_cache():
    _TABLE_CACHE.clear()


def _minmax_model(absxi, low_exp=2.0, high_exp=-1.0):
    absxi = np.asarray(absxi, dtype=float)
    return np.minimum(absxi**low_exp, absxi**high_exp)


def profile_bounds_check(xi_list, params, n_z=48):
    """Profile-integral bounds for the adjoint solution across a sweep.

    For each frequency returns int |V|^2 dz, |V(0)|^2, and int |Q - 1|^2 dz,
    plus fitted constants against min(|xi|^2, |xi|^-2) and |xi|^2; ``passed``
    means a single constant covers the whole sweep with a sane spread.
    """
    rows = []
    for xi in xi_list:
        cheb = resolved_cheb(xi, params, n_z)
        sol = solve_adjoint(xi, 1.0, params, cheb)
        wz = cheb.weights
        int_v2 = float((np.abs(sol.w) ** 2).sum(axis=-1) @ wz)
        v0_sq = float((np.abs(sol.w[0]) ** 2).sum())
        int_qm1 = float((np.abs(sol.q - 1.0) ** 2) @ wz)
        absxi = float(np.sqrt((np.atleast_1d(xi) ** 2).sum()))
        rows.append({
            "xi": np.atleast_1d(xi), "abs_xi": absxi, "int_V2": int_v2,
            "V0_sq": v0_sq, "int_Qm1_sq": int_qm1,
            "m": compute_m(xi, params, n_z=n_z, cheb=cheb),
        })
    absxi = np.array([r["abs_xi"] for r in rows])
    model_v = _minmax_model(absxi, 2.0, -2.0)
    c_v = np.array([r["int_V2"] for r in rows]) / model_v
    c_v0 = np.array([r["V0_sq"] for r in rows]) / model_v
    low = absxi <= 1.0
    c_q = np.array([r["int_Qm1_sq"] for r in rows])[low] / absxi[low] ** 2
    report = {
        "rows": rows,
        "c_V": float(c_v.max()),
        "c_V0": float(c_v0.max()),
        "c_Q_low": float(c_q.max()) if c_q.size else float("nan"),
        "spread_V": float(c_v.max() / c_v.min()),
        "passed": bool(np.isfinite(c_v).all() and np.isfinite(c_v0).all()),
    }
    return report


@dataclass
class SlopeFit:
    low_slope: float
    high_slope: float
    low_constant: float
    high_constant: float
    low_points: np.ndarray = field(repr=False, default=None)
    high_points: np.ndarray = field(repr=False, default=None)


def _loglog_slope(absxi, values):
    ln_x = np.log(absxi)
    ln_y = np.log(values)
    slope, intercept = np.polyfit(ln_x, ln_y, 1)
    return float(slope), float(np.exp(intercept))


def fit_asymptotic_slopes(params, low_range=(1e-3, 1e-2), high_range=(1e2, 1e3),
                          n_points=9, n_z=48, noslip=False, direction=None):
    """Least-squares log-log slopes of |m| on the two asymptotic branches."""
    for lo, hi in (low_range, high_range):
        if hi <= lo:
            raise ValueError("empty frequency range")
    if (math.log10(low_range[1] / low_range[0])
            + math.log10(high_range[1] / high_range[0]) < 1.5):
        raise ValueError("need at least two decades of combined range")
    d = params.n - 1
    direction = np.ones(d) / np.sqrt(d) if direction is None else np.asarray(direction)

    def branch(rng_pair):
        radii = np.geomspace(rng_pair[0], rng_pair[1], n_points)
        vals = np.array([
            abs(compute_m(r * direction, params, n_z=n_z, noslip=noslip))
            for r in radii
        ])
        return radii, vals

    lo_r, lo_v = branch(low_range)
    hi_r, hi_v = branch(high_range)
    lo_slope, lo_c = _loglog_slope(lo_r, lo_v)
    hi_slope, hi_c = _loglog_slope(hi_r, hi_v)
    return SlopeFit(low_slope=lo_slope, high_slope=hi_slope,
                    low_constant=lo_c, high_constant=hi_c,
                    low_points=np.stack([lo_r, lo_v]),
                    high_points=np.stack([hi_r, hi_v]))


def alpha_uniformity_probe(alphas, xi_list, params, n_z=48):
    """Fitted symbol-bound constants per alpha, with their overall spread.

    For each alpha the probe fits the two-sided constant of |m| against
    min(|xi|^2, |xi|^-1) and of |rho|^2 against the piecewise weight; the
    max/min ratios across the alpha grid quantify uniformity.
    """
    table = []
    for alpha in alphas:
        if not 0.0 < alpha < 1.0:
            raise ValueError("uniformity probe expects alpha in (0, 1)")
        p = params.with_alpha(alpha)
        absxi = np.array([float(np.sqrt((np.atleast_1d(x) ** 2).sum()))
                          for x in xi_list])
        m_vals = np.array([compute_m(x, p, n_z=n_z) for x in xi_list])
        rho_vals = np.array([compute_rho(x, p, m=m) for x, m in zip(xi_list, m_vals)])
        model = _minmax_model(absxi, 2.0, -1.0)
        ratio_m = np.abs(m_vals) / model
        w = rho_weight(np.atleast_2d(np.array([np.atleast_1d(x) for x in xi_list])),
                       p.sigma)
        ratio_rho = np.abs(rho_vals) ** 2 / w
        table.append({
            "alpha": alpha,
            "c_m_upper": float(ratio_m.max()),
            "c_m_lower": float(ratio_m.min()),
            "c_rho_upper": float(ratio_rho.max()),
            "c_rho_lower": float(ratio_rho.min()),
            "re_m_negative": bool((np.real(m_vals) < 0).all()),
        })
    uppers = np.array([t["c_m_upper"] for t in table])
    lowers = np.array([t["c_m_lower"] for t in table])
    return {
        "per_alpha": table,
        "spread_upper": float(uppers.max() / uppers.min()),
        "spread_lower": float(lowers.max() / lowers.min()),
    }


SYMBOL_CSV_HEADER = ["xi_1", "xi_2", "Re_m", "Im_m", "Re_rho", "Im_rho",
                     "intV2", "V0sq", "intQm1sq", "alpha"]


def write_symbol_csv(path, params, xi_list, alphas=None, n_z=48):
    """One CSV row per (frequency, alpha): symbols plus profile integrals."""
    alphas = [params.alpha] if alphas is None else alphas
    d = params.n - 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = SYMBOL_CSV_HEADER.copy()
        if d == 1:
            header.remove("xi_2")
        writer.writerow(header)
        for alpha in alphas:
            p = params.with_alpha(alpha) if alpha != params.alpha else params
            for xi in xi_list:
                xi_vec = np.atleast_1d(np.asarray(xi, dtype=float))
                cheb = resolved_cheb(xi_vec, p, n_z)
                sol = solve_adjoint(xi_vec, 1.0, p, cheb)
                m = complex(sol.w[-1, p.n - 1])
                rho = compute_rho(xi_vec, p, m=m)
                wz = cheb.weights
                row = list(xi_vec) + [
                    m.real, m.imag, rho.real, rho.imag,
                    float((np.abs(sol.w) ** 2).sum(axis=-1) @ wz),
                    float((np.abs(sol.w[0]) ** 2).sum()),
                    float((np.abs(sol.q - 1.0) ** 2) @ wz),
                    alpha,
                ]
                writer.writerow([f"{v:.17g}" for v in row])
    return path
