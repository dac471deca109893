"""Per-frequency two-point boundary-value problems.

After the horizontal Fourier transform, the forward operator with wave speed
gamma acts on profiles (w, q) on [0, b] as

    momentum_j :  ik_j q - (D^2 - k2) w_j - ik_j (ik . w' + D w_n) - g ik_1 w_j
    momentum_n :  D q   - (D^2 - k2) w_n - D (ik . w' + D w_n)    - g ik_1 w_n
    continuity :  ik . w' + D w_n

with ik_j = 2 pi i xi_j and k2 = 4 pi^2 |xi|^2.  The discrete closure places
momentum rows at interior nodes (vertical momentum also at the top), the
continuity row at every node except the top, stress rows at the top node, and
slip / no-penetration rows at the bottom; the pressure carries no boundary
row.  Rows are max-norm equilibrated before factorization because the slip
row is unbalanced for small alpha.

The adjoint mode transposes the slip matrix and negates the wave speed, which
realizes the normal-stress-to-velocity problem when driven by data
(0, 0, psi e_n, 0).
"""

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .grid import ChebOps
from .params import BoundaryMode

__all__ = [
    "FrequencySolveError",
    "FrequencySolution",
    "assemble_system",
    "solve_frequency",
    "solve_adjoint",
    "residual_norm",
    "apply_operator",
    "LatticeSolver",
    "get_lattice_solver",
    "clear_solver_cache",
]

MAX_CONDITION = 1e13


class FrequencySolveError(RuntimeError):
    """Singular or hopelessly ill-conditioned per-frequency system."""

    def __init__(self, xi, mode, cond):
        self.xi = np.atleast_1d(xi)
        self.mode = mode
        self.cond = cond
        super().__init__(
            f"per-frequency system at xi={self.xi.tolist()} "
            f"({mode.value}) has condition estimate {cond:.2e}"
        )


@dataclass
class FrequencySolution:
    """Velocity profile w (N_z, n) and pressure profile q (N_z,)."""

    w: np.ndarray
    q: np.ndarray


def _wavevectors(xi, d):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != d:
        raise ValueError(f"frequency must have {d} components")
    ik = 2j * np.pi * xi
    k2 = float(4.0 * np.pi**2 * (xi**2).sum())
    return xi, ik, k2


def _collocation_blocks(xi, params, mode, cheb):
    """Full-height collocation rows of the forward operator at frequency xi."""
    n = params.n
    d = n - 1
    _, ik, k2 = _wavevectors(xi, d)
    gamma_eff, _ = params.effective(mode)
    N = cheb.n_z
    U = (n + 1) * N
    D, D2 = cheb.D, cheb.D2
    eye = np.eye(N)

    def block(c):
        return slice(c * N, (c + 1) * N)

    transport = (k2 - gamma_eff * ik[0]) * eye

    mom = np.zeros((n, N, U), dtype=complex)
    for j in range(d):
        mom[j][:, block(j)] += -D2 + transport
        for m in range(d):
            mom[j][:, block(m)] += -ik[j] * ik[m] * eye
        mom[j][:, block(d)] += -ik[j] * D
        mom[j][:, block(n)] += ik[j] * eye
    mom[d][:, block(d)] += -2.0 * D2 + transport
    for m in range(d):
        mom[d][:, block(m)] += -ik[m] * D
    mom[d][:, block(n)] += D

    cont = np.zeros((N, U), dtype=complex)
    for m in range(d):
        cont[:, block(m)] += ik[m] * eye
    cont[:, block(d)] += D

    # stress rows at the top node: tangential -(D w_j + ik_j w_n), normal q - 2 D w_n
    top = np.zeros((n, U), dtype=complex)
    for j in range(d):
        top[j, block(j)] = -D[-1, :]
        top[j, d * N + N - 1] += -ik[j]
    top[n - 1, block(d)] = -2.0 * D[-1, :]
    top[n - 1, (n + 1) * N - 1] += 1.0

    bot = np.zeros((n, U), dtype=complex)
    if mode.is_noslip:
        for j in range(n):
            bot[j, j * N] = 1.0
    else:
        _, beta_eff = params.effective(mode)
        alpha = params.alpha
        for j in range(d):
            bot[j, block(j)] = -alpha * D[0, :]
            bot[j, d * N] += -alpha * ik[j]
            for m in range(n):
                bot[j, m * N] += beta_eff[j, m]
        bot[d, d * N] = 1.0
    return mom, cont, top, bot


def assemble_system(xi, params, mode, cheb):
    """Square dense operator of size (n+1) N_z for one frequency."""
    n = params.n
    d = n - 1
    N = cheb.n_z
    U = (n + 1) * N
    mom, cont, top, bot = _collocation_blocks(xi, params, mode, cheb)
    A = np.zeros((U, U), dtype=complex)
    for j in range(d):
        A[j * N] = bot[j]
        A[j * N + 1 : j * N + N - 1] = mom[j][1 : N - 1]
        A[j * N + N - 1] = top[j]
    A[d * N] = bot[d]
    A[d * N + 1 : (d + 1) * N] = mom[d][1:]
    A[n * N : n * N + N - 1] = cont[: N - 1]
    A[U - 1] = top[n - 1]
    return A


def _rhs_vector(data, n, N, mode):
    f_hat, g_hat, k_hat, l_hat = data
    d = n - 1
    U = (n + 1) * N
    f_hat = np.zeros((N, n)) if f_hat is None else np.asarray(f_hat)
    g_hat = np.zeros(N) if g_hat is None else np.asarray(g_hat).reshape(N)
    k_hat = np.zeros(n) if k_hat is None else np.asarray(k_hat)
    rhs = np.zeros(U, dtype=complex)
    for j in range(d):
        rhs[j * N + 1 : j * N + N - 1] = f_hat[1 : N - 1, j]
        rhs[j * N + N - 1] = k_hat[j]
    rhs[d * N + 1 : (d + 1) * N] = f_hat[1:, d]
    rhs[n * N : n * N + N - 1] = g_hat[: N - 1]
    rhs[U - 1] = k_hat[n - 1]
    if not mode.is_noslip and l_hat is not None:
        l_hat = np.asarray(l_hat)
        for j in range(d):
            rhs[j * N] = l_hat[j]
    return rhs


class _Factor:
    """Equilibrated LU of one per-frequency matrix."""

    __slots__ = ("lu", "piv", "scale", "cond")

    def __init__(self, A, xi, mode):
        self.scale = 1.0 / np.abs(A).max(axis=1)
        As = A * self.scale[:, None]
        anorm = np.linalg.norm(As, 1)
        self.lu, self.piv = sla.lu_factor(As, check_finite=False)
        rcond, info = lapack.zgecon(self.lu, anorm, norm="1")
        cond = np.inf if rcond == 0 else 1.0 / rcond
        if info != 0 or not np.isfinite(cond) or cond > MAX_CONDITION:
            raise FrequencySolveError(xi, mode, cond)
        self.cond = cond

    def solve(self, rhs):
        return sla.lu_solve((self.lu, self.piv), rhs * self.scale,
                            check_finite=False)

    def solve_conj(self, rhs):
        # Solve conj(A) x = rhs through the factorization of A.
        return np.conj(self.solve(np.conj(rhs)))


def _unpack(x, n, N):
    w = x[: n * N].reshape(n, N).T.copy()
    q = x[n * N :].copy()
    return FrequencySolution(w=w, q=q)


def solve_frequency(xi, data, params, mode, cheb):
    """Solve one frequency for data profiles (f_hat, g_hat, k_hat, l_hat).

    f_hat: (N_z, n) interior forcing; g_hat: (N_z,) divergence data;
    k_hat: (n,) top stress; l_hat: (d,) bottom slip data (ignored and
    rejected for no-slip modes).
    """
    if mode.is_noslip and data[3] is not None:
        raise ValueError("no-slip problem takes no bottom slip data")
    A = assemble_system(xi, params, mode, cheb)
    fac = _Factor(A, xi, mode)
    rhs = _rhs_vector(data, params.n, cheb.n_z, mode)
    return _unpack(fac.solve(rhs), params.n, cheb.n_z)


def solve_adjoint(xi, psi_hat, params, cheb, noslip=False):
    """Normal-stress problem: data (0, 0, psi e_n, 0) in the adjoint mode."""
    n = params.n
    k_hat = np.zeros(n, dtype=complex)
    k_hat[n - 1] = psi_hat
    mode = BoundaryMode.ADJOINT_NOSLIP if noslip else BoundaryMode.ADJOINT_SLIP
    l_hat = None if noslip else np.zeros(n - 1, dtype=complex)
    return solve_frequency(xi, (None, None, k_hat, l_hat), params, mode, cheb)


def apply_operator(xi, solution, params, mode, cheb):
    """Forward operator at every node: (momentum, divergence, top stress,
    bottom slip rows).  The slip entry is None for no-slip modes."""
    n = params.n
    d = n - 1
    mom, cont, top, bot = _collocation_blocks(xi, params, mode, cheb)
    x = np.concatenate([solution.w.T.reshape(-1), solution.q])
    momentum = np.stack([mom[j] @ x for j in range(n)], axis=-1)
    div = cont @ x
    stress = top @ x
    slip = None if mode.is_noslip else bot[:d] @ x
    return momentum, div, stress, slip


def residual_norm(solution, data, xi, params, mode, cheb):
    """Max over row groups of the RMS defect at the collocated rows."""
    n = params.n
    d = n - 1
    N = cheb.n_z
    f_hat, g_hat, k_hat, l_hat = data
    f_hat = np.zeros((N, n)) if f_hat is None else np.asarray(f_hat)
    g_hat = np.zeros(N) if g_hat is None else np.asarray(g_hat).reshape(N)
    k_hat = np.zeros(n) if k_hat is None else np.asarray(k_hat)
    momentum, div, stress, slip = apply_operator(xi, solution, params, mode, cheb)

    def rms(v):
        v = np.atleast_1d(v)
        return float(np.sqrt(np.mean(np.abs(v) ** 2)))

    groups = [
        rms(momentum[1 : N - 1, :d] - f_hat[1 : N - 1, :d]) if d else 0.0,
        rms(momentum[1:, d] - f_hat[1:, d]),
        rms(div[: N - 1] - g_hat[: N - 1]),
        rms(stress - k_hat),
    ]
    if mode.is_noslip:
        groups.append(rms(solution.w[0, :]))
    else:
        want = np.zeros(d, dtype=complex) if l_hat is None else np.asarray(l_hat)
        groups.append(rms(slip - want))
        groups.append(rms(solution.w[0, n - 1]))
    return max(groups)


class LatticeSolver:
    """Cached factorizations for every lattice frequency of one problem.

    The matrix at -xi is the conjugate of the matrix at xi, so only one
    member of each (xi, -xi) pair is factored; the partner is solved through
    conjugation.  Thread-parallel factorization is safe because entries are
    independent.
    """

    def __init__(self, grid, params, mode, threads=None):
        self.grid = grid
        self.params = params
        self.mode = mode
        self.cheb = grid.cheb
        self._threads = threads
        flat = np.arange(grid.n_modes).reshape(grid.freq_shape)
        partner = flat
        for ax in range(grid.d):
            partner = np.roll(np.flip(partner, axis=ax), 1, axis=ax)
        self.partner = partner.reshape(-1)
        self.canonical = np.flatnonzero(np.arange(grid.n_modes) <= self.partner)
        self._factors = None

    def factor(self):
        if self._factors is not None:
            return
        xi_flat = self.grid.xi_flat

        def make(i):
            A = assemble_system(xi_flat[i], self.params, self.mode, self.cheb)
            return i, _Factor(A, xi_flat[i], self.mode)

        self._factors = {}
        if self._threads and self._threads > 1:
            with ThreadPoolExecutor(max_workers=self._threads) as pool:
                for i, fac in pool.map(make, self.canonical):
                    self._factors[i] = fac
        else:
            for i in self.canonical:
                self._factors[i] = make(i)[1]

    @property
    def max_condition(self):
        self.factor()
        return max(f.cond for f in self._factors.values())

    def solve_all(self, f_hat, g_hat, k_hat, l_hat=None):
        """Solve every lattice frequency.

        Shapes (F = number of lattice modes): f_hat (F, N_z, n),
        g_hat (F, N_z), k_hat (F, n), l_hat (F, d) or None.  Returns
        w (F, N_z, n) and q (F, N_z).
        """
        self.factor()
        grid = self.grid
        n = self.params.n
        N = self.cheb.n_z
        F = grid.n_modes
        w = np.empty((F, N, n), dtype=complex)
        q = np.empty((F, N), dtype=complex)

        def rhs_at(i):
            li = None if l_hat is None else l_hat[i]
            return _rhs_vector((f_hat[i], g_hat[i], k_hat[i], li), n, N,
                               self.mode)

        for i in self.canonical:
            fac = self._factors[i]
            x = fac.solve(rhs_at(i))
            sol = _unpack(x, n, N)
            w[i], q[i] = sol.w, sol.q
            j = self.partner[i]
            if j != i:
                sol_j = _unpack(fac.solve_conj(rhs_at(j)), n, N)
                w[j], q[j] = sol_j.w, sol_j.q
        return w, q


_SOLVER_CACHE = OrderedDict()
_SOLVER_CACHE_SIZE = 6


def get_lattice_solver(grid, params, mode, threads=None):
    key = (grid, params.key(), mode)
    if key in _SOLVER_CACHE:
        _SOLVER_CACHE.move_to_end(key)
        return _SOLVER_CACHE[key]
    solver = LatticeSolver(grid, params, mode, threads=threads)
    _SOLVER_CACHE[key] = solver
    while len(_SOLVER_CACHE) > _SOLVER_CACHE_SIZE:
        _SOLVER_CACHE.popitem(last=False)
    return solver


def clear_solver_cache():
    _SOLVER_CACHE.clear()
