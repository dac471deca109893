"""Flattening geometry and the full nonlinear residual.

The unknown fluid domain is pulled back to the flat strip by the map
F(x', z) = (x', z + eta(x') phi(z)), where the cutoff phi vanishes below
b/4 and equals one above 3b/4, so the geometry matrix is exactly the
identity near the bottom and the slip boundary terms stay linear there.
With J = 1 + eta phi' and K = 1/J, the inverse-transpose Jacobian is

    A = [[ I , -grad' eta phi K ],
         [ 0 ,        K        ]].

Nonlinear products are formed pointwise on a 3/2-dealiased horizontal grid
and truncated back to the solution band; vertical derivatives act on the
Chebyshev nodes directly.  Ambient forcing recipes are separable
horizontal x vertical profiles, so compositions with F only displace the
vertical argument and are evaluated exactly.

The residual components are arranged so that the state derivative at the
rest state is exactly the linearized surface operator: interior momentum
with the gravity column, scaled divergence, kinematic trace, traction
balance, and (for the generic problem) the slip row alpha S_A e_n + A(u).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import DataTuple, SolutionState, StripSpectrum, SurfaceSpectrum
from .grid import Grid

__all__ = [
    "NotADiffeomorphism",
    "cutoff_profile",
    "FlatteningMaps",
    "build_flattening",
    "pullback",
    "mean_curvature",
    "HorizontalProfile",
    "VerticalProfile",
    "AmbientField",
    "ForcingSpec",
    "eval_xi_residual",
    "directional_derivative",
    "slip_check",
]


class NotADiffeomorphism(RuntimeError):
    """The surface displacement destroys invertibility of the flattening."""


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 + t * (-15.0 + 6.0 * t))


def _smoothstep_prime(t):
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * tc**2 * (1.0 - tc) ** 2, 0.0)


def cutoff_profile(z, b):
    """Vertical cutoff phi and its derivative: 0 below b/4, 1 above 3b/4,
    monotone quintic in between."""
    t = (np.asarray(z, dtype=float) - 0.25 * b) / (0.5 * b)
    return _smoothstep(t), _smoothstep_prime(t) / (0.5 * b)


@lru_cache(maxsize=8)
def _dealias_grid(grid):
    M = 3 * grid.N_x // 2
    M += M % 2
    return Grid(L=grid.L, d=grid.d, N_x=M, N_z=grid.N_z, b=grid.b)


def _resample_axis(c, axis, n_from, n_to):
    half = min(n_from, n_to) // 2
    shape = list(c.shape)
    shape[axis] = n_to
    out = np.zeros(shape, dtype=complex)
    src = [slice(None)] * c.ndim
    dst = [slice(None)] * c.ndim
    src[axis] = slice(0, half)
    dst[axis] = slice(0, half)
    out[tuple(dst)] = c[tuple(src)]
    src[axis] = slice(n_from - (half - 1), n_from)
    dst[axis] = slice(n_to - (half - 1), n_to)
    out[tuple(dst)] = c[tuple(src)]
    return out


def _resample(c, grid_from, grid_to):
    # The unpaired Nyquist column is dropped either way; fields in play are
    # band-limited below it.
    out = np.asarray(c, dtype=complex)
    for ax in range(grid_from.d):
        out = _resample_axis(out, ax, grid_from.N_x, grid_to.N_x)
    return out


@dataclass
class FlatteningMaps:
    """Pointwise geometry of the flattening on a physical grid.

    J and K are (phys..., N_z); ``a`` holds the off-diagonal column of the
    geometry matrix, shape (phys..., N_z, d); eta and its gradient are
    surface arrays.
    """

    grid: Grid
    eta_phys: np.ndarray
    grad_eta_phys: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    J: np.ndarray
    K: np.ndarray
    a: np.ndarray

    @property
    def min_jacobian(self):
        return float(self.J.min())

    def A_matrix(self):
        """Full geometry matrix, shape (phys..., N_z, n, n)."""
        d = self.grid.d
        n = d + 1
        shape = self.J.shape + (n, n)
        A = np.zeros(shape)
        for j in range(d):
            A[..., j, j] = 1.0
            A[..., j, n - 1] = self.a[..., j]
        A[..., n - 1, n - 1] = self.K
        return A

    def gradient_of_flattening(self):
        """grad F, shape (phys..., N_z, n, n)."""
        d = self.grid.d
        n = d + 1
        G = np.zeros(self.J.shape + (n, n))
        for j in range(d):
            G[..., j, j] = 1.0
            G[..., n - 1, j] = self.grad_eta_phys[..., j, None] * self.phi
        G[..., n - 1, n - 1] = self.J
        return G


def build_flattening(eta, grid=None, min_jacobian=0.0):
    """Geometry maps for a surface spectrum; errors unless min J > threshold."""
    grid = grid or eta.grid
    eta_on = eta if eta.grid is grid else SurfaceSpectrum(
        grid, _resample(eta.coeffs, eta.grid, grid))
    eta_phys = eta_on.to_samples()
    ik = 2j * np.pi * grid.xi
    grad = np.stack(
        [grid.to_samples(ik[..., j] * eta_on.coeffs) for j in range(grid.d)],
        axis=-1,
    )
    phi, dphi = cutoff_profile(grid.z_nodes, grid.b)
    J = 1.0 + eta_phys[..., None] * dphi
    if J.min() <= max(min_jacobian, 0.0):
        raise NotADiffeomorphism(
            f"flattening fails: min J = {J.min():.4f} <= {min_jacobian:.4f}"
        )
    K = 1.0 / J
    a = -grad[..., None, :] * phi[:, None] * K[..., None]
    return FlatteningMaps(grid=grid, eta_phys=eta_phys, grad_eta_phys=grad,
                          phi=phi, dphi=dphi, J=J, K=K, a=a)


# -- ambient forcing recipes -------------------------------------------------


@dataclass(frozen=True)
class HorizontalProfile:
    """Periodic horizontal envelope: a plane-wave mode or a wrapped Gaussian
    bump (minimum-image distance, negligible seam for width << L)."""

    kind: str
    center: tuple = ()
    width: float = 1.0
    mode: tuple = ()
    phase: float = 0.0

    def eval(self, xp, L):
        xp = np.asarray(xp, dtype=float)
        if self.kind == "mode":
            k = np.asarray(self.mode, dtype=float)
            return np.cos(2.0 * np.pi * (xp @ k) / L + self.phase)
        if self.kind == "bump":
            c = np.asarray(self.center, dtype=float)
            delta = xp - c
            delta -= L * np.round(delta / L)
            return np.exp(-(delta**2).sum(axis=-1) / (2.0 * self.width**2))
        raise ValueError(f"unknown horizontal profile {self.kind!r}")


@dataclass(frozen=True)
class VerticalProfile:
    """Vertical envelope evaluable at arbitrary (displaced) heights."""

    kind: str = "const"
    center: float = 0.0
    width: float = 1.0

    def eval(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "const":
            return np.ones_like(z)
        if self.kind == "linear":
            return z.copy()
        if self.kind == "gauss":
            return np.exp(-((z - self.center) ** 2) / (2.0 * self.width**2))
        raise ValueError(f"unknown vertical profile {self.kind!r}")


@dataclass(frozen=True)
class AmbientField:
    """Finite sum of separable terms amplitude * h(x') * v(z).

    ``amplitudes`` entries carry the tensor structure of the field: shape
    (n,) for vector forcing, (n, n) symmetric for stress.
    """

    terms: tuple = ()

    @classmethod
    def single(cls, amplitude, horizontal, vertical=VerticalProfile()):
        return cls(terms=((np.asarray(amplitude, dtype=float), horizontal,
                           vertical),))

    @property
    def is_zero(self):
        return len(self.terms) == 0

    def eval(self, xp, z, L):
        """Evaluate at horizontal points xp (..., d) and heights z, which
        must broadcast against the leading shape of xp."""
        out = None
        for amp, hor, ver in self.terms:
            envelope = np.asarray(hor.eval(xp, L))
            val = (envelope[..., None] * np.asarray(ver.eval(z)))
            val = val.reshape(val.shape + (1,) * amp.ndim) * amp
            out = val if out is None else out + val
        return out

    def eval_surface(self, xp, L):
        out = None
        for amp, hor, _ in self.terms:
            val = np.asarray(hor.eval(xp, L))
            val = val.reshape(val.shape + (1,) * amp.ndim) * amp
            out = val if out is None else out + val
        return out

    def scaled(self, factor):
        return AmbientField(terms=tuple(
            (amp * factor, hor, ver) for amp, hor, ver in self.terms))


@dataclass(frozen=True)
class ForcingSpec:
    """Stress-force tuple: ambient bulk force and surface stress (defined on
    the moving domain, composed with the flattening) plus their flat lifts."""

    bulk: AmbientField = AmbientField()
    stress: AmbientField = AmbientField()
    bulk_flat: AmbientField = AmbientField()
    stress_flat: AmbientField = AmbientField()

    def scaled(self, factor):
        return ForcingSpec(
            bulk=self.bulk.scaled(factor),
            stress=self.stress.scaled(factor),
            bulk_flat=self.bulk_flat.scaled(factor),
            stress_flat=self.stress_flat.scaled(factor),
        )

    @classmethod
    def gaussian_bump(cls, grid, amplitude, direction=None, center=None,
                      width=None, z_center=None, z_width=None):
        """Convenience bulk forcing: one Gaussian bump pushing along
        ``direction`` (default: the wave direction)."""
        d = grid.d
        n = grid.n
        vec = np.zeros(n)
        if direction is None:
            vec[0] = 1.0
        else:
            vec[:] = direction
        center = tuple([grid.L / 2.0] * d) if center is None else tuple(center)
        width = grid.L / 10.0 if width is None else width
        z_center = 0.5 * grid.b if z_center is None else z_center
        z_width = 0.2 * grid.b if z_width is None else z_width
        return cls(bulk=AmbientField.single(
            amplitude * vec,
            HorizontalProfile(kind="bump", center=center, width=width),
            VerticalProfile(kind="gauss", center=z_center, width=z_width),
        ))


def pullback(ambient, eta, grid):
    """Sample an ambient bulk field at the flattened image points and
    transform; returns a strip spectrum with the field's components."""
    flat = build_flattening(eta, grid)
    z = grid.z_nodes
    zd = z + flat.eta_phys[..., None] * flat.phi
    xp = grid.x_points
    vals = ambient.eval(xp, zd, grid.L)
    if vals is None:
        ncomp = 1
        vals = np.zeros(grid.freq_shape + (grid.N_z, ncomp))
    if vals.ndim == grid.d + 1:
        vals = vals[..., None]
    return StripSpectrum.from_samples(grid, vals)


def mean_curvature(eta, grid=None):
    """div'( grad' eta / sqrt(1 + |grad' eta|^2) ), dealiased."""
    grid = grid or eta.grid
    gp = _dealias_grid(grid)
    eta_p = SurfaceSpectrum(gp, _resample(eta.coeffs, grid, gp))
    ik = 2j * np.pi * gp.xi
    grad = np.stack(
        [gp.to_samples(ik[..., j] * eta_p.coeffs) for j in range(gp.d)],
        axis=-1,
    )
    slope = grad / np.sqrt(1.0 + (grad**2).sum(axis=-1))[..., None]
    out = np.zeros(gp.freq_shape, dtype=complex)
    for j in range(gp.d):
        out += ik[..., j] * gp.to_coefficients(slope[..., j])
    return SurfaceSpectrum(grid, _resample(out, gp, grid))


# -- nonlinear residual -------------------------------------------------------


class _PadWorkspace:
    """Shared spectral-to-padded-physical machinery for one evaluation."""

    def __init__(self, grid):
        self.grid = grid
        self.gp = _dealias_grid(grid)
        self.ik = 2j * np.pi * grid.xi
        self.ik_pad = 2j * np.pi * self.gp.xi
        self.D = grid.cheb.D

    def to_phys(self, coeffs):
        return self.gp.to_samples(_resample(coeffs, self.grid, self.gp))

    def strip_spec(self, phys):
        return _resample(self.gp.to_coefficients(phys), self.gp, self.grid)

    def derivatives_from_spec(self, coeffs):
        """Horizontal and vertical derivative stacks in padded physical
        space for strip coefficients of shape freq + (N_z, m)."""
        g = self.grid
        dx = np.stack(
            [self.to_phys(self.ik[..., j][..., None, None] * coeffs)
             for j in range(g.d)],
            axis=-1,
        )
        dz = self.to_phys(np.einsum("ij,...jc->...ic", self.D, coeffs))
        return dx, dz

    def derivatives_from_phys(self, phys):
        """Same, for padded physical values (projects back to the solution
        band first, which is the dealiasing step)."""
        return self.derivatives_from_spec(self.strip_spec(phys))


def _grad_a(dx, dz, flat):
    """(grad_A g)_i from plain derivatives: dx (..., N_z, m, d), dz (..., N_z, m)."""
    d = flat.grid.d
    comps = [dx[..., j] + flat.a[..., j][..., None] * dz for j in range(d)]
    comps.append(flat.K[..., None] * dz)
    return np.stack(comps, axis=-1)  # (..., N_z, m, n)


def eval_xi_residual(params, forcing, state, mode="generic"):
    """Nonlinear residual of the traveling-wave system at a state.

    Returns a data tuple whose slots mirror the linearized operator: interior
    momentum, scaled divergence, kinematic trace, traction balance, and (for
    ``mode='generic'``) the slip row; ``l-zero`` and ``noslip`` omit the slip
    slot.  The state derivative at rest equals the linear forward operator.
    """
    grid = state.grid
    d = grid.d
    n = grid.n
    if mode not in ("generic", "l-zero", "noslip"):
        raise ValueError(f"unknown residual mode {mode!r}")
    if mode == "l-zero" and not params.slip_law.is_linear:
        raise ValueError(
            "homogeneous slip data requires a linear slip law; the nonlinear "
            "law must go through the generic problem"
        )
    ws = _PadWorkspace(grid)
    gp = ws.gp
    flat = build_flattening(state.eta, gp)

    u_phys = ws.to_phys(state.u.coeffs)  # (M.., N_z, n)
    p_phys = ws.to_phys(state.p.coeffs)[..., 0]
    du_x, du_z = ws.derivatives_from_spec(state.u.coeffs)
    dp_x, dp_z = ws.derivatives_from_spec(state.p.coeffs)

    # t[..., i, j] = (grad_A)_j u_i
    t = _grad_a(du_x, du_z, flat)
    div_a = np.trace(t, axis1=-2, axis2=-1)
    grad_p = _grad_a(dp_x, dp_z, flat)[..., 0, :]

    dt_x, dt_z = ws.derivatives_from_phys(t.reshape(t.shape[:-2] + (n * n,)))
    dt_x = dt_x.reshape(t.shape + (d,))
    dt_z = dt_z.reshape(t.shape)
    # (lap_A u)_i = sum_j (grad_A)_j t[i, j]
    lap = np.zeros_like(u_phys)
    for j in range(d):
        lap += dt_x[..., :, j, j] + flat.a[..., j][..., None] * dt_z[..., :, j]
    lap += flat.K[..., None] * dt_z[..., :, n - 1]

    ddiv_x, ddiv_z = ws.derivatives_from_phys(div_a[..., None])
    grad_div = _grad_a(ddiv_x, ddiv_z, flat)[..., 0, :]

    advect = np.einsum("...j,...ij->...i", u_phys, t)
    advect -= params.gamma * t[..., 0]

    momentum = grad_p - lap - grad_div + advect
    momentum[..., :d] += flat.grad_eta_phys[..., None, :]

    z = gp.z_nodes
    if not forcing.bulk.is_zero:
        zd = z + flat.eta_phys[..., None] * flat.phi
        momentum -= forcing.bulk.eval(gp.x_points, zd, gp.L)
    if not forcing.bulk_flat.is_zero:
        momentum -= forcing.bulk_flat.eval_surface(gp.x_points, gp.L)[..., None, :]

    scaled_div = flat.J * div_a

    # surface rows at the top node
    normal = np.concatenate(
        [-flat.grad_eta_phys, np.ones(flat.grad_eta_phys.shape[:-1] + (1,))],
        axis=-1,
    )
    u_top = u_phys[..., -1, :]
    kinematic = (u_top * normal).sum(axis=-1) \
        + params.gamma * flat.grad_eta_phys[..., 0]

    DAu = t + np.swapaxes(t, -1, -2)
    S_top = -DAu[..., -1, :, :].copy()
    idx = np.arange(n)
    S_top[..., idx, idx] += p_phys[..., -1][..., None]
    curvature = mean_curvature(state.eta, grid)
    curv_pad = ws.to_phys(curvature.coeffs)
    traction_matrix = S_top + params.sigma * curv_pad[..., None, None] * np.eye(n)
    if not forcing.stress.is_zero:
        traction_matrix -= forcing.stress.eval(
            gp.x_points, gp.b + flat.eta_phys, gp.L)
    if not forcing.stress_flat.is_zero:
        traction_matrix -= forcing.stress_flat.eval_surface(gp.x_points, gp.L)
    traction = np.einsum("...ij,...j->...i", traction_matrix, normal)

    slip = None
    if mode == "generic":
        # A = I near the bottom, so the stress there is the flat one
        s_bottom = -(du_z[..., 0, :d] + du_x[..., 0, n - 1, :])
        slip = params.alpha * s_bottom \
            + params.slip_law.evaluate(u_phys[..., 0, :], params.beta)[..., :d]

    def to_strip(phys):
        if phys.ndim == gp.d + 1:
            phys = phys[..., None]
        return StripSpectrum(grid, ws.strip_spec(phys))

    def to_surface(phys):
        c = _resample(gp.to_coefficients(phys), gp, grid)
        return SurfaceSpectrum(grid, c)

    return DataTuple(
        f=to_strip(momentum),
        g=to_strip(scaled_div),
        h=to_surface(kinematic),
        k=to_surface(traction),
        l=None if slip is None else to_surface(slip),
    )


def directional_derivative(params, forcing, state, direction, mode="generic",
                           step=1e-5):
    """Central-difference action of the residual's state derivative."""
    scale = max(
        np.abs(direction.u.coeffs).max(),
        np.abs(direction.p.coeffs).max(),
        np.abs(direction.eta.coeffs).max(),
        1e-30,
    )
    eps = step / scale
    plus = eval_xi_residual(params, forcing, state + eps * direction, mode=mode)
    minus = eval_xi_residual(params, forcing, state + (-eps) * direction, mode=mode)
    return (plus - minus) * (0.5 / eps)


def slip_check(law, n, beta=None, samples=256, radius=None, seed=0):
    """Randomized monotonicity and coercivity audit of a slip law.

    Checks A(w) . w > 0 away from zero, the quadratic lower bound on the
    stated ball, and extracts the linearization at zero by central
    differences, testing its coercivity.  Returns a report dict; the first
    violating sample is included as a witness.
    """
    from .params import beta_is_coercive

    rng = np.random.default_rng(seed)
    radius = radius if radius is not None else law.delta
    beta_mat = beta if beta is not None else np.eye(n)
    report = {"monotone": True, "coercive": True, "witness": None}
    for _ in range(samples):
        w = rng.standard_normal(n)
        w *= rng.uniform(1e-3, radius) / np.linalg.norm(w)
        val = law.evaluate(w, beta_mat)
        dot = float(val @ w)
        if dot <= 0.0:
            report["monotone"] = False
            report["witness"] = w
            break
        if dot < law.theta * (1.0 - 1e-9) * float(w @ w) \
                and np.linalg.norm(w) <= law.delta:
            report["coercive"] = False
            report["witness"] = w
            break
    h = 1e-6
    D = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        D[:, j] = (law.evaluate(e, beta_mat) - law.evaluate(-e, beta_mat)) / (2 * h)
    report["linearization"] = D
    report["linearization_coercive"] = beta_is_coercive(D)
    report["passed"] = (report["monotone"] and report["coercive"]
                        and report["linearization_coercive"])
    return report
