import numpy as np
import pytest

from slipwave import (
    DataTuple,
    Grid,
    PhysicalParams,
    SlipLaw,
    SolutionState,
    StripSpectrum,
    SurfaceSpectrum,
)
from slipwave.geometry import (
    AmbientField,
    ForcingSpec,
    HorizontalProfile,
    NotADiffeomorphism,
    VerticalProfile,
    build_flattening,
    cutoff_profile,
    directional_derivative,
    eval_xi_residual,
    mean_curvature,
    pullback,
    slip_check,
)
from slipwave.norms import norm_y, seminorm_hdot_minus1, vertical_integral
from slipwave.randoms import (
    generator,
    random_data_tuple,
    random_strong_state,
    random_surface,
)
from slipwave.surface import apply_forward, solve_linear_full


@pytest.fixture(scope="module")
def grid():
    return Grid(L=10.0, d=1, N_x=32, N_z=24, b=1.0)


@pytest.fixture(scope="module")
def params():
    return PhysicalParams(b=1.0, sigma=0.1, gamma=1.0, alpha=0.1,
                          beta=np.array([[2.0, 0.3], [0.1, 1.0]]))


ZERO_FORCING = ForcingSpec()


def single_mode_eta(grid, j=1, amplitude=0.05):
    eta = SurfaceSpectrum.zeros(grid)
    eta.coeffs[grid.index_of([j])] = amplitude / 2.0
    eta.coeffs[grid.index_of([-j])] = amplitude / 2.0
    return eta


def test_cutoff_plateaus_and_monotone():
    b = 1.4
    z = np.linspace(0.0, b, 400)
    phi, dphi = cutoff_profile(z, b)
    assert np.all(phi[z <= b / 4] == 0.0)
    assert np.all(phi[z >= 3 * b / 4] == 1.0)
    assert np.all(np.diff(phi) >= 0.0)
    assert np.all(dphi >= 0.0)
    assert dphi[0] == 0.0 and dphi[-1] == 0.0


def test_flattening_identity_for_flat_surface(grid):
    flat = build_flattening(SurfaceSpectrum.zeros(grid))
    assert np.abs(flat.J - 1.0).max() == 0.0
    A = flat.A_matrix()
    assert np.abs(A - np.eye(grid.n)).max() == 0.0


def test_flattening_matrix_inverts_the_jacobian(grid):
    eta = random_surface(grid, generator(4), amplitude=0.15)
    flat = build_flattening(eta)
    A = flat.A_matrix()
    G = flat.gradient_of_flattening()
    prod = np.einsum("...ij,...ik->...jk", A, G)
    assert np.abs(prod - np.eye(grid.n)).max() < 1e-10
    assert np.abs(flat.K * flat.J - 1.0).max() < 1e-12
    # identity below the cutoff foot, where the slip rows live
    low = grid.z_nodes <= grid.b / 4
    assert np.abs(A[:, low] - np.eye(grid.n)).max() == 0.0


def test_jacobian_matches_finite_differences(grid):
    eta = single_mode_eta(grid, j=2, amplitude=0.1)
    flat = build_flattening(eta)
    phi, _ = cutoff_profile(grid.z_nodes, grid.b)
    eta_x = flat.eta_phys

    def F_n(zv, ix):
        p, _ = cutoff_profile(np.array([zv]), grid.b)
        return zv + eta_x[ix] * p[0]

    errs = []
    steps = [1e-3, 5e-4]
    iz = grid.N_z // 2
    z0 = grid.z_nodes[iz]
    for h in steps:
        fd = (F_n(z0 + h, 3) - F_n(z0 - h, 3)) / (2 * h)
        errs.append(abs(fd - flat.J[3, iz]))
    assert errs[0] < 1e-5
    assert errs[1] < errs[0]


def test_flattening_rejects_large_surface(grid):
    eta = single_mode_eta(grid, j=1, amplitude=1.2)
    with pytest.raises(NotADiffeomorphism):
        build_flattening(eta)


def test_pullback_flat_surface_is_plain_sampling(grid):
    field = AmbientField.single(
        np.array([1.0, 0.0]),
        HorizontalProfile(kind="mode", mode=(1,)),
        VerticalProfile(kind="gauss", center=0.4, width=0.3),
    )
    out = pullback(field, SurfaceSpectrum.zeros(grid), grid)
    direct = field.eval(grid.x_points, grid.z_nodes, grid.L)
    assert np.abs(out.to_samples() - direct).max() < 1e-12


def test_pullback_constant_recipe(grid):
    field = AmbientField.single(
        np.array([0.0, 2.5]), HorizontalProfile(kind="mode", mode=(0,)))
    eta = single_mode_eta(grid, amplitude=0.1)
    out = pullback(field, eta, grid)
    samples = out.to_samples()
    assert np.abs(samples[..., 1] - 2.5).max() < 1e-12


def test_pullback_linear_recipe_sees_the_displacement(grid):
    field = AmbientField.single(
        np.array([1.0, 0.0]),
        HorizontalProfile(kind="mode", mode=(0,)),
        VerticalProfile(kind="linear"),
    )
    eta = single_mode_eta(grid, amplitude=0.08)
    out = pullback(field, eta, grid)
    phi, _ = cutoff_profile(grid.z_nodes, grid.b)
    eta_x = eta.to_samples()
    want = grid.z_nodes[None, :] + eta_x[:, None] * phi[None, :]
    assert np.abs(out.to_samples()[..., 0] - want).max() < 1e-12


def test_mean_curvature_zero(grid):
    out = mean_curvature(SurfaceSpectrum.zeros(grid))
    assert np.abs(out.coeffs).max() == 0.0


def test_mean_curvature_small_amplitude_rate(grid):
    # H(eta) + |k|^2 eta -> 0 at third order in the amplitude
    k0 = 2.0 * np.pi / grid.L
    defects = []
    amps = [2e-2, 1e-2, 5e-3]
    for eps in amps:
        eta = single_mode_eta(grid, j=1, amplitude=eps)
        H = mean_curvature(eta)
        lin = SurfaceSpectrum(grid, -(k0**2) * eta.coeffs)
        defects.append(np.abs((H - lin).coeffs).max())
    rate = np.log(defects[0] / defects[2]) / np.log(amps[0] / amps[2])
    assert rate == pytest.approx(3.0, abs=0.15)


def test_mean_curvature_matches_closed_form_in_one_dimension(grid):
    eta = random_surface(grid, generator(6), amplitude=0.05)
    H = mean_curvature(eta)
    # eta'' / (1 + eta'^2)^(3/2), evaluated on a refined grid to avoid aliasing
    fine = Grid(L=grid.L, d=1, N_x=4 * grid.N_x, N_z=grid.N_z, b=grid.b)
    from slipwave.geometry import _resample

    ik = 2j * np.pi * fine.xi[..., 0]
    eta_f = _resample(eta.coeffs, grid, fine)
    d1 = fine.to_samples(ik * eta_f)
    d2 = fine.to_samples(ik**2 * eta_f)
    closed = d2 / (1.0 + d1**2) ** 1.5
    h_fine = fine.to_samples(_resample(H.coeffs, grid, fine))
    # compare on the resolved band only: project closed form to grid band
    closed_band = _resample(fine.to_coefficients(closed), fine, grid)
    assert np.abs(closed_band - H.coeffs).max() < 1e-10


def test_residual_zero_state_zero_forcing(grid, params):
    r = eval_xi_residual(params, ZERO_FORCING, SolutionState.zeros(grid))
    for c in (r.f, r.g, r.h, r.k, r.l):
        assert np.abs(c.coeffs).max() == 0.0


def test_state_derivative_at_rest_is_the_linear_operator(grid, params):
    u, p = random_strong_state(grid, generator(2))
    eta = random_surface(grid, generator(3), amplitude=0.2)
    direction = SolutionState(u=u, p=p, eta=eta)
    fd = directional_derivative(params, ZERO_FORCING, SolutionState.zeros(grid),
                                direction)
    lin = apply_forward(direction, params, mode="generic")
    rel = norm_y(fd - lin, 2.0, warn_mean=False) / norm_y(lin, 2.0, warn_mean=False)
    assert rel < 1e-6


def test_kinematic_component_reduces_to_transport_for_resting_fluid(grid, params):
    eta = random_surface(grid, generator(9), amplitude=0.05)
    state = SolutionState(u=StripSpectrum.zeros(grid, grid.n),
                          p=StripSpectrum.zeros(grid, 1), eta=eta)
    r = eval_xi_residual(params, ZERO_FORCING, state)
    want = params.gamma * 2j * np.pi * grid.xi[..., 0] * eta.coeffs
    assert np.abs(r.h.coeffs - want).max() < 1e-12 * np.abs(want).max()


def test_quadratic_smallness_of_the_remainder(grid, params):
    base = random_data_tuple(grid, generator(11), amplitude=1.0)
    sizes = []
    amps = [1e-2, 5e-3, 2.5e-3]
    for eps in amps:
        data = base * eps
        state = solve_linear_full(data, params, mode="generic")
        resid = eval_xi_residual(params, ZERO_FORCING, state)
        sizes.append(norm_y(resid - data, 2.0, warn_mean=False))
    slope = np.log(sizes[0] / sizes[2]) / np.log(amps[0] / amps[2])
    assert slope == pytest.approx(2.0, abs=0.1)


def test_slip_row_agrees_with_spectral_rows_for_linear_law(grid, params):
    u, p = random_strong_state(grid, generator(13))
    eta = random_surface(grid, generator(14), amplitude=0.05)
    state = SolutionState(u=u, p=p, eta=eta)
    r = eval_xi_residual(params, ZERO_FORCING, state)
    lin = apply_forward(state, params, mode="generic")
    scale = np.abs(lin.l.coeffs).max()
    assert np.abs(r.l.coeffs - lin.l.coeffs).max() < 1e-12 * scale


def test_kinematic_and_divergence_means_compatible(grid, params):
    # the zero mode of (kinematic - integrated scaled divergence) vanishes up
    # to the vertical quadrature error of the C^2 cutoff, which shrinks at
    # third order under refinement
    defects = []
    for nz in (24, 48):
        g = Grid(L=grid.L, d=1, N_x=grid.N_x, N_z=nz, b=grid.b)
        u, p = random_strong_state(g, generator(15))
        eta = random_surface(g, generator(16), amplitude=0.05)
        state = SolutionState(u=u, p=p, eta=eta)
        r = eval_xi_residual(params, ZERO_FORCING, state)
        defect = r.h - vertical_integral(r.g)
        defects.append(abs(defect.coeffs[(0,)])
                       / max(np.abs(r.h.coeffs).max(), 1e-30))
        assert np.isfinite(seminorm_hdot_minus1(defect))
    assert defects[0] < 1e-4
    assert defects[1] < defects[0] / 4.0


def test_residual_rejects_nonlinear_law_with_homogeneous_slip(grid):
    law = SlipLaw(kind="nonlinear", func=lambda w: w + (w @ w) * w,
                  theta=1.0, delta=0.5)
    p = PhysicalParams(b=1.0, sigma=0.1, gamma=1.0, alpha=0.1,
                       beta=np.eye(2), slip_law=law)
    with pytest.raises(ValueError):
        eval_xi_residual(p, ZERO_FORCING, SolutionState.zeros(Grid(
            L=10.0, d=1, N_x=32, N_z=24, b=1.0)), mode="l-zero")


def test_slip_check_identity_law():
    law = SlipLaw(kind="linear")
    report = slip_check(law, n=2, beta=np.eye(2))
    assert report["passed"]
    assert np.abs(report["linearization"] - np.eye(2)).max() < 1e-8


def test_slip_check_cubic_law():
    law = SlipLaw(kind="nonlinear", func=lambda w: w + (w @ w) * w,
                  theta=1.0, delta=0.5)
    report = slip_check(law, n=2)
    assert report["passed"]
    assert np.abs(report["linearization"] - np.eye(2)).max() < 1e-6


def test_slip_check_sign_violation_reports_witness():
    law = SlipLaw(kind="nonlinear", func=lambda w: -w, theta=1.0, delta=0.5)
    report = slip_check(law, n=2)
    assert not report["passed"]
    assert report["witness"] is not None
