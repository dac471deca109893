import numpy as np
import pytest
from numpy.polynomial import chebyshev as C
from scipy.integrate import romb

from slipwave import (
    DataTuple,
    Grid,
    PhysicalParams,
    SolutionState,
    StripSpectrum,
    SurfaceSpectrum,
    frequency_filter,
)
from slipwave.bvp import solve_adjoint
from slipwave.norms import norm_hs, norm_y, norm_z, norm_x_state, seminorm_hdot_minus1
from slipwave.randoms import (
    generator,
    random_data_tuple,
    random_strong_state,
    random_velocity,
)
from slipwave.surface import (
    apply_forward,
    compute_lambda,
    construct_eta,
    divergence_trace_check,
    solve_linear_full,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(L=10.0, d=1, N_x=32, N_z=24, b=1.0)


@pytest.fixture(scope="module")
def params():
    return PhysicalParams(b=1.0, sigma=0.1, gamma=1.0, alpha=0.1,
                          beta=np.array([[2.0, 0.3], [0.1, 1.0]]))


def strong_data(grid, params, seed):
    """Data tuple produced by the forward operator on a random strong pair."""
    u, p = random_strong_state(grid, generator(seed))
    state = SolutionState(u=u, p=p, eta=SurfaceSpectrum.zeros(grid))
    return apply_forward(state, params, mode="generic"), (u, p)


def test_lambda_zero_data(grid, params):
    lam = compute_lambda(DataTuple.zeros(grid), params)
    assert np.abs(lam.coeffs).max() == 0.0


def test_lambda_vanishes_on_forward_images(grid, params):
    for seed in range(5):
        data, (u, p) = strong_data(grid, params, seed)
        lam = compute_lambda(data, params)
        scale = norm_hs(u, 2.0) + norm_hs(p, 1.0)
        assert np.abs(lam.coeffs).max() < 1e-8 * scale


def test_lambda_matches_dense_quadrature_oracle(grid, params):
    # single-frequency data, pairing evaluated by physical-space quadrature
    g = grid
    j = 3
    xi0 = j / g.L
    idx, idx_m = g.index_of([j]), g.index_of([-j])
    rng = generator(31)
    zp = g.z_nodes

    data = DataTuple.zeros(g)
    t_prof = 2.0 * zp / g.b - 1.0

    def smooth_profile(ncomp=None):
        shape = (7,) if ncomp is None else (7, ncomp)
        coef = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        return C.chebval(t_prof, coef).T if ncomp else C.chebval(t_prof, coef)

    fprof = smooth_profile(2)
    gprof = smooth_profile()
    kval = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    lval = rng.standard_normal(1) + 1j * rng.standard_normal(1)
    hval = complex(*rng.standard_normal(2))
    data.f.coeffs[idx] = fprof
    data.f.coeffs[idx_m] = np.conj(fprof)
    data.g.coeffs[idx] = gprof[:, None]
    data.g.coeffs[idx_m] = np.conj(gprof)[:, None]
    data.k.coeffs[idx] = kval
    data.k.coeffs[idx_m] = np.conj(kval)
    data.l.coeffs[idx] = lval
    data.l.coeffs[idx_m] = np.conj(lval)
    data.h.coeffs[idx] = hval
    data.h.coeffs[idx_m] = np.conj(hval)

    psi_hat = 0.8 - 0.15j
    adj = solve_adjoint(xi0, psi_hat, params, g.cheb)

    # physical fields on an N_x x (M+1) grid, vertical Romberg quadrature
    M = 1 << 9
    zf = np.linspace(0.0, g.b, M + 1)
    tf = 2.0 * zf / g.b - 1.0
    t_nodes = 2.0 * zp / g.b - 1.0
    phase = np.exp(2j * np.pi * xi0 * g.x_nodes)

    def physical(profile):
        coef = C.chebfit(t_nodes, profile, g.N_z - 1)
        fine = C.chebval(tf, coef)
        return 2.0 * np.real(np.outer(phase, fine))

    def surface_value(c):
        return 2.0 * np.real(phase * c)

    fv = sum(physical(fprof[:, comp]) * physical(adj.w[:, comp])
             for comp in range(2))
    gq = physical(gprof) * physical(adj.q)
    bulk = romb((fv - gq).mean(axis=0), dx=g.b / M)
    v_top = np.array([C.chebval(1.0, C.chebfit(t_nodes, adj.w[:, c], g.N_z - 1))
                      for c in range(2)])
    k_term = (surface_value(kval[0]) * surface_value(v_top[0])
              + surface_value(kval[1]) * surface_value(v_top[1])).mean()
    psi_phys = surface_value(psi_hat)
    h_term = (surface_value(hval) * psi_phys).mean()
    l_term = (surface_value(lval[0]) * surface_value(adj.w[0, 0])).mean()
    bilinear = bulk - (k_term - h_term) + l_term / params.alpha

    lam = compute_lambda(data, params)
    paired = 2.0 * np.real(lam.coeffs[idx] * np.conj(psi_hat))
    assert paired == pytest.approx(bilinear, rel=1e-9, abs=1e-12)


def test_lambda_commutes_with_filtering(grid, params):
    data = random_data_tuple(grid, generator(5))
    indicator = lambda xi: xi[..., 0] > 0.25
    lam_then = frequency_filter(compute_lambda(data, params), indicator)
    filtered = DataTuple(
        f=frequency_filter(data.f, indicator),
        g=frequency_filter(data.g, indicator),
        h=frequency_filter(data.h, indicator),
        k=frequency_filter(data.k, indicator),
        l=frequency_filter(data.l, indicator),
    )
    then_lam = compute_lambda(filtered, params)
    assert np.array_equal(lam_then.coeffs, then_lam.coeffs)


def test_construct_eta_zero_and_reality(grid, params):
    eta0 = construct_eta(DataTuple.zeros(grid), params)
    assert np.abs(eta0.coeffs).max() == 0.0
    eta = construct_eta(random_data_tuple(grid, generator(12)), params)
    assert np.abs(eta.to_samples(real=False).imag).max() < 1e-13
    assert eta.coeffs[(0,)] == 0.0


def test_construct_eta_modified_data_in_left_kernel(grid, params):
    data = random_data_tuple(grid, generator(9))
    eta = construct_eta(data, params)
    ik = 2j * np.pi * grid.xi
    mod = data.copy()
    mod.f.coeffs[..., 0] -= (ik[..., 0] * eta.coeffs)[..., None]
    mod.h.coeffs[...] -= params.gamma * ik[..., 0] * eta.coeffs
    mod.k.coeffs[..., 1] -= params.sigma * (
        -4.0 * np.pi**2 * grid.xi_abs**2 * eta.coeffs
    )
    lam = compute_lambda(mod, params)
    assert np.abs(lam.coeffs).max() < 1e-8 * norm_y(data, 2.0, warn_mean=False)


def test_construct_eta_rejects_sigma_zero_in_two_dimensions():
    g2 = Grid(L=8.0, d=2, N_x=12, N_z=16, b=1.0)
    p0 = PhysicalParams(b=1.0, sigma=0.0, gamma=1.0, alpha=0.1, beta=np.eye(3))
    with pytest.raises(ValueError):
        construct_eta(random_data_tuple(g2, generator(1)), p0)


def test_solve_linear_zero_data(grid, params):
    state = solve_linear_full(DataTuple.zeros(grid), params, mode="generic")
    assert np.abs(state.u.coeffs).max() == 0.0
    assert np.abs(state.p.coeffs).max() == 0.0
    assert np.abs(state.eta.coeffs).max() == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_roundtrip_generic(grid, params, seed):
    data = random_data_tuple(grid, generator(seed, 2))
    state = solve_linear_full(data, params, mode="generic")
    back = apply_forward(state, params, mode="generic")
    rel = norm_y(back - data, 2.0, warn_mean=False) / norm_y(data, 2.0, warn_mean=False)
    assert rel < 1e-8


def test_roundtrip_sigma_zero(grid):
    p0 = PhysicalParams(b=1.0, sigma=0.0, gamma=1.0, alpha=0.2, beta=np.eye(2))
    data = random_data_tuple(grid, generator(77))
    state = solve_linear_full(data, p0, mode="generic")
    back = apply_forward(state, p0, mode="generic")
    rel = norm_y(back - data, 2.0, warn_mean=False) / norm_y(data, 2.0, warn_mean=False)
    assert rel < 1e-8


def test_roundtrip_noslip(grid, params):
    data = random_data_tuple(grid, generator(3, 5), with_l=False)
    state = solve_linear_full(data, params, mode="noslip")
    assert np.abs(state.u.coeffs[..., 0, :]).max() < 1e-10
    back = apply_forward(state, params, mode="noslip")
    rel = norm_z(back - data, 2.0, warn_mean=False) / norm_z(data, 2.0, warn_mean=False)
    assert rel < 1e-8


def test_roundtrip_two_horizontal_dimensions():
    g2 = Grid(L=8.0, d=2, N_x=12, N_z=20, b=1.0)
    p2 = PhysicalParams(b=1.0, sigma=0.2, gamma=0.8, alpha=0.3, beta=np.eye(3))
    data = random_data_tuple(g2, generator(8))
    state = solve_linear_full(data, p2, mode="generic")
    back = apply_forward(state, p2, mode="generic")
    rel = norm_y(back - data, 2.0, warn_mean=False) / norm_y(data, 2.0, warn_mean=False)
    assert rel < 1e-8


def test_l_zero_solution_ratios_uniform_in_alpha(grid, params):
    data = random_data_tuple(grid, generator(4, 1), with_l=False)
    dn = norm_z(data, 2.0, warn_mean=False)
    ratios = []
    for alpha in (1e-2, 1e-4, 1e-6):
        state = solve_linear_full(data, params.with_alpha(alpha), mode="l-zero")
        ratios.append(norm_x_state(state, 2.0) / dn)
    assert max(ratios) / min(ratios) < 2.0


def test_l_zero_rejects_inhomogeneous_l(grid, params):
    data = random_data_tuple(grid, generator(4, 2), with_l=True)
    with pytest.raises(ValueError):
        solve_linear_full(data, params, mode="l-zero")


def test_solve_commutes_with_filtering_bitwise(grid, params):
    data = random_data_tuple(grid, generator(14))
    indicator = lambda xi: np.abs(xi[..., 0]) < 0.9
    state = solve_linear_full(data, params, mode="generic")
    filtered_state = SolutionState(
        u=frequency_filter(state.u, indicator),
        p=frequency_filter(state.p, indicator),
        eta=frequency_filter(state.eta, indicator),
    )
    filtered_data = DataTuple(
        f=frequency_filter(data.f, indicator),
        g=frequency_filter(data.g, indicator),
        h=frequency_filter(data.h, indicator),
        k=frequency_filter(data.k, indicator),
        l=frequency_filter(data.l, indicator),
    )
    state2 = solve_linear_full(filtered_data, params, mode="generic")
    assert np.array_equal(state2.u.coeffs, filtered_state.u.coeffs)
    assert np.array_equal(state2.p.coeffs, filtered_state.p.coeffs)
    assert np.array_equal(state2.eta.coeffs, filtered_state.eta.coeffs)


def test_divergence_trace_zero_for_solenoidal_fields(grid):
    # u = (dz psi, -dx psi) with psi built to vanish at both plates
    g = grid
    rng = generator(17)
    psi_x = rng.standard_normal(g.freq_shape)
    psi_hat = g.to_coefficients(psi_x)
    psi_hat[0] = 0.0
    z = g.z_nodes
    prof = (z * (g.b - z)) ** 2
    dprof = g.cheb.D @ prof
    ik = 2j * np.pi * g.xi[..., 0]
    u = StripSpectrum.zeros(g, 2)
    u.coeffs[..., 0] = psi_hat[..., None] * dprof
    u.coeffs[..., 1] = -(ik * psi_hat)[..., None] * prof
    value, ratio = divergence_trace_check(u)
    assert value < 1e-12
    assert ratio < 1e-10


def test_divergence_trace_bound_on_random_fields(grid):
    worst = 0.0
    for seed in range(100):
        u = random_velocity(grid, generator(seed, 7))
        value, ratio = divergence_trace_check(u)
        worst = max(worst, ratio)
    assert worst <= 1.0 + 1e-6


def test_divergence_trace_single_mode_hand_value(grid):
    g = grid
    j = 2
    xi0 = j / g.L
    z = g.z_nodes
    a = z**2 + 1.0  # horizontal profile
    c = z**2 * (1.5 - z)  # vertical profile, c(0) = 0
    u = StripSpectrum.zeros(g, 2)
    u.coeffs[g.index_of([j])] = np.stack([a, c], axis=-1)
    u.coeffs[g.index_of([-j])] = np.stack([a, c], axis=-1)
    # per mode the defect is -2 pi i xi0 int a dz and the seminorm weight is
    # 1/xi0, so the mode pair contributes sqrt(2) * 2 pi |int a|
    int_a = g.cheb.weights @ a
    want = np.sqrt(2.0) * 2.0 * np.pi * abs(int_a)
    value, ratio = divergence_trace_check(u)
    assert value == pytest.approx(want, rel=1e-12)
    assert ratio <= 1.0 + 1e-6


def test_divergence_trace_rejects_penetrating_field(grid):
    u = StripSpectrum.zeros(grid, 2)
    u.coeffs[(0,) * grid.d + (slice(None), 1)] = 1.0
    with pytest.raises(ValueError):
        divergence_trace_check(u)
