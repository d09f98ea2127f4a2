import numpy as np
import pytest

from vortexlattice import bifurcation as bif, gauge, glcore, landau
from vortexlattice.gauge import (FluxQuantizationError, PointGroupError,
                                 RawLatticeState, fix_gauge, gauge_transform,
                                 poisson_periodic, raw_from_state, rotate_state,
                                 translate_state)
from vortexlattice.landau import quasi_periodicity_residual
from vortexlattice.lattice import normalize_tau

KAPPA = np.sqrt(2.0)


@pytest.fixture(scope="module")
def raw_branch(shape_generic):
    setup = bif.build_reduction(shape_generic, N=64, K_lev=32)
    pt = bif.branch_by_field(1.9, KAPPA, shape_generic, setup=setup)
    psi = landau.field_from_coeffs(setup.basis, pt.psi_coeffs)
    state = glcore.GLState(psi, pt.alpha, glcore.GLParams(KAPPA, 1, pt.lam))
    return raw_from_state(state)


@pytest.fixture(scope="module")
def raw_square(shape_square):
    setup = bif.build_reduction(shape_square, N=64, K_lev=32)
    pt = bif.branch_by_field(1.9, KAPPA, shape_square, setup=setup)
    psi = landau.field_from_coeffs(setup.basis, pt.psi_coeffs)
    state = glcore.GLState(psi, pt.alpha, glcore.GLParams(KAPPA, 1, pt.lam))
    return raw_from_state(state)


# ----------------------------------------------------------------------
# gauge transform
# ----------------------------------------------------------------------
def test_gauge_identity(raw_branch):
    out = gauge_transform(raw_branch, np.zeros((64, 64)))
    assert np.array_equal(out.psi, raw_branch.psi)
    assert np.array_equal(out.a_p, raw_branch.a_p)


def test_gauge_constant_phase(raw_branch):
    out = gauge_transform(raw_branch, np.full((64, 64), 0.8))
    assert np.max(np.abs(out.psi - np.exp(0.8j) * raw_branch.psi)) < 1e-14
    assert np.max(np.abs(out.a_p - raw_branch.a_p)) < 1e-12


def test_gauge_observables_invariant(raw_branch, rng):
    grid = raw_branch.grid
    y1, y2 = grid.y
    eta = 0.5 * np.sin(2 * np.pi * (y1 + y2)) - 0.2 * np.cos(2 * np.pi * y2)
    out = gauge_transform(raw_branch, eta, (0.1, -0.2))
    o1 = raw_branch.observables()
    o2 = out.observables()
    assert np.max(np.abs(np.abs(out.psi) - np.abs(raw_branch.psi))) < 1e-12
    assert np.max(np.abs(o1["curl_a"] - o2["curl_a"])) < 1e-8
    assert np.max(np.abs(o1["current"] - o2["current"])) < 1e-9
    assert abs(out.flux() - raw_branch.flux()) < 1e-11


# ----------------------------------------------------------------------
# translations and rotations
# ----------------------------------------------------------------------
def test_translate_by_lattice_vector(raw_branch):
    out = translate_state(raw_branch, raw_branch.m[:, 0])
    assert np.max(np.abs(np.abs(out.psi) - np.abs(raw_branch.psi))) < 1e-10
    assert np.max(np.abs(out.curl_a() - raw_branch.curl_a())) < 1e-9


def test_translate_energy_invariant(raw_branch):
    t = 0.3 * raw_branch.m[:, 0] - 0.41 * raw_branch.m[:, 1]
    out = translate_state(raw_branch, t)
    assert abs(out.energy_density_mean(KAPPA)
               - raw_branch.energy_density_mean(KAPPA)) < 1e-9
    assert abs(out.flux() - raw_branch.flux()) < 1e-10


def test_rotate_pi_any_lattice(raw_branch):
    out = rotate_state(raw_branch, np.pi)
    assert abs(out.energy_density_mean(KAPPA)
               - raw_branch.energy_density_mean(KAPPA)) < 1e-9
    assert quasi_periodicity_residual(out.qp_field()) < 1e-7


def test_rotate_square_point_group(raw_square):
    out = rotate_state(raw_square, np.pi / 2)
    o1 = raw_square.observables()
    o2 = out.observables()
    # |psi|^2 is permuted on the grid; compare rotation-invariant reductions
    assert abs(o2["ns"].mean() - o1["ns"].mean()) < 1e-12
    assert abs(np.sort(o2["ns"].ravel())[::97].sum()
               - np.sort(o1["ns"].ravel())[::97].sum()) < 1e-9
    assert abs(out.energy_density_mean(KAPPA)
               - raw_square.energy_density_mean(KAPPA)) < 1e-10


def test_rotate_triangular_point_group(shape_tri):
    setup = bif.build_reduction(shape_tri, N=48, K_lev=24)
    pt = bif.branch_by_field(1.9, KAPPA, shape_tri, setup=setup)
    psi = landau.field_from_coeffs(setup.basis, pt.psi_coeffs)
    raw = raw_from_state(glcore.GLState(psi, pt.alpha, glcore.GLParams(KAPPA, 1, pt.lam)))
    out = rotate_state(raw, np.pi / 3)
    assert abs(out.energy_density_mean(KAPPA) - raw.energy_density_mean(KAPPA)) < 1e-10


def test_rotate_rejects_non_point_group(raw_branch):
    with pytest.raises(PointGroupError):
        rotate_state(raw_branch, np.pi / 2)  # generic lattice has only +-pi


# ----------------------------------------------------------------------
# periodic Poisson
# ----------------------------------------------------------------------
def test_poisson_zero(raw_branch):
    grid = raw_branch.grid
    assert np.max(np.abs(poisson_periodic(np.zeros((64, 64)), grid))) == 0.0


def test_poisson_single_mode(raw_branch):
    grid = raw_branch.grid
    g1, g2 = grid.wavevectors
    k = (3, 1)
    gsq = g1[k] ** 2 + g2[k] ** 2
    y1, y2 = grid.y
    rhs = np.cos(2 * np.pi * (3 * y1 + y2))
    u = poisson_periodic(rhs, grid)
    assert np.max(np.abs(u + rhs / gsq)) < 1e-13


def test_poisson_random_residual(raw_branch, rng):
    grid = raw_branch.grid
    y1, y2 = grid.y
    rhs = sum(rng.normal() * np.sin(2 * np.pi * (k1 * y1 + k2 * y2) + rng.normal())
              for k1 in range(1, 4) for k2 in range(-2, 3))
    rhs -= rhs.mean()
    u = poisson_periodic(rhs, grid)
    assert np.max(np.abs(grid.laplacian(u) - rhs)) < 1e-10
    assert abs(u.mean()) < 1e-14


def test_poisson_rejects_mean(raw_branch):
    with pytest.raises(ValueError):
        poisson_periodic(np.ones((64, 64)), raw_branch.grid)


# ----------------------------------------------------------------------
# fix_gauge
# ----------------------------------------------------------------------
def test_fix_gauge_on_fixed_input(raw_branch):
    fixed = fix_gauge(raw_branch, kappa=KAPPA)
    again = fix_gauge(raw_from_state(fixed), kappa=KAPPA)
    # idempotent up to a constant phase (pinned at the origin sample)
    assert np.max(np.abs(again.psi.values - fixed.psi.values)) < 1e-12
    assert np.max(np.abs(again.alpha.values - fixed.alpha.values)) < 1e-12


def test_fix_gauge_round_trip(raw_branch, rng):
    grid = raw_branch.grid
    y1, y2 = grid.y
    for _ in range(3):
        eta = sum(rng.normal(0, 0.3) * np.sin(2 * np.pi * ((k1 + 1) * y1 + k2 * y2)
                                              + rng.uniform(0, 2 * np.pi))
                  for k1 in range(2) for k2 in range(-1, 2))
        c = tuple(rng.normal(0, 0.3, 2))
        t = raw_branch.m @ rng.uniform(-0.5, 0.5, 2)
        distorted = translate_state(gauge_transform(raw_branch, eta, c), t)
        fixed, info = fix_gauge(distorted, kappa=KAPPA, return_info=True)
        assert quasi_periodicity_residual(fixed.psi) < 1e-10
        mean_r, div_r = fixed.alpha.constraint_residuals()
        assert mean_r < 1e-10 and div_r < 1e-10
        ref = translate_state(distorted, info["translation"]).observables()
        sig = info["sigma"]
        assert np.max(np.abs(np.abs(fixed.psi.values) ** 2 - sig**2 * ref["ns"])) < 1e-8
        curl_out = 1.0 + fixed.alpha.grid.curl(fixed.alpha.values)
        assert np.max(np.abs(curl_out - sig**2 * ref["curl_a"])) < 1e-8


def test_fix_gauge_removes_pure_gauge(shape_square):
    N = 48
    from vortexlattice.lattice import cell_geometry
    geom = cell_geometry(shape_square, 1, 1.0)
    grid_m = geom.m_phys
    from vortexlattice.spectral import CellGrid
    grid = CellGrid(grid_m, N)
    y1, y2 = grid.y
    chi = 0.6 * np.sin(2 * np.pi * (2 * y1 - y2))
    raw = RawLatticeState(psi=np.zeros((N, N), complex), a_p=grid.grad(chi),
                          n=1, shape=shape_square, r=geom.r)
    fixed = fix_gauge(raw)
    assert np.max(np.abs(fixed.alpha.values)) < 1e-12


def test_fix_gauge_canonical_boundary_cocycle(raw_branch):
    # output boundary phase is exactly the canonical cocycle: residual of the
    # zero-constant wrap phases vanishes
    fixed = fix_gauge(raw_branch, kappa=KAPPA)
    assert fixed.psi.bc_const == (0.0, 0.0)
    assert quasi_periodicity_residual(fixed.psi) < 1e-10


def test_fix_gauge_curl_free_difference(raw_branch, rng):
    # path independence of the gauge potential: the difference between the
    # fixed and raw potentials is curl-free to spectral accuracy
    grid = raw_branch.grid
    y1, y2 = grid.y
    eta = 0.4 * np.sin(2 * np.pi * y1) + 0.3 * np.cos(2 * np.pi * (y1 - y2))
    distorted = gauge_transform(raw_branch, eta, (0.05, -0.1))
    fixed, info = fix_gauge(distorted, kappa=KAPPA, return_info=True)
    sigma = info["sigma"]
    shifted = translate_state(distorted, info["translation"])
    alpha_phys = fixed.alpha.values / sigma
    D = alpha_phys - shifted.a_p
    assert np.max(np.abs(grid.curl(D))) < 1e-8


def test_fix_gauge_zero_multiple_vortices(shape_square):
    # n = 2 state: flux 4 pi, quantization check passes, constraints hold
    basis = landau.get_basis(2, shape_square, 48, K_lev=4)
    psi0 = landau.theta_null_basis(2, shape_square, 48)[0]
    from vortexlattice.lattice import cell_geometry
    geom = cell_geometry(shape_square, 2, 2.0)
    raw = RawLatticeState(psi=0.1 * psi0.values, a_p=np.zeros((2, 48, 48)),
                          n=2, shape=shape_square, r=geom.r)
    assert abs(raw.flux() - 4 * np.pi) < 1e-10
    fixed = fix_gauge(raw)
    assert quasi_periodicity_residual(fixed.psi) < 1e-8
