import numpy as np
import pytest

from vortexlattice import abrikosov, bifurcation as bif, glcore, landau
from vortexlattice.landau import field_from_coeffs, inner_avg, norm_avg
from vortexlattice.lattice import normalize_tau

KAPPA = np.sqrt(2.0)


@pytest.fixture(scope="module")
def setup_sq(shape_square):
    return bif.build_reduction(shape_square, N=64, K_lev=40)


@pytest.fixture(scope="module")
def setup_tri(shape_tri):
    return bif.build_reduction(shape_tri, N=64, K_lev=40)


@pytest.fixture(scope="module")
def branch_sq(shape_square, setup_sq):
    return bif.solve_branch([0.02, 0.04, 0.06, 0.08, 0.10], KAPPA, shape_square,
                            setup=setup_sq)


# ----------------------------------------------------------------------
# reduction setup
# ----------------------------------------------------------------------
def test_projection_on_null_vector(setup_sq):
    c = setup_sq.psi0.coeffs
    assert setup_sq.project_P(c) == pytest.approx(1.0)
    q = setup_sq.project_Q(c)
    assert np.max(np.abs(q)) == 0.0


def test_projection_kills_higher_levels(setup_sq):
    d = np.zeros((41, 1), complex)
    d[1, 0] = 1.0
    assert setup_sq.project_P(d) == 0.0
    assert np.array_equal(setup_sq.project_Q(d), d)


def test_resolvent_inverse_property(setup_sq, rng):
    basis = setup_sq.basis
    d = np.zeros((41, 1), complex)
    d[1:9, 0] = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    lam = 1.0
    Ld = basis.landau_coeffs(d) - lam * d
    back = basis.resolvent_coeffs(Ld, lam)
    assert np.max(np.abs(back - d)) < 1e-12


def test_resolvent_rejects_spectrum_collision(setup_sq):
    d = np.zeros((41, 1), complex)
    with pytest.raises(ValueError):
        setup_sq.basis.resolvent_coeffs(d, 3.0)


def test_reduction_n2_unimplemented(shape_square):
    with pytest.raises(NotImplementedError):
        bif.build_reduction(shape_square, N=64, n=2)


# ----------------------------------------------------------------------
# w solve
# ----------------------------------------------------------------------
def test_w_vanishes_at_zero(setup_sq):
    res = bif.solve_w(1.0, 0.0, setup_sq, KAPPA)
    assert np.max(np.abs(res.w)) == 0.0


def test_w_equivariance(setup_sq):
    delta = 0.9
    r1 = bif.solve_w(1.01, 0.05, setup_sq, KAPPA)
    r2 = bif.solve_w(1.01, 0.05 * np.exp(1j * delta), setup_sq, KAPPA)
    assert np.max(np.abs(r2.w - np.exp(1j * delta) * r1.w)) < 1e-10


def test_w_quadratic_smallness(setup_sq):
    ss = np.array([0.01, 0.02, 0.04, 0.07, 0.1])
    norms = []
    for s in ss:
        res = bif.solve_w(1.0, s, setup_sq, KAPPA)
        norms.append(np.linalg.norm(res.w))
    slope = np.polyfit(np.log(ss), np.log(norms), 1)[0]
    assert slope >= 2.0 - 0.1


def test_w_residual_below_tolerance(setup_sq):
    res = bif.solve_w(1.02, 0.08, setup_sq, KAPPA)
    assert res.residual < 1e-10


# ----------------------------------------------------------------------
# gamma1
# ----------------------------------------------------------------------
def test_gamma1_at_origin(setup_sq):
    g, _ = bif.gamma1(1.0, 0.0, setup_sq, KAPPA)
    assert g == 0.0


def test_gamma1_lambda_derivative(setup_sq):
    h, s = 1e-5, 1e-3
    gp, _ = bif.gamma1(1 + h, s, setup_sq, KAPPA)
    gm, _ = bif.gamma1(1 - h, s, setup_sq, KAPPA)
    # cell-averaged norm convention: derivative is -<|psi0|^2> = -1
    assert (np.real(gp) - np.real(gm)) / (2 * h) == pytest.approx(-1.0, abs=1e-6)


def test_gamma1_real(setup_sq, rng):
    for _ in range(4):
        lam = 1 + rng.uniform(-0.02, 0.02)
        s = rng.uniform(0.01, 0.1)
        g, _ = bif.gamma1(lam, s, setup_sq, KAPPA)
        assert abs(complex(g).imag) < 1e-10


def test_gamma1_even_in_s(setup_sq):
    # gamma0 is odd by gauge equivariance, so gamma1 = gamma0/s is even
    gp, _ = bif.gamma1(1.01, 0.06, setup_sq, KAPPA)
    gm, _ = bif.gamma1(1.01, -0.06, setup_sq, KAPPA)
    assert abs(complex(gp) - complex(gm)) < 1e-11


# ----------------------------------------------------------------------
# branch continuation
# ----------------------------------------------------------------------
def test_branch_starts_at_normal_state(shape_square, setup_sq):
    br = bif.solve_branch([0.0], KAPPA, shape_square, setup=setup_sq)
    p = br.points[0]
    assert p.lam == 1.0 and p.s == 0.0
    assert p.energy == pytest.approx(KAPPA**2 / 2 + KAPPA**4, rel=1e-12)


def test_branch_side_follows_sign_condition(shape_tri, setup_tri):
    br = bif.solve_branch([0.05], KAPPA, shape_tri, setup=setup_tri)
    p = br.points[0]
    assert p.lam > 1.0
    assert p.b < KAPPA**2


def test_branch_residual_invariants(branch_sq):
    for p in branch_sq.points:
        assert p.residual_psi < 1e-8
        assert p.residual_alpha < 1e-10
        assert abs(p.flux - 2 * np.pi) < 1e-12


def test_branch_lambda_monotone(branch_sq):
    assert np.all(np.diff(branch_sq.lam) > 0)


def test_branch_labels_extrapolated_regime(shape_square, setup_sq):
    br = bif.solve_branch([0.32], KAPPA, shape_square, setup=setup_sq)
    assert br.extrapolated
    br2 = bif.solve_branch([0.05], KAPPA, shape_square, setup=setup_sq)
    assert not br2.extrapolated


def test_gauge_rotated_branch(setup_sq):
    delta = 1.3
    r1 = bif.solve_w(1.01, 0.05, setup_sq, KAPPA)
    r2 = bif.solve_w(1.01, 0.05 * np.exp(1j * delta), setup_sq, KAPPA)
    psi1 = setup_sq.basis.synth(_full(r1.w, 0.05, setup_sq))
    psi2 = setup_sq.basis.synth(_full(r2.w, 0.05 * np.exp(1j * delta), setup_sq))
    assert np.max(np.abs(np.abs(psi1) - np.abs(psi2))) < 1e-10
    assert np.max(np.abs(psi2 - np.exp(1j * delta) * psi1)) < 1e-10


def _full(w, s, setup):
    c = w.copy()
    c[0, 0] += s
    return c


def test_branch_by_field_normal_limit(shape_square, setup_sq):
    pt = bif.branch_by_field(KAPPA**2, KAPPA, shape_square, setup=setup_sq)
    assert pt.s == 0.0 and pt.lam == 1.0


def test_branch_by_field_first_order(shape_tri, setup_tri):
    beta = setup_tri.beta()
    c = (KAPPA**2 - 0.5) * beta + 0.5
    # first-order prediction; the O(mu) relative correction at mu = 0.05
    # is a few percent
    pt = bif.branch_by_field(1.95, KAPPA, shape_tri, setup=setup_tri)
    s2_pred = 0.05 / (KAPPA**2 * c)
    assert pt.s**2 == pytest.approx(s2_pred, rel=0.05)
    assert abs(pt.b - 1.95) < 1e-12


def test_branch_by_field_refuses_wrong_side(shape_tri, setup_tri):
    with pytest.raises(bif.BranchSideError):
        bif.branch_by_field(2.05, KAPPA, shape_tri, setup=setup_tri)


def test_negative_sign_regime():
    # kappa^2 = 0.1 on an elongated lattice: (kappa^2 - 1/2) beta + 1/2 < 0,
    # so the branch lives at b > kappa^2 and b < kappa^2 is refused
    shape, _ = normalize_tau(8j)
    setup = bif.build_reduction(shape, N=64, K_lev=40)
    assert (0.1 - 0.5) * setup.beta() + 0.5 < 0
    kappa = np.sqrt(0.1)
    pt = bif.branch_by_field(0.102, kappa, shape, setup=setup)
    assert pt.lam < 1.0 and pt.residual_psi < 1e-8
    with pytest.raises(bif.BranchSideError):
        bif.branch_by_field(0.098, kappa, shape, setup=setup)


# ----------------------------------------------------------------------
# effective energy
# ----------------------------------------------------------------------
def test_effective_energy_at_zero(setup_sq):
    e0 = bif.effective_energy(1.02, 0.0, setup_sq, KAPPA)
    assert e0 == pytest.approx(KAPPA**2 / 2 + KAPPA**4 / 1.02**2, rel=1e-12)


def test_effective_energy_gauge_invariant(setup_sq):
    e1 = bif.effective_energy(1.01, 0.05, setup_sq, KAPPA)
    e2 = bif.effective_energy(1.01, 0.05 * np.exp(1.1j), setup_sq, KAPPA)
    assert abs(e1 - e2) < 1e-10


def test_effective_energy_stationary_on_branch(shape_square, setup_sq):
    br = bif.solve_branch([0.06], KAPPA, shape_square, setup=setup_sq)
    p = br.points[0]
    h = 1e-4
    ep = bif.effective_energy(p.lam, p.s + h, setup_sq, KAPPA)
    em = bif.effective_energy(p.lam, p.s - h, setup_sq, KAPPA)
    assert abs(ep - em) / (2 * h) < 1e-6


# ----------------------------------------------------------------------
# expansion fits
# ----------------------------------------------------------------------
def test_fit_expansion_coefficient(branch_sq, shape_square):
    rep = bif.fit_expansion(branch_sq, KAPPA, shape_square)
    assert rep.g_lambda_prime0_target == pytest.approx(2.2705109, abs=1e-6)
    assert rep.g_lambda_prime0_err / rep.g_lambda_prime0_target < 1e-3
    assert rep.curl_a1_sup_err < 1e-4
    assert rep.energy_slope >= 5.7


def test_three_routes_agree(branch_sq, shape_square):
    # (a) lambda_s fit, (b) formula with measured beta, (c) s^2 vs mu slope
    rep = bif.fit_expansion(branch_sq, KAPPA, shape_square)
    c_fit = rep.g_lambda_prime0
    c_formula = (KAPPA**2 - 0.5) * branch_sq.beta + 0.5
    c_slope = 1.0 / (KAPPA**2 * rep.eps_of_b_slope)
    assert c_fit == pytest.approx(c_formula, rel=2e-4)
    assert c_slope == pytest.approx(c_formula, rel=2e-3)
    assert c_fit == pytest.approx(c_slope, rel=2e-3)


def test_K_lev_convergence(shape_square):
    # observables stable under deepening the Landau truncation
    cs = []
    for K_lev in (32, 40):
        br = bif.solve_branch([0.03, 0.05], KAPPA, shape_square, N=64, K_lev=K_lev)
        cs.append(br.lam)
    assert np.max(np.abs(cs[0] - cs[1])) < 1e-8


def test_expansion_report_serializable(branch_sq, shape_square):
    import json
    rep = bif.fit_expansion(branch_sq, KAPPA, shape_square)
    text = json.dumps(rep.to_dict())
    assert "cell-averaged" in text
