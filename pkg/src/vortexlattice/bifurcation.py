"""Lyapunov-Schmidt reduction and branch continuation for n = 1.

The reduction splits psi = s psi0 + w along the rank-one spectral projection
P psi = <psi0, psi> psi0 (cell-averaged inner product, <|psi0|^2> = 1, so
P is literally the zeroth Landau coefficient).  w solves the Q-projected
equation by a resolvent-preconditioned fixed point, the scalar bifurcation
function gamma1(lambda, s) = <psi0, F(lambda, s psi0 + w)> / s is brought to
zero in lambda by a bracketed root solve, and branches are continued in s
with warm starts.

Inner products and norms here are cell-averaged (plain L2 over the cell
divided by its area); with that convention d(gamma1)/d(lambda) at (1, 0)
equals -<|psi0|^2> = -1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .glcore import (GLParams, GLState, PeriodicVectorField, _alpha_fixed_point,
                     energy, nonlinear_coeffs, supercurrent_grids)
from .landau import (LandauBasis, QuasiPeriodicField, field_from_coeffs,
                     get_basis)
from .lattice import LatticeShape

S_MAX_DEFAULT = 0.3


class BranchSideError(ValueError):
    """Requested field on the side of kappa^2 excluded by the sign condition."""


@dataclass
class ReductionSetup:
    """Null vector, rank-one projection data and resolvent for n = 1."""

    basis: LandauBasis
    psi0: QuasiPeriodicField

    @property
    def shape(self) -> LatticeShape:
        return self.basis.shape

    def project_P(self, coeffs: np.ndarray) -> complex:
        return complex(coeffs[0, 0])

    def project_Q(self, coeffs: np.ndarray) -> np.ndarray:
        out = coeffs.copy()
        out[0, 0] = 0.0
        return out

    def beta(self) -> float:
        a2 = np.abs(self.psi0.values) ** 2
        return float(np.mean(a2**2) / np.mean(a2) ** 2)


def build_reduction(shape: LatticeShape, N: int, K_lev: int = 40,
                    n: int = 1) -> ReductionSetup:
    if n != 1:
        raise NotImplementedError("the scalar bifurcation equation is n = 1 only")
    basis = get_basis(1, shape, N, K_lev)
    c = np.zeros((K_lev + 1, 1), dtype=complex)
    c[0, 0] = 1.0
    return ReductionSetup(basis=basis, psi0=field_from_coeffs(basis, c))


@dataclass
class WSolveResult:
    w: np.ndarray                 # (K_lev+1, 1) coefficients, zeroth entry 0
    alpha2: np.ndarray            # induced potential on the doubled grid
    ncoef: np.ndarray             # nonlinear term coefficients at the solution
    iterations: int
    residual: float               # |Q F(lambda, s psi0 + w)| (averaged norm)
    contraction: float


def solve_w(lam: float, s: complex, setup: ReductionSetup, kappa: float,
            tol: float = 1e-12, max_iter: int = 200,
            warm: WSolveResult | None = None) -> WSolveResult:
    """Solve the Q-projected equation for w = w(lambda, s psi0).

    Resolvent-preconditioned fixed point with adaptive damping; switches to a
    Krylov-Newton solve if the contraction factor degrades beyond 0.9.
    """
    basis = setup.basis
    grid2 = basis.grid_d
    w = np.zeros((basis.K_lev + 1, 1), dtype=complex) if warm is None else warm.w.copy()
    alpha2 = None if warm is None else warm.alpha2.copy()
    if s == 0:
        z = np.zeros_like(w)
        a0 = np.zeros((2, grid2.N, grid2.N))
        return WSolveResult(z, a0, z, 0, 0.0, 0.0)

    def sweep(wc, a_start):
        psi_c = wc.copy()
        psi_c[0, 0] += s
        vals = basis.synth(psi_c, dealias=True)
        d1 = basis.synth(basis.d1_coeffs(psi_c), dealias=True)
        d2 = basis.synth(basis.d2_coeffs(psi_c), dealias=True)
        j0 = supercurrent_grids(vals, d1, d2)
        a2 = _alpha_fixed_point(grid2, j0, np.abs(vals) ** 2, a_start, tol=1e-14)
        nl = (2j * (a2[0] * d1 + a2[1] * d2)
              + (a2[0] ** 2 + a2[1] ** 2) * vals
              + kappa**2 * np.abs(vals) ** 2 * vals)
        ncoef = basis.project(nl, dealias=True)
        w_new = -basis.resolvent_coeffs(setup.project_Q(ncoef), lam)
        return w_new, a2, ncoef

    damping = 1.0
    last_delta = np.inf
    contraction = 0.0
    scale = max(abs(s), 1e-6)
    for it in range(1, max_iter + 1):
        w_new, alpha2, ncoef = sweep(w, alpha2)
        step = w_new - w
        delta = float(np.max(np.abs(step)))
        if delta > 0 and np.isfinite(last_delta) and last_delta > 0:
            contraction = delta / last_delta
        if contraction > 1.2:
            damping = max(0.25, damping * 0.5)
        w = w + damping * step
        last_delta = delta
        if delta < tol * scale:
            # converged; measure the Q-residual at the final iterate
            _, alpha2, ncoef = sweep(w, alpha2)
            res = basis.landau_coeffs(w) - lam * w + setup.project_Q(ncoef)
            res[0, 0] = 0.0
            return WSolveResult(w, alpha2, ncoef, it, float(np.linalg.norm(res)),
                                contraction)
        if it > 10 and contraction > 0.9:
            return _solve_w_newton(lam, s, setup, kappa, tol, w, alpha2, sweep)
    raise RuntimeError(f"w fixed point did not converge (last step {last_delta:.2e}); "
                       "reduce s or damp")


def _solve_w_newton(lam, s, setup, kappa, tol, w0, alpha2, sweep) -> WSolveResult:
    """Krylov-Newton fallback on the packed residual w + R Q N(s psi0 + w)."""
    shape_c = w0.shape

    def residual(x):
        wc = (x[: x.size // 2] + 1j * x[x.size // 2:]).reshape(shape_c)
        wc[0, 0] = 0.0
        w_new, _, _ = sweep(wc, None)
        r = wc - w_new
        return np.concatenate([r.real.ravel(), r.imag.ravel()])

    x0 = np.concatenate([w0.real.ravel(), w0.imag.ravel()])
    sol = optimize.root(residual, x0, method="krylov",
                        options={"fatol": tol * max(abs(s), 1e-6), "maxiter": 60})
    if not sol.success:
        raise RuntimeError(f"Newton fallback failed: {sol.message}")
    w = (sol.x[: sol.x.size // 2] + 1j * sol.x[sol.x.size // 2:]).reshape(shape_c)
    w[0, 0] = 0.0
    w_new, alpha2, ncoef = sweep(w, alpha2)
    res = setup.basis.landau_coeffs(w) - lam * w + setup.project_Q(ncoef)
    res[0, 0] = 0.0
    return WSolveResult(w, alpha2, ncoef, -1, float(np.linalg.norm(res)), np.nan)


def gamma1(lam: float, s: complex, setup: ReductionSetup, kappa: float,
           tol: float = 1e-12, warm: WSolveResult | None = None
           ) -> tuple[complex, WSolveResult]:
    """gamma1(lambda, s) = <psi0, F(lambda, s psi0 + w)> / s (limit 1-lambda at 0)."""
    if s == 0:
        return (1.0 - lam), solve_w(lam, 0.0, setup, kappa)
    wres = solve_w(lam, s, setup, kappa, tol=tol, warm=warm)
    gamma0 = (1.0 - lam) * s + wres.ncoef[0, 0]
    return gamma0 / s, wres


@dataclass
class BranchPoint:
    s: float
    lam: float
    b: float
    psi_coeffs: np.ndarray
    alpha: PeriodicVectorField
    energy: float
    residual_psi: float
    residual_alpha: float
    flux: float
    max_curl_a: float
    min_abs_psi: float


@dataclass
class Branch:
    """Family (s, lambda_s, psi_s, alpha_s) emanating from the normal state."""

    kappa: float
    shape: LatticeShape
    N: int
    K_lev: int
    beta: float
    points: list[BranchPoint] = field(default_factory=list)
    extrapolated: bool = False

    @property
    def s(self) -> np.ndarray:
        return np.array([p.s for p in self.points])

    @property
    def lam(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def b(self) -> np.ndarray:
        return np.array([p.b for p in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])


def _finish_point(s, lam, wres, setup, kappa) -> BranchPoint:
    basis = setup.basis
    grid, grid2 = basis.grid, basis.grid_d
    psi_c = wres.w.copy()
    psi_c[0, 0] += s
    psi = field_from_coeffs(basis, psi_c)
    down = np.stack([grid2.resample(wres.alpha2[0], basis.N),
                     grid2.resample(wres.alpha2[1], basis.N)])
    alpha = PeriodicVectorField(down, grid)
    params = GLParams(kappa=kappa, n=1, lam=lam)
    state = GLState(psi=psi, alpha=alpha, params=params)

    fco = basis.landau_coeffs(psi_c) - lam * psi_c + wres.ncoef
    res_psi = float(np.linalg.norm(fco)) / max(float(np.linalg.norm(psi_c)), 1e-300)
    vals = basis.synth(psi_c, dealias=True)
    d1 = basis.synth(basis.d1_coeffs(psi_c), dealias=True)
    d2 = basis.synth(basis.d2_coeffs(psi_c), dealias=True)
    j0 = supercurrent_grids(vals, d1, d2)
    ra = (grid2.curl_star_curl(wres.alpha2) + np.abs(vals)[None] ** 2 * wres.alpha2 - j0)
    res_alpha = float(np.sqrt(np.mean(ra[0] ** 2 + ra[1] ** 2)))

    curl_a = 1.0 + grid.curl(alpha.values)
    return BranchPoint(
        s=float(np.real(s)), lam=float(lam), b=float(kappa**2 / lam),
        psi_coeffs=psi_c, alpha=alpha, energy=energy(state),
        residual_psi=res_psi, residual_alpha=res_alpha,
        flux=float((1.0 + np.mean(grid.curl(alpha.values))) * grid.area),
        max_curl_a=float(np.max(curl_a)),
        min_abs_psi=float(np.min(np.abs(basis.synth(psi_c)))),
    )


def _lambda_root(s, setup, kappa, c_apriori, tol, warm):
    """Safeguarded bracketed root of gamma1(., s) near 1 + c s^2."""
    target = 1.0 + c_apriori * s * s
    cache: dict[float, tuple[complex, WSolveResult]] = {}

    def g(lam):
        if lam not in cache:
            cache[lam] = gamma1(lam, s, setup, kappa, tol=tol,
                                warm=warm[0] if warm else None)
            warm[0] = cache[lam][1]
        return float(np.real(cache[lam][0]))

    width = max(abs(target - 1.0), 1e-6)
    lo, hi = target - 0.7 * width, target + 0.7 * width
    for _ in range(12):
        if g(lo) * g(hi) < 0:
            break
        lo, hi = target - 2 * (target - lo), target + 2 * (hi - target)
    else:
        raise RuntimeError(f"gamma1 root not bracketed at s={s}")
    lam = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15)
    return lam, cache[min(cache, key=lambda L: abs(L - lam))][1]


def solve_branch(s_grid, kappa: float, shape: LatticeShape, N: int = 96,
                 K_lev: int = 40, tol: float = 1e-12,
                 setup: ReductionSetup | None = None) -> Branch:
    """Continue the bifurcating branch over the given s grid (ascending)."""
    if setup is None:
        setup = build_reduction(shape, N, K_lev)
    beta = setup.beta()
    c_apriori = (kappa**2 - 0.5) * beta + 0.5
    branch = Branch(kappa=kappa, shape=shape, N=setup.basis.N,
                    K_lev=setup.basis.K_lev, beta=beta)
    warm = [None]
    for s in np.sort(np.atleast_1d(np.asarray(s_grid, dtype=float))):
        if s == 0:
            wres = solve_w(1.0, 0.0, setup, kappa)
            branch.points.append(_finish_point(0.0, 1.0, wres, setup, kappa))
            continue
        if s > S_MAX_DEFAULT:
            branch.extrapolated = True
        lam, wres = _lambda_root(s, setup, kappa, c_apriori, tol, warm)
        if (lam - 1.0) * c_apriori <= 0:
            raise RuntimeError("branch emerged on the side excluded by the "
                               "sign condition; solver inconsistency")
        branch.points.append(_finish_point(s, lam, wres, setup, kappa))
    return branch


def branch_by_field(b_target: float, kappa: float, shape: LatticeShape,
                    N: int = 96, K_lev: int = 40, tol: float = 1e-12,
                    setup: ReductionSetup | None = None) -> BranchPoint:
    """Branch point with prescribed average field b = kappa^2 / lambda_s."""
    if setup is None:
        setup = build_reduction(shape, N, K_lev)
    beta = setup.beta()
    c_apriori = (kappa**2 - 0.5) * beta + 0.5
    lam_t = kappa**2 / b_target
    if b_target == kappa**2:
        wres = solve_w(1.0, 0.0, setup, kappa)
        return _finish_point(0.0, 1.0, wres, setup, kappa)
    if (lam_t - 1.0) * c_apriori <= 0:
        side = "b <= kappa^2" if c_apriori >= 0 else "b > kappa^2"
        raise BranchSideError(
            f"no branch at b={b_target}: sign((kappa^2-1/2) beta + 1/2) = "
            f"{np.sign(c_apriori):+.0f} admits only {side}")
    s_est = float(np.sqrt((lam_t - 1.0) / c_apriori))
    warm = [None]

    def g(s):
        val, wres = gamma1(lam_t, s, setup, kappa, tol=tol, warm=warm[0])
        warm[0] = wres
        return float(np.real(val))

    lo, hi = 0.5 * s_est, 1.5 * s_est
    for _ in range(12):
        if g(lo) * g(hi) < 0:
            break
        lo, hi = 0.5 * lo, min(1.5 * hi, 2 * S_MAX_DEFAULT)
    else:
        raise RuntimeError(f"field target b={b_target} not reachable on s grid")
    s_root = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=1e-15)
    _, wres = gamma1(lam_t, s_root, setup, kappa, tol=tol, warm=warm[0])
    return _finish_point(s_root, lam_t, wres, setup, kappa)


def effective_energy(lam: float, v: complex, setup: ReductionSetup, kappa: float,
                     tol: float = 1e-12) -> float:
    """e_lambda(v) = E_lambda(v psi0 + w(lambda, v)); gauge invariant in arg v."""
    wres = solve_w(lam, v, setup, kappa, tol=tol)
    basis = setup.basis
    psi_c = wres.w.copy()
    psi_c[0, 0] += v
    psi = field_from_coeffs(basis, psi_c)
    grid2 = basis.grid_d
    down = np.stack([grid2.resample(wres.alpha2[0], basis.N),
                     grid2.resample(wres.alpha2[1], basis.N)])
    alpha = PeriodicVectorField(down, basis.grid)
    return energy(GLState(psi=psi, alpha=alpha, params=GLParams(kappa=kappa, n=1, lam=lam)))


@dataclass
class ExpansionReport:
    """Fitted branch expansion coefficients against the asymptotic formulas."""

    kappa: float
    tau: complex
    N: int
    K_lev: int
    beta_used: float
    g_lambda_prime0: float          # fitted d lambda / d s^2 at 0
    g_lambda_prime0_target: float   # ((kappa^2 - 1/2) beta + 1/2) <|psi0|^2>
    g_lambda_prime0_err: float
    lambda1: float                  # alias of the fitted slope (epsilon = s)
    fit_cov: list                   # lstsq covariance of [1, s^2, s^4] model
    curl_a1_sup_err: float          # |curl a1 - (<|psi0|^2> - |psi0|^2)/2|_inf
    energy_slope: float             # log-log slope of |E - E_pred| vs s
    eps_of_b_slope: float           # fitted d s^2 / d (kappa^2 - b)
    eps_of_b_slope_target: float
    norm_convention: str = ("cell-averaged L2: <f,g> = |Omega|^{-1} int conj(f) g; "
                            "<|psi0|^2> = 1")

    def to_dict(self) -> dict:
        d = self.__dict__.copy()
        d["tau"] = [self.tau.real, self.tau.imag]
        return d


def fit_expansion(branch: Branch, kappa: float, shape: LatticeShape) -> ExpansionReport:
    """Quadratic-in-s^2 fits of lambda_s and E(s) against the leading-order
    formulas; uses the 5 smallest nonzero s."""
    pts = [p for p in branch.points if p.s > 0]
    if len(pts) < 5:
        raise ValueError("need at least 5 nonzero branch points to fit")
    pts = sorted(pts, key=lambda p: p.s)[:5]
    s = np.array([p.s for p in pts])
    lam = np.array([p.lam for p in pts])
    A = np.vstack([np.ones_like(s), s**2, s**4]).T
    coef, res_, rank_, sv_ = np.linalg.lstsq(A, lam, rcond=None)
    dof = max(len(s) - 3, 1)
    resid = lam - A @ coef
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(A.T @ A)

    beta = branch.beta
    target = (kappa**2 - 0.5) * beta + 0.5
    fit_c = float(coef[1])

    # second-order potential from the smallest-s point
    p0 = pts[0]
    basis = get_basis(1, shape, branch.N, branch.K_lev)
    curl_a1 = basis.grid.curl(p0.alpha.values) / p0.s**2
    psi0 = basis.phi[0, 0]
    curl_err = float(np.max(np.abs(curl_a1 - 0.5 * (1.0 - np.abs(psi0) ** 2))))

    # energy defect slope against the quartic prediction
    E = np.array([p.energy for p in pts])
    E_pred = kappa**2 / 2 + kappa**4 / lam**2 - 0.5 * kappa**4 * s**4 * target
    diff = np.abs(E - E_pred)
    good = diff > 1e-15
    slope = float(np.polyfit(np.log(s[good]), np.log(diff[good]), 1)[0]) if good.sum() >= 2 else np.nan

    # s^2 versus kappa^2 - b, linear-plus-quadratic through the origin so the
    # O(mu^2) analytic correction does not bias the reported slope
    mu = kappa**2 - np.array([p.b for p in pts])
    M = np.vstack([mu, mu**2]).T
    sl = float(np.linalg.lstsq(M, s**2, rcond=None)[0][0])
    sl_target = 1.0 / (kappa**2 * target)

    return ExpansionReport(
        kappa=kappa, tau=complex(shape.tau), N=branch.N, K_lev=branch.K_lev,
        beta_used=beta, g_lambda_prime0=fit_c, g_lambda_prime0_target=float(target),
        g_lambda_prime0_err=abs(fit_c - target), lambda1=fit_c,
        fit_cov=[[float(c) for c in row] for row in cov],
        curl_a1_sup_err=curl_err, energy_slope=slope,
        eps_of_b_slope=sl, eps_of_b_slope_target=float(sl_target),
    )
