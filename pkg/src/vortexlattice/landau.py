"""The linear magnetic problem on the normalized cell.

The constant-field covariant Laplacian L = -Laplacian_{A0} with
A0(x) = (n/2) J x factorizes through annihilation/creation operators with
commutator 2n, so its spectrum is {(2k+1) n} and the lowest level is the
n-dimensional space of theta-series functions

    psi(x) = exp(i n x2 (x1 + i x2) / 2) * sum_k c_k exp(i k nu (x1 + i x2)),

nu = sqrt(2 pi Im tau), with the coefficient recursion
c_{k+n} = exp(i n pi tau) exp(2 i k pi tau) c_k (re-derived from the two
quasi-periodicity relations of the associated entire function and verified
numerically through the annihilation residual).

Grid evaluation folds the Gaussian of the prefactor into the Hermite
functions generated by the creation operator, which keeps every term at
unit scale: level k of the j-th family is

    u_kj(x) = (-i)^k sum_q e^{i pi tau1 (n q^2 + 2 j q)} e^{i m nu x1}
              e^{i n x1 x2 / 2} h_k(sqrt(n) (x2 + m nu / n)),   m = j + q n,

with h_k the orthonormal Hermite functions.  Successive levels are exact
ladder images of each other, so raising/lowering/L act diagonally on
coefficient tables.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import LatticeShape, cell_geometry
from .spectral import CellGrid

TAU2_BAND = (0.2, 20.0)


def inner_avg(f: np.ndarray, g: np.ndarray) -> complex:
    """Cell-averaged L2 inner product (plain L2 divided by the cell area)."""
    return complex(np.mean(np.conj(f) * g))


def norm_avg(f: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(f) ** 2)))


def cell_average(g: np.ndarray) -> float | complex:
    """Rectangle-rule mean over the cell; spectrally accurate for smooth
    periodic integrands (|psi|^2, |psi|^4, curl a, ... qualify)."""
    if isinstance(g, QuasiPeriodicField):
        raise TypeError("cell_average needs a periodic integrand, not a "
                        "quasi-periodic field; pass |psi|^2 etc.")
    val = np.mean(g)
    return float(val.real) if abs(val.imag) < 1e-13 * (abs(val) + 1) else complex(val)


def _hermite_functions(t: np.ndarray, kmax: int) -> np.ndarray:
    """Orthonormal Hermite functions h_0..h_kmax on arbitrary arrays (stable
    three-term recurrence; no overflow for any argument)."""
    out = np.empty((kmax + 1, *t.shape))
    out[0] = np.pi ** (-0.25) * np.exp(-0.5 * t * t)
    if kmax >= 1:
        out[1] = np.sqrt(2.0) * t * out[0]
    for k in range(1, kmax):
        out[k + 1] = np.sqrt(2.0 / (k + 1)) * t * out[k] - np.sqrt(k / (k + 1)) * out[k - 1]
    return out


@dataclass(frozen=True)
class ThetaCoeffs:
    """Free seeds and truncation of the lowest-level theta series."""

    c: np.ndarray          # seeds c_0..c_{n-1}
    K: int                 # retained |k| <= K
    nu: float              # sqrt(2 pi Im tau)
    n: int
    tau: complex

    def extended(self, k: int) -> complex:
        """Coefficient c_k from the recursion c_{k+n} = e^{i n pi tau} e^{2 i k pi tau} c_k."""
        j = k % self.n
        q = (k - j) // self.n
        phase = 1j * np.pi * self.tau * (self.n * q * q + 2 * j * q)
        return complex(self.c[j] * np.exp(phase))


@dataclass
class LadderTerm:
    """Closed-form carrier for one theta term under repeated creation.

    Represents P(w) * exp(i m nu z) * exp(i n x2 z / 2) with w = conj(z) - z;
    the creation operator acts as P -> 2 P' - 2 i m nu P + n w P, raising the
    polynomial degree by one per level.
    """

    level: int
    m: int
    poly: np.ndarray  # complex coefficients, increasing degree, len == level + 1

    def __post_init__(self):
        self.poly = np.asarray(self.poly, dtype=complex)
        if len(self.poly) != self.level + 1:
            raise ValueError("polynomial degree must equal the level index")

    def raised(self, n: int, nu: float) -> "LadderTerm":
        P = self.poly
        dP = P[1:] * np.arange(1, len(P))
        new = np.zeros(len(P) + 1, dtype=complex)
        new[: len(dP)] += 2 * dP
        new[: len(P)] += -2j * self.m * nu * P
        new[1:] += n * P
        return LadderTerm(self.level + 1, self.m, new)

    def evaluate(self, n: int, nu: float, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        z = x1 + 1j * x2
        w = -2j * x2
        val = np.zeros_like(z)
        for c in self.poly[::-1]:
            val = val * w + c
        return val * np.exp(1j * self.m * nu * z) * np.exp(0.5j * n * x2 * z)


class LandauBasis:
    """Orthonormal Landau-level tables on the normalized cell.

    Levels 0..K_lev for each of the n lowest-level families, sampled on the
    working N-grid and on a 2N dealiasing grid, orthonormal in the
    cell-averaged inner product (so <|psi_0|^2> = 1 for each family).
    """

    def __init__(self, n: int, shape: LatticeShape, N: int, K_lev: int = 32):
        if not TAU2_BAND[0] <= shape.tau2 <= TAU2_BAND[1]:
            raise ValueError(f"tau2={shape.tau2:.3g} outside supported band {TAU2_BAND}")
        self.n = int(n)
        self.shape = shape
        self.N = int(N)
        self.K_lev = int(K_lev)
        self.geom = cell_geometry(shape, n, b=float(n))  # sigma = 1
        self.grid = CellGrid(self.geom.m_tau, N)
        self.grid_d = CellGrid(self.geom.m_tau, 2 * N)
        self.nu = float(np.sqrt(2 * np.pi * shape.tau2))

        # theta truncation: seed tail below 1e-14 plus Hermite support reach
        self.K_rule = int(np.ceil(np.sqrt(14 * np.log(10.0) * n / (np.pi * shape.tau2))))
        if N < 4 * self.K_rule:
            raise ValueError(f"grid N={N} too coarse for theta truncation K={self.K_rule}")
        reach = (np.sqrt(2 * self.K_lev + 1) + 8.0) / np.sqrt(n)
        x2max = self.nu  # cell spans x2 in [0, r_tau tau2) = [0, nu)
        m_lo = int(np.floor(-(x2max + reach) * n / self.nu)) - 1
        m_hi = int(np.ceil(reach * n / self.nu)) + 1
        m_lo = min(m_lo, -self.K_rule)
        m_hi = max(m_hi, self.K_rule)
        self._m_range = (m_lo, m_hi)

        self.theta = ThetaCoeffs(c=np.ones(n, dtype=complex), K=max(abs(m_lo), m_hi),
                                 nu=self.nu, n=n, tau=complex(shape.tau))

        raw = self._build_tables(self.grid)
        raw_d = self._build_tables(self.grid_d)

        # orthonormalize the n seed families (cell-averaged Gram, Cholesky mix)
        gram = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                gram[i, j] = inner_avg(raw[0, i], raw[0, j])
        W = np.linalg.inv(np.linalg.cholesky(gram))
        self._mix = W
        self.phi = np.einsum("ij,kjxy->kixy", W, raw)
        self.phi_d = np.einsum("ij,kjxy->kixy", W, raw_d)
        self.levels = np.arange(self.K_lev + 1)

    # ------------------------------------------------------------------
    def _build_tables(self, grid: CellGrid) -> np.ndarray:
        x1, x2 = grid.x
        return self._evaluate_raw(x1, x2)

    def _evaluate_raw(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Un-mixed tables u[k, j] at arbitrary points (stable at any level)."""
        n, nu, tau1 = self.n, self.nu, self.shape.tau1
        out = np.zeros((self.K_lev + 1, n, *x1.shape), dtype=complex)
        carrier = np.exp(0.5j * n * x1 * x2)
        kphase = (-1j) ** np.arange(self.K_lev + 1)
        for m in range(self._m_range[0], self._m_range[1] + 1):
            j = m % n
            q = (m - j) // n
            seed = np.exp(1j * np.pi * tau1 * (n * q * q + 2 * j * q))
            t = np.sqrt(n) * (x2 + m * nu / n)
            if np.min(np.abs(t)) > np.sqrt(2 * self.K_lev + 1) + 8.5:
                continue
            h = _hermite_functions(t, self.K_lev)
            term = seed * np.exp(1j * m * nu * x1) * carrier
            out[:, j] += kphase[:, None, None] * h * term[None]
        return out

    def evaluate(self, k: int, j: int, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        """Basis function phi_{k,j} at arbitrary points."""
        raw = self._evaluate_raw(np.asarray(x1, float), np.asarray(x2, float))
        return np.einsum("i,ixy->xy", self._mix[j], raw[k])

    # ------------------------------------------------------------------
    # coefficient <-> grid
    # ------------------------------------------------------------------
    def synth(self, coeffs: np.ndarray, dealias: bool = False) -> np.ndarray:
        tab = self.phi_d if dealias else self.phi
        return np.tensordot(coeffs, tab, axes=([0, 1], [0, 1]))

    def project(self, values: np.ndarray, dealias: bool = False) -> np.ndarray:
        tab = self.phi_d if dealias else self.phi
        return np.einsum("kjxy,xy->kj", np.conj(tab), values) / values.size

    # ------------------------------------------------------------------
    # exact ladder actions on coefficient tables (shape (K_lev+1, n))
    # ------------------------------------------------------------------
    def lower_coeffs(self, d: np.ndarray) -> np.ndarray:
        out = np.zeros_like(d)
        k = np.arange(1, self.K_lev + 1)
        out[:-1] = np.sqrt(2.0 * self.n * k)[:, None] * d[1:]
        return out

    def raise_coeffs(self, d: np.ndarray) -> np.ndarray:
        out = np.zeros_like(d)
        k = np.arange(1, self.K_lev + 1)
        out[1:] = np.sqrt(2.0 * self.n * k)[:, None] * d[:-1]
        return out

    def landau_coeffs(self, d: np.ndarray) -> np.ndarray:
        return ((2 * self.levels + 1) * self.n)[:, None] * d

    def resolvent_coeffs(self, d: np.ndarray, lam: float) -> np.ndarray:
        """(L - lam)^{-1} restricted to levels k >= 1 (zeroth row untouched -> 0)."""
        eig = (2 * self.levels + 1) * self.n - lam
        if np.min(np.abs(eig[1:])) < 1e-9:
            raise ValueError(f"lambda={lam} collides with a Landau eigenvalue")
        out = np.zeros_like(d)
        out[1:] = d[1:] / eig[1:, None]
        return out

    def d1_coeffs(self, d: np.ndarray) -> np.ndarray:
        return 0.5 * (self.lower_coeffs(d) - self.raise_coeffs(d))

    def d2_coeffs(self, d: np.ndarray) -> np.ndarray:
        return (self.lower_coeffs(d) + self.raise_coeffs(d)) / 2j


_BASIS_CACHE: dict[tuple, LandauBasis] = {}


def get_basis(n: int, shape: LatticeShape, N: int, K_lev: int = 32) -> LandauBasis:
    key = (n, round(shape.tau1, 14), round(shape.tau2, 14), N, K_lev)
    if key not in _BASIS_CACHE:
        if len(_BASIS_CACHE) > 24:
            _BASIS_CACHE.clear()
        _BASIS_CACHE[key] = LandauBasis(n, shape, N, K_lev)
    return _BASIS_CACHE[key]


# ----------------------------------------------------------------------
# quasi-periodic fields
# ----------------------------------------------------------------------
@dataclass
class QuasiPeriodicField:
    """Complex samples with magnetic boundary phases on the normalized cell.

    Boundary condition: psi(x + t) = exp(i (n/2) x . J t + i C_t) psi(x) for
    the two basis vectors; in logical coordinates the wrap phases are
    n pi y2 + C1 (t1 direction) and -n pi y1 + C2 (t2 direction).
    """

    n: int
    shape: LatticeShape
    values: np.ndarray
    coeffs: np.ndarray | None = None
    basis: LandauBasis | None = None
    bc_const: tuple[float, float] = (0.0, 0.0)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> CellGrid:
        if self.basis is not None and self.basis.N == self.N:
            return self.basis.grid
        return CellGrid(cell_geometry(self.shape, max(self.n, 1), b=float(max(self.n, 1))).m_tau, self.N)

    def copy_with(self, **kw) -> "QuasiPeriodicField":
        return replace(self, **kw)


def field_from_coeffs(basis: LandauBasis, coeffs: np.ndarray) -> QuasiPeriodicField:
    return QuasiPeriodicField(n=basis.n, shape=basis.shape, values=basis.synth(coeffs),
                              coeffs=np.asarray(coeffs, dtype=complex), basis=basis)


def theta_null_basis(n: int, shape: LatticeShape, N: int,
                     K: int | None = None) -> list[QuasiPeriodicField]:
    """The n orthonormal lowest-level fields, <|psi|^2> = 1 each.

    K overrides the automatic theta truncation check (it never loosens it).
    Fields carry a small ladder headroom so creation operators act exactly.
    """
    basis = get_basis(n, shape, N, K_lev=4)
    if K is not None and N < 4 * K:
        raise ValueError("N must be at least 4K")
    out = []
    for j in range(n):
        c = np.zeros((basis.K_lev + 1, n), dtype=complex)
        c[0, j] = 1.0
        out.append(QuasiPeriodicField(n=n, shape=shape, values=basis.phi[0, j].copy(),
                                      coeffs=c, basis=basis))
    return out


def ladder_apply(f: QuasiPeriodicField, direction: str) -> QuasiPeriodicField:
    """Annihilation ('lower', level k -> k-1, factor sqrt(2nk)) or creation
    ('raise', k -> k+1, factor sqrt(2n(k+1))) on the Landau coefficients."""
    if f.coeffs is None or f.basis is None:
        raise ValueError("ladder_apply needs a field with Landau coefficients")
    b = f.basis
    d = f.coeffs
    if d.shape[0] < b.K_lev + 1:
        d = np.vstack([d, np.zeros((b.K_lev + 1 - d.shape[0], d.shape[1]), dtype=complex)])
    if direction == "lower":
        nd = b.lower_coeffs(d)
    elif direction == "raise":
        top = float(np.max(np.abs(d[-1])))
        if top > 1e-12 * max(float(np.max(np.abs(d))), 1e-300):
            raise ValueError("raising would truncate top-level content; "
                             "rebuild the basis with a larger K_lev")
        nd = b.raise_coeffs(d)
    else:
        raise ValueError("direction must be 'lower' or 'raise'")
    return field_from_coeffs(b, nd)


def landau_apply(f: QuasiPeriodicField) -> QuasiPeriodicField:
    """L f, i.e. coefficient d[k] -> (2k+1) n d[k]."""
    if f.coeffs is None or f.basis is None:
        raise ValueError("landau_apply needs a field with Landau coefficients")
    b = f.basis
    d = f.coeffs
    if d.shape[0] < b.K_lev + 1:
        d = np.vstack([d, np.zeros((b.K_lev + 1 - d.shape[0], d.shape[1]), dtype=complex)])
    return field_from_coeffs(b, b.landau_coeffs(d))


def covariant_gradient(f: QuasiPeriodicField) -> tuple[QuasiPeriodicField, QuasiPeriodicField]:
    """(D1 f, D2 f) with D1 = (alpha - alpha*)/2, D2 = (alpha + alpha*)/(2i)."""
    if f.coeffs is None or f.basis is None:
        raise ValueError("covariant_gradient needs Landau coefficients")
    b = f.basis
    d = f.coeffs
    if d.shape[0] < b.K_lev + 1:
        d = np.vstack([d, np.zeros((b.K_lev + 1 - d.shape[0], d.shape[1]), dtype=complex)])
    return field_from_coeffs(b, b.d1_coeffs(d)), field_from_coeffs(b, b.d2_coeffs(d))


# ----------------------------------------------------------------------
# boundary phases, quotients, derivatives
# ----------------------------------------------------------------------
def _wrap_exponents(f: QuasiPeriodicField, grid: CellGrid) -> tuple[np.ndarray, np.ndarray]:
    y1, y2 = grid.y
    th1 = f.n * np.pi * y2 + f.bc_const[0]
    th2 = -f.n * np.pi * y1 + f.bc_const[1]
    return th1, th2


def qp_derivatives(f: QuasiPeriodicField, grid: CellGrid | None = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian (d1 psi, d2 psi) by spectral differentiation of the periodic
    quotients along the two lattice directions.

    Independent of the Landau-coefficient representation; exact for fields
    band-limited on the grid.  Pass a grid to use a non-normalized cell scale.
    """
    grid = f.grid if grid is None else grid
    y1, y2 = grid.y
    th1, th2 = _wrap_exponents(f, grid)
    N = f.N
    k = np.fft.fftfreq(N, d=1.0 / N)

    q = f.values * np.exp(-1j * y1 * th1)
    dq = np.fft.ifft(2j * np.pi * k[:, None] * np.fft.fft(q, axis=0), axis=0)
    dpsi_dy1 = np.exp(1j * y1 * th1) * dq + 1j * th1 * f.values

    q = f.values * np.exp(-1j * y2 * th2)
    dq = np.fft.ifft(2j * np.pi * k[None, :] * np.fft.fft(q, axis=1), axis=1)
    dpsi_dy2 = np.exp(1j * y2 * th2) * dq + 1j * th2 * f.values

    mt = grid.minv_t
    d1 = mt[0, 0] * dpsi_dy1 + mt[0, 1] * dpsi_dy2
    d2 = mt[1, 0] * dpsi_dy1 + mt[1, 1] * dpsi_dy2
    return d1, d2


def covariant_gradient_grid(f: QuasiPeriodicField) -> tuple[np.ndarray, np.ndarray]:
    """Grid-route covariant gradient (independent of the ladder algebra)."""
    d1, d2 = qp_derivatives(f)
    x1, x2 = f.grid.x
    return d1 + 0.5j * f.n * x2 * f.values, d2 - 0.5j * f.n * x1 * f.values


def annihilator_residual(f: QuasiPeriodicField) -> float:
    """|alpha psi| / |psi| with the annihilation operator applied through the
    grid derivatives; vanishes exactly on the lowest Landau level."""
    D1, D2 = covariant_gradient_grid(f)
    return norm_avg(D1 + 1j * D2) / norm_avg(f.values)


def quasi_periodicity_residual(f: QuasiPeriodicField) -> float:
    """Boundary-consistency mismatch between the sampled extension and the
    phase-multiplied samples, measured through the spectral tails of the
    periodic quotients (a seam jump of relative size eps registers >= eps/2)."""
    grid = f.grid
    y1, y2 = grid.y
    th1, th2 = _wrap_exponents(f, grid)
    N = f.N
    rms = norm_avg(f.values)
    if rms == 0:
        return 0.0
    res = 0.0
    for q, axis in (((f.values * np.exp(-1j * y1 * th1)), 0),
                    ((f.values * np.exp(-1j * y2 * th2)), 1)):
        a = np.fft.fft(q, axis=axis) / N
        a = np.fft.fftshift(a, axes=axis)
        idx = np.abs(np.arange(N) - N // 2)
        tail = idx >= N // 4
        sel = a[tail, :] if axis == 0 else a[:, tail]
        kmag = idx[tail]
        kk = kmag[:, None] if axis == 0 else kmag[None, :]
        res = max(res, float(np.max(np.pi * kk * np.abs(sel))) / rms)
    return res


def magnetic_shift_values(values: np.ndarray, n: int, bc_const: tuple[float, float],
                          dy: tuple[float, float]) -> tuple[np.ndarray, tuple[float, float]]:
    """Samples at y + dy continued through the boundary phases (scale-free:
    only logical coordinates enter); returns values and updated BC constants."""
    N = values.shape[0]
    s = np.arange(N) / N
    y1, y2 = np.meshgrid(s, s, indexing="ij")
    vals = values
    C1, C2 = bc_const
    k = np.fft.fftfreq(N, d=1.0 / N)

    if dy[0] != 0.0:
        th1 = n * np.pi * y2 + C1
        q = vals * np.exp(-1j * y1 * th1)
        q = np.fft.ifft(np.exp(2j * np.pi * k[:, None] * dy[0]) * np.fft.fft(q, axis=0), axis=0)
        vals = q * np.exp(1j * (y1 + dy[0]) * th1)
        C2 = C2 - n * np.pi * dy[0]
    if dy[1] != 0.0:
        th2 = -n * np.pi * y1 + C2
        q = vals * np.exp(-1j * y2 * th2)
        q = np.fft.ifft(np.exp(2j * np.pi * k[None, :] * dy[1]) * np.fft.fft(q, axis=1), axis=1)
        vals = q * np.exp(1j * (y2 + dy[1]) * th2)
        C1 = C1 + n * np.pi * dy[1]
    return vals, (C1, C2)


def magnetic_shift(f: QuasiPeriodicField, dy: tuple[float, float]) -> QuasiPeriodicField:
    """Translation by dy1*t1 + dy2*t2 through the boundary phases."""
    vals, bc = magnetic_shift_values(f.values, f.n, f.bc_const, dy)
    return QuasiPeriodicField(n=f.n, shape=f.shape, values=vals, coeffs=None,
                              basis=f.basis, bc_const=bc)


# ----------------------------------------------------------------------
# finite-difference validation backend (square cell)
# ----------------------------------------------------------------------
def magnetic_laplacian_fd(n: int, N: int) -> sp.csr_matrix:
    """Link-variable discretization of L = -Laplacian_{A0} on the square cell
    (tau = i) with the magnetic boundary phases; used only to cross-validate
    the spectrum {(2k+1) n} with multiplicity n."""
    r = np.sqrt(2 * np.pi)
    h = r / N
    idx = lambda i, j: (i % N) * N + (j % N)
    rows, cols, vals = [], [], []
    diag = np.full(N * N, 4.0 / h**2)
    for i in range(N):
        for j in range(N):
            x1, x2 = i * h, j * h
            a = idx(i, j)
            # hop +e1: link phase exp(i n h x2 / 2), boundary wrap adds exp(i n r x2 / 2)
            ph = np.exp(0.5j * n * h * x2)
            if i == N - 1:
                ph *= np.exp(0.5j * n * r * x2)
            rows.append(a); cols.append(idx(i + 1, j)); vals.append(-ph / h**2)
            # hop +e2: link phase exp(-i n h x1 / 2), wrap adds exp(-i n r x1 / 2)
            ph = np.exp(-0.5j * n * h * x1)
            if j == N - 1:
                ph *= np.exp(-0.5j * n * r * x1)
            rows.append(a); cols.append(idx(i, j + 1)); vals.append(-ph / h**2)
    up = sp.csr_matrix((vals, (rows, cols)), shape=(N * N, N * N))
    L = up + up.conj().T + sp.diags(diag)
    return L.tocsr()


def fd_spectrum(n: int, N: int, k_eigs: int | None = None) -> np.ndarray:
    """Lowest eigenvalues of the discretized operator, ascending."""
    if k_eigs is None:
        k_eigs = 4 * n + 2
    L = magnetic_laplacian_fd(n, N)
    vals = spla.eigsh(L, k=k_eigs, sigma=0.0, which="LM", return_eigenvectors=False)
    return np.sort(vals)
