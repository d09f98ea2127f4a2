"""Portable field snapshots: '#'-prefixed JSON header line plus CSV columns.

Scalar fields use columns (y1, y2, re_psi, im_psi); full states append
(alpha1, alpha2, curl_a).  Raw states use (y1, y2, re_psi, im_psi, ap1, ap2).
All floats are written with 17 significant digits so re-runs reproduce
byte-identical files.
"""

from __future__ import annotations

import json

import numpy as np

from .glcore import GLParams, GLState, PeriodicVectorField
from .landau import QuasiPeriodicField
from .lattice import LatticeShape, cell_geometry
from .spectral import CellGrid

FMT = "%.17g"


def _grid_columns(N: int) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(N) / N
    y1, y2 = np.meshgrid(s, s, indexing="ij")
    return y1.ravel(), y2.ravel()


def _write(path, header: dict, columns: list[str], arrays: list[np.ndarray]) -> None:
    data = np.column_stack(arrays)
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        np.savetxt(fh, data, fmt=FMT, delimiter=",")


def _read(path) -> tuple[dict, np.ndarray]:
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ValueError("snapshot missing JSON header line")
        header = json.loads(first[1:].strip())
        fh.readline()  # column names
        data = np.loadtxt(fh, delimiter=",")
    return header, data


def save_field(path, f: QuasiPeriodicField, extra: dict | None = None) -> None:
    N = f.N
    y1, y2 = _grid_columns(N)
    header = {"kind": "field", "n": f.n, "tau": [f.shape.tau1, f.shape.tau2],
              "N": N, "bc_const": list(f.bc_const),
              "normalization": "cell-average |psi|^2"}
    if f.basis is not None:
        header["K"] = f.basis.theta.K
        header["K_lev"] = f.basis.K_lev
    header.update(extra or {})
    _write(path, header, ["y1", "y2", "re_psi", "im_psi"],
           [y1, y2, f.values.real.ravel(), f.values.imag.ravel()])


def load_field(path) -> QuasiPeriodicField:
    header, data = _read(path)
    N = int(header["N"])
    vals = (data[:, 2] + 1j * data[:, 3]).reshape(N, N)
    shape = LatticeShape(complex(header["tau"][0], header["tau"][1]))
    return QuasiPeriodicField(n=int(header["n"]), shape=shape, values=vals,
                              bc_const=tuple(header.get("bc_const", (0.0, 0.0))))


def save_state(path, state: GLState, extra: dict | None = None) -> None:
    psi, alpha, p = state.psi, state.alpha, state.params
    N = psi.N
    y1, y2 = _grid_columns(N)
    curl_a = p.n + alpha.grid.curl(alpha.values)
    header = {"kind": "state", "n": p.n, "tau": [psi.shape.tau1, psi.shape.tau2],
              "N": N, "kappa": p.kappa, "lambda": p.lam, "b": p.b,
              "bc_const": list(psi.bc_const)}
    header.update(extra or {})
    _write(path, header,
           ["y1", "y2", "re_psi", "im_psi", "alpha1", "alpha2", "curl_a"],
           [y1, y2, psi.values.real.ravel(), psi.values.imag.ravel(),
            alpha.values[0].ravel(), alpha.values[1].ravel(), curl_a.ravel()])


def load_state(path) -> GLState:
    header, data = _read(path)
    N = int(header["N"])
    shape = LatticeShape(complex(header["tau"][0], header["tau"][1]))
    n = int(header["n"])
    psi = QuasiPeriodicField(n=n, shape=shape,
                             values=(data[:, 2] + 1j * data[:, 3]).reshape(N, N),
                             bc_const=tuple(header.get("bc_const", (0.0, 0.0))))
    alpha_vals = np.stack([data[:, 4].reshape(N, N), data[:, 5].reshape(N, N)])
    grid = CellGrid(cell_geometry(shape, n, b=float(n)).m_tau, N)
    params = GLParams(kappa=float(header["kappa"]), n=n, lam=float(header["lambda"]))
    return GLState(psi=psi, alpha=PeriodicVectorField(alpha_vals, grid), params=params)


def save_raw_state(path, raw, extra: dict | None = None) -> None:
    from .gauge import RawLatticeState  # local import to avoid a cycle
    assert isinstance(raw, RawLatticeState)
    N = raw.N
    y1, y2 = _grid_columns(N)
    header = {"kind": "raw", "n": raw.n, "tau": [raw.shape.tau1, raw.shape.tau2],
              "N": N, "r": raw.r, "bc_const": list(raw.bc_const)}
    header.update(extra or {})
    _write(path, header, ["y1", "y2", "re_psi", "im_psi", "ap1", "ap2"],
           [y1, y2, raw.psi.real.ravel(), raw.psi.imag.ravel(),
            raw.a_p[0].ravel(), raw.a_p[1].ravel()])


def load_raw_state(path):
    from .gauge import RawLatticeState
    header, data = _read(path)
    N = int(header["N"])
    shape = LatticeShape(complex(header["tau"][0], header["tau"][1]))
    return RawLatticeState(
        psi=(data[:, 2] + 1j * data[:, 3]).reshape(N, N),
        a_p=np.stack([data[:, 4].reshape(N, N), data[:, 5].reshape(N, N)]),
        n=int(header["n"]), shape=shape, r=float(header["r"]),
        bc_const=tuple(header.get("bc_const", (0.0, 0.0))))
