"""Command-line front end.

Commands: beta, critical-points, branch, field-landscape, gauge-fix, verify.
Configuration comes from an optional JSON file (--config) with flag
overrides (flags win).  tau is accepted as "re,im" or the names "square"
(i) and "triangular" (e^{i pi/3}).  Output files carry a '#'-prefixed JSON
provenance header (config hash and truncations) and 17-significant-digit
CSV, so identical configs reproduce byte-identical outputs.

Exit codes: 0 success (verify failures are data, not errors), 2 invalid
configuration, 3 solver failure (partial results flushed with a failure
marker).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from multiprocessing import Pool

import numpy as np

from . import abrikosov, bifurcation, gauge, landau, snapshot
from .lattice import (TAU_SQUARE, TAU_TRIANGULAR, fundamental_domain_grid,
                      normalize_tau)

FMT = "%.17g"


class ConfigError(ValueError):
    pass


def parse_tau(text: str) -> complex:
    if text == "square":
        return complex(TAU_SQUARE)
    if text == "triangular":
        return complex(TAU_TRIANGULAR)
    try:
        re, im = (float(p) for p in text.split(","))
    except Exception as exc:
        raise ConfigError(f"cannot parse tau {text!r}: use 're,im', 'square' or "
                          "'triangular'") from exc
    return complex(re, im)


def parse_tau_grid(text: str) -> list[complex]:
    if text.startswith("fundamental:"):
        try:
            n1, n2 = (int(p) for p in text.split(":")[1].split("x"))
        except Exception as exc:
            raise ConfigError(f"bad tau grid {text!r}; use fundamental:20x20") from exc
        if n1 < 1 or n2 < 1:
            raise ConfigError("tau grid must be non-empty")
        return fundamental_domain_grid(n1, n2)
    return [parse_tau(part) for part in text.split(";")]


def merged_config(args: argparse.Namespace, defaults: dict) -> dict:
    cfg = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in defaults:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            cfg[key] = val
    for key in ("tol", "w_tol"):
        if key in cfg and cfg[key] <= 0:
            raise ConfigError(f"tolerance {key} must be positive")
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def out_path(cfg: dict, name: str) -> str:
    root = cfg.get("outdir") or os.environ.get("VORTEXLATTICE_OUT", ".")
    os.makedirs(root, exist_ok=True)
    return os.path.join(root, name)


def write_csv(path: str, cfg: dict, columns: list[str], rows: np.ndarray,
              extra_comments: dict | None = None) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        prov = {"config": cfg, "config_hash": config_hash(cfg)}
        prov.update(extra_comments or {})
        fh.write("# " + json.dumps(prov, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        np.savetxt(fh, np.atleast_2d(rows), fmt=FMT, delimiter=",")


def write_json(path: str, cfg: dict, payload: dict) -> None:
    payload = {"config_hash": config_hash(cfg), **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _beta_row(args):
    tau, n_quad = args
    shape, _ = normalize_tau(tau)
    res = abrikosov.beta_lattice_sum(shape)
    beta = res.beta
    if n_quad:
        beta = abrikosov.beta_quadrature(shape, N=n_quad).beta
    kc = float(np.sqrt(0.5 * (1 - 1 / beta)))
    return [tau.real, tau.imag, beta, kc]


def cmd_beta(args) -> int:
    defaults = {"tau_grid": "fundamental:20x20", "method": "lattice_sum",
                "N": 64, "jobs": 1, "outdir": None, "output": "beta_scan.csv"}
    cfg = merged_config(args, defaults)
    taus = parse_tau_grid(cfg["tau_grid"])
    n_quad = cfg["N"] if cfg["method"] == "quadrature" else 0
    work = [(tau, n_quad) for tau in taus]
    if cfg["jobs"] > 1:
        with Pool(cfg["jobs"]) as pool:
            rows = pool.map(_beta_row, work)
    else:
        rows = [_beta_row(w) for w in work]
    path = out_path(cfg, cfg["output"])
    write_csv(path, cfg, ["tau_re", "tau_im", "beta", "kappa_c"], np.array(rows))
    print(f"wrote {path} ({len(rows)} shapes)")
    return 0


def cmd_critical_points(args) -> int:
    defaults = {"tolerance": 1e-8, "outdir": None, "output": "critical_points.json"}
    cfg = merged_config(args, defaults)
    pts = abrikosov.find_beta_critical_points(tolerance=cfg["tolerance"])
    payload = {"critical_points": [
        {"tau": [p.tau.real, p.tau.imag], "kind": p.kind,
         "gradient_norm": p.gradient_norm,
         "hessian_eigenvalues": list(p.hessian_eigenvalues)} for p in pts]}
    path = out_path(cfg, cfg["output"])
    write_json(path, cfg, payload)
    print(f"wrote {path} ({len(pts)} critical points)")
    return 0


def cmd_branch(args) -> int:
    defaults = {"kappa2": 2.0, "tau": "square", "s_max": 0.1, "s_points": 5,
                "N": 128, "K_lev": 40, "tol": 1e-12, "outdir": None,
                "prefix": "branch"}
    cfg = merged_config(args, defaults)
    kappa = float(np.sqrt(cfg["kappa2"]))
    shape, _ = normalize_tau(parse_tau(cfg["tau"]))
    s_grid = np.linspace(cfg["s_max"] / cfg["s_points"], cfg["s_max"], cfg["s_points"])
    branch = bifurcation.solve_branch(s_grid, kappa, shape, N=cfg["N"],
                                      K_lev=cfg["K_lev"], tol=cfg["tol"])
    rows = [[p.s, p.lam, p.b, p.energy, p.residual_psi, p.residual_alpha,
             p.max_curl_a, p.min_abs_psi] for p in branch.points]
    csv_path = out_path(cfg, cfg["prefix"] + ".csv")
    write_csv(csv_path, cfg,
              ["s", "lambda", "b", "energy", "residual_psi", "residual_alpha",
               "max_curl_a", "min_abs_psi"], np.array(rows),
              {"extrapolated_regime": branch.extrapolated})
    report = bifurcation.fit_expansion(branch, kappa, shape)
    json_path = out_path(cfg, cfg["prefix"] + "_expansion.json")
    write_json(json_path, cfg, report.to_dict())
    print(f"wrote {csv_path} and {json_path}")
    print(f"  fitted d(lambda)/d(s^2) = {report.g_lambda_prime0:.9f} "
          f"(target {report.g_lambda_prime0_target:.9f})")
    return 0


def cmd_field_landscape(args) -> int:
    defaults = {"kappa2": 2.0, "b": 1.9, "tau_grid": "fundamental:8x6",
                "numeric": False, "N": 96, "K_lev": 40, "outdir": None,
                "output": "field_landscape.csv"}
    cfg = merged_config(args, defaults)
    kappa = float(np.sqrt(cfg["kappa2"]))
    taus = parse_tau_grid(cfg["tau_grid"])
    cols = ["tau_re", "tau_im", "beta", "kappa_c", "E_b_asymptotic"]
    if cfg["numeric"]:
        cols.append("E_b_numeric")
    rows = []
    for tau in taus:
        shape, _ = normalize_tau(tau)
        beta = abrikosov.beta_lattice_sum(shape).beta
        kc = float(np.sqrt(0.5 * (1 - 1 / beta)))
        row = [tau.real, tau.imag, beta, kc,
               abrikosov.energy_landscape_asymptotic(shape, kappa, cfg["b"])]
        if cfg["numeric"]:
            pt = bifurcation.branch_by_field(cfg["b"], kappa, shape,
                                             N=cfg["N"], K_lev=cfg["K_lev"])
            row.append(pt.energy)
        rows.append(row)
    path = out_path(cfg, cfg["output"])
    write_csv(path, cfg, cols, np.array(rows))
    print(f"wrote {path} ({len(rows)} shapes)")
    return 0


def cmd_gauge_fix(args) -> int:
    defaults = {"input": None, "kappa2": 1.0, "outdir": None, "output": "fixed_state.csv"}
    cfg = merged_config(args, defaults)
    if not cfg["input"]:
        raise ConfigError("gauge-fix needs --input snapshot")
    raw = snapshot.load_raw_state(cfg["input"])
    fixed, info = gauge.fix_gauge(raw, kappa=float(np.sqrt(cfg["kappa2"])),
                                  return_info=True)
    path = out_path(cfg, cfg["output"])
    snapshot.save_state(path, fixed, extra={
        "config_hash": config_hash(cfg),
        "translation": [float(info["translation"][0]), float(info["translation"][1])]})
    print(f"wrote {path}")
    return 0


# ----------------------------------------------------------------------
# verify suites
# ----------------------------------------------------------------------
def _verdict(name: str, measured: float, tol: float) -> dict:
    ok = bool(measured < tol)
    print(f"  [{'PASS' if ok else 'FAIL'}] {name}: {measured:.3e} (tol {tol:.1e})")
    return {"name": name, "measured": measured, "tolerance": tol, "pass": ok}


def verify_spectrum(cfg) -> list[dict]:
    checks = []
    vals = landau.fd_spectrum(1, cfg["N_fd"])
    target = np.array([1.0, 3.0, 5.0, 7.0])
    err = float(np.max(np.abs(vals[:4] - target) / target))
    checks.append(_verdict("fd eigenvalues {1,3,5,7} relative error", err, 0.02))
    shape, _ = normalize_tau(parse_tau(cfg["tau"]))
    psi0 = landau.theta_null_basis(1, shape, cfg["N"])[0]
    checks.append(_verdict("annihilator residual on theta field",
                           landau.annihilator_residual(psi0), 1e-10))
    return checks


def verify_gauge(cfg) -> list[dict]:
    from .glcore import GLState, GLParams
    rng = np.random.default_rng(cfg["seed"])
    shape, _ = normalize_tau(parse_tau(cfg["tau"]))
    setup = bifurcation.build_reduction(shape, cfg["N"], cfg["K_lev"])
    pt = bifurcation.branch_by_field(0.95 * cfg["kappa2"], np.sqrt(cfg["kappa2"]),
                                     shape, setup=setup)
    psi = landau.field_from_coeffs(setup.basis, pt.psi_coeffs)
    st = GLState(psi, pt.alpha, GLParams(np.sqrt(cfg["kappa2"]), 1, pt.lam))
    raw0 = gauge.raw_from_state(st)
    grid = raw0.grid
    y1, y2 = grid.y
    worst_bc = worst_obs = 0.0
    for _ in range(cfg["trials"]):
        eta = sum(rng.normal(0, 0.2) * np.sin(2 * np.pi * ((k1 + 1) * y1 + k2 * y2)
                                              + rng.uniform(0, 2 * np.pi))
                  for k1 in range(2) for k2 in range(-1, 2))
        c = tuple(rng.normal(0, 0.2, 2))
        t = rng.uniform(-0.5, 0.5, 2) @ np.column_stack([raw0.m[:, 0], raw0.m[:, 1]]).T
        raw = gauge.translate_state(gauge.gauge_transform(raw0, eta, c), t)
        fixed, info = gauge.fix_gauge(raw, kappa=np.sqrt(cfg["kappa2"]),
                                      return_info=True)
        worst_bc = max(worst_bc,
                       landau.quasi_periodicity_residual(fixed.psi),
                       *fixed.alpha.constraint_residuals())
        ref = gauge.translate_state(raw, info["translation"]).observables()
        sig2 = info["sigma"] ** 2
        worst_obs = max(worst_obs, float(np.max(np.abs(
            np.abs(fixed.psi.values) ** 2 - sig2 * ref["ns"]))))
    checks = [_verdict("fixed-gauge constraint residuals", worst_bc, 1e-10),
              _verdict("observables reproduced after translation", worst_obs, 1e-8)]
    return checks


def verify_symmetry(cfg) -> list[dict]:
    rng = np.random.default_rng(cfg["seed"])
    shape, _ = normalize_tau(parse_tau(cfg["tau"]))
    setup = bifurcation.build_reduction(shape, cfg["N"], cfg["K_lev"])
    basis = setup.basis
    kappa = float(np.sqrt(cfg["kappa2"]))
    from .glcore import map_F
    d = np.zeros((basis.K_lev + 1, 1), complex)
    d[:8, 0] = 0.05 * (rng.standard_normal(8) + 1j * rng.standard_normal(8))
    psi = landau.field_from_coeffs(basis, d)
    F, _, _ = map_F(1.05, psi, kappa)
    delta = 0.7
    F_rot, _, _ = map_F(1.05, landau.field_from_coeffs(basis, np.exp(1j * delta) * d), kappa)
    equiv = float(np.max(np.abs(F_rot.values - np.exp(1j * delta) * F.values)))
    realness = abs(complex(landau.inner_avg(psi.values, F.values)).imag)
    s = 0.06
    wres = bifurcation.solve_w(1.02, s, setup, kappa)
    wres_rot = bifurcation.solve_w(1.02, s * np.exp(1j * delta), setup, kappa)
    w_equiv = float(np.max(np.abs(wres_rot.w - np.exp(1j * delta) * wres.w)))
    g, _ = bifurcation.gamma1(1.02, s, setup, kappa)
    g_rot, _ = bifurcation.gamma1(1.02, s * np.exp(1j * delta), setup, kappa)
    g_equiv = abs(complex(g_rot) - complex(g))  # gamma1 = gamma0/s is phase-free
    return [_verdict("F gauge equivariance", equiv, 1e-10),
            _verdict("Im<psi, F(psi)>", realness, 1e-10),
            _verdict("w equivariance", w_equiv, 1e-10),
            _verdict("gamma1 phase invariance", g_equiv, 1e-10)]


def verify_asymptotics(cfg) -> list[dict]:
    shape, _ = normalize_tau(parse_tau(cfg["tau"]))
    kappa = float(np.sqrt(cfg["kappa2"]))
    s_grid = np.linspace(0.02, 0.1, 5)
    branch = bifurcation.solve_branch(s_grid, kappa, shape, N=cfg["N"],
                                      K_lev=cfg["K_lev"])
    rep = bifurcation.fit_expansion(branch, kappa, shape)
    rel = rep.g_lambda_prime0_err / rep.g_lambda_prime0_target
    return [_verdict("d(lambda)/d(s^2) vs ((kappa^2-1/2) beta + 1/2)", rel, 1e-3),
            _verdict("curl a1 pointwise vs (1-|psi0|^2)/2", rep.curl_a1_sup_err, 1e-4)]


def cmd_verify(args) -> int:
    defaults = {"suite": None, "kappa2": 2.0, "tau": "square", "N": 96,
                "K_lev": 40, "N_fd": 64, "trials": 5, "seed": 0,
                "outdir": None, "output": None}
    cfg = merged_config(args, defaults)
    suites = {"spectrum": verify_spectrum, "gauge": verify_gauge,
              "symmetry": verify_symmetry, "asymptotics": verify_asymptotics}
    if cfg["suite"] not in suites:
        raise ConfigError(f"unknown suite {cfg['suite']!r}; pick from {sorted(suites)}")
    print(f"verify {cfg['suite']}:")
    checks = suites[cfg["suite"]](cfg)
    payload = {"suite": cfg["suite"], "checks": checks,
               "all_pass": all(c["pass"] for c in checks)}
    path = out_path(cfg, cfg["output"] or f"verify_{cfg['suite']}.json")
    write_json(path, cfg, payload)
    print(f"wrote {path}")
    return 0


# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vortexlattice",
                                 description="Vortex-lattice solutions of the "
                                 "2-D Ginzburg-Landau equations")
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override")
        p.add_argument("--outdir", help="output directory "
                       "(default $VORTEXLATTICE_OUT or '.')")

    p = sub.add_parser("beta", help="beta(tau) scan")
    add_common(p)
    p.add_argument("--tau-grid", dest="tau_grid")
    p.add_argument("--method", choices=["lattice_sum", "quadrature"])
    p.add_argument("--N", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_beta)

    p = sub.add_parser("critical-points", help="critical points of beta")
    add_common(p)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_critical_points)

    p = sub.add_parser("branch", help="bifurcation branch and expansion report")
    add_common(p)
    p.add_argument("--kappa2", type=float)
    p.add_argument("--tau")
    p.add_argument("--s-max", dest="s_max", type=float)
    p.add_argument("--s-points", dest="s_points", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--K-lev", dest="K_lev", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--prefix")
    p.set_defaults(func=cmd_branch)

    p = sub.add_parser("field-landscape", help="E_b(tau) asymptotic and numeric")
    add_common(p)
    p.add_argument("--kappa2", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--tau-grid", dest="tau_grid")
    p.add_argument("--numeric", action="store_const", const=True)
    p.add_argument("--N", type=int)
    p.add_argument("--K-lev", dest="K_lev", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_field_landscape)

    p = sub.add_parser("gauge-fix", help="fix the gauge of a raw state snapshot")
    add_common(p)
    p.add_argument("--input")
    p.add_argument("--kappa2", type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_gauge_fix)

    p = sub.add_parser("verify", help="run an invariant suite")
    add_common(p)
    p.add_argument("suite", nargs="?")
    p.add_argument("--kappa2", type=float)
    p.add_argument("--tau")
    p.add_argument("--N", type=int)
    p.add_argument("--K-lev", dest="K_lev", type=int)
    p.add_argument("--N-fd", dest="N_fd", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver failure: flush a marker and signal 3
        marker = {"status": "failed", "command": args.command, "error": str(exc)}
        root = getattr(args, "outdir", None) or os.environ.get("VORTEXLATTICE_OUT", ".")
        try:
            os.makedirs(root, exist_ok=True)
            with open(os.path.join(root, "FAILED.json"), "w") as fh:
                json.dump(marker, fh, indent=2)
        except OSError:
            pass
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
