"""Command line front end: ``angcasimir <command> --config run.toml --out DIR``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import calibration as cal
from .constants import HBAR_EV_S
from .corrugation import MODELS, force_curve
from .electrostatics import LaplaceGrid, oracle_table, write_oracle_csv
from .errors import CasimirError, ConfigError
from .lifshitz import Environment
from .materials import IDEAL_METAL, epsilon_imag

log = logging.getLogger("angcasimir")

EXIT_USAGE = 2
EXIT_FAILURE = 3

MODEL_TAGS = {"pfa": "pfa", "derivative-expansion": "der"}


def _fmt(v):
    return f"{v:.10g}"


def _theta_tag(theta_deg):
    return f"theta{theta_deg:g}deg"


def _thetas(block):
    thetas = block["theta_deg"]
    if not isinstance(thetas, list):
        thetas = [thetas]
    if not thetas:
        raise ConfigError("theta_deg list is empty")
    return [float(t) for t in thetas]


def _z_grid(block):
    lo, hi, step = float(block["z_min_nm"]), float(block["z_max_nm"]), float(block["z_step_nm"])
    if not (lo > 0 and hi >= lo and step > 0):
        raise ConfigError("need 0 < z_min_nm <= z_max_nm and z_step_nm > 0")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def cmd_force_curve(cfg, out, args):
    cfg.require("force-curve")
    block = cfg.section("force_curve")
    thetas = _thetas(block)
    model = block["model"]
    models = MODELS if model == "both" else (model,)
    if any(m not in MODELS for m in models):
        raise ConfigError(f"unknown model {model!r}")
    z = _z_grid(block)
    material, env, spec, alpha = cfg.material(), cfg.environment(), cfg.quadrature(), cfg.alpha()
    written = []
    for th in thetas:
        geom = cfg.geometry(th)
        for m in models:
            curve = force_curve(z, [geom.theta_rad], geom, material, env, alpha, spec, m,
                                roughness=bool(block["roughness"]))[0]
            path = out / f"force_{_theta_tag(th)}_{MODEL_TAGS[m]}.csv"
            curve.to_csv(path)
            written.append(path)
    return written


def cmd_diff_pfa(cfg, out, args):
    cfg.require("diff-pfa")
    block = cfg.section("diff_pfa")
    thetas = _thetas(block)
    z = _z_grid(block)
    material, env, spec, alpha = cfg.material(), cfg.environment(), cfg.quadrature(), cfg.alpha()
    rough = bool(block["roughness"])
    written = []

    def diff(mat, geom, e):
        kw = dict(roughness=rough)
        der = force_curve(z, [geom.theta_rad], geom, mat, e, alpha, spec, "derivative-expansion", **kw)[0]
        pfa = force_curve(z, [geom.theta_rad], geom, mat, e, alpha, spec, "pfa", **kw)[0]
        return der.F_pN, pfa.F_pN

    for th in thetas:
        geom = cfg.geometry(th)
        der, pfa = diff(material, geom, env)
        cols = [z, der - pfa]
        header = ["z_nm", "dF_pN"]
        if block["ideal_metal"]:
            di, pi_ = diff(IDEAL_METAL, geom, env)
            cols.append(di - pi_)
            header.append("dF_ideal_pN")
        cols += [der, pfa]
        header += ["F_der_pN", "F_pfa_pN"]
        path = out / f"diff_pfa_{_theta_tag(th)}.csv"
        _write_rows(path, header, zip(*cols))
        written.append(path)
    if block["temperature_contrast"]:
        geom = cfg.geometry(thetas[0])
        hot = force_curve(z, [geom.theta_rad], geom, material, env, alpha, spec,
                          roughness=rough)[0].F_pN
        cold = force_curve(z, [geom.theta_rad], geom, material, Environment.zero(), alpha, spec,
                           roughness=rough)[0].F_pN
        path = out / f"temperature_contrast_{_theta_tag(thetas[0])}.csv"
        _write_rows(path, ["z_nm", f"F_der_{env.temperature:g}K_pN", "F_der_0K_pN", "ratio"],
                    zip(z, hot, cold, hot / cold))
        written.append(path)
    return written


def cmd_calibrate(cfg, out, args):
    cfg.require("calibrate")
    block = cfg.section("calibrate")
    th = _thetas(block)
    if len(th) != 1:
        raise ConfigError("calibrate takes a single theta_deg")
    geom = cfg.geometry(th[0])
    written = []
    if block["dataset"] is not None:
        ds = cal.DeflectionDataset.from_csv(cfg.path(block["dataset"]), m=float(block["m_nm_per_mV"]))
        casimir = None
    else:
        for key in ("V0_mV", "z0_nm", "kprime_pN_per_mV", "voltages_mV"):
            if block[key] is None:
                raise ConfigError(f"simulated calibration needs [calibrate] {key}")
        truth = cal.CalibrationTruth(float(block["V0_mV"]), float(block["z0_nm"]),
                                     float(block["kprime_pN_per_mV"]), float(block["m_nm_per_mV"]))
        casimir = None
        if block["casimir"]:
            casimir = cal.casimir_force_model(geom, cfg.material(), cfg.environment(),
                                              cfg.alpha(), cfg.quadrature())
        zp = cal.default_piezo_grid(truth, float(block["z_max_nm"]), float(block["z_piezo_step_nm"]))
        ds = cal.simulate_repetitions(
            truth, geom, casimir, int(block["repetitions"]), seed=args.seed,
            voltages=[float(v) for v in block["voltages_mV"]], z_piezo=zp,
            noise=float(block["noise_pN"]) / truth.kprime,
            drift=float(block["drift_mV_per_s"]))
        path = out / "dataset.csv"
        ds.to_csv(path)
        written.append(path)
    span = float(block["fit_span_nm"])
    if float(block["drift_mV_per_s"]) != 0:
        ds, result = cal.calibrate_with_drift(ds, geom, casimir, fit_span_nm=span)
    else:
        result = cal.calibrate(ds, geom, fit_span_nm=span)
    path = out / "calibration_report.toml"
    path.write_text(result.report())
    written.append(path)
    pf = cal.fit_parabolas(ds)
    path = out / "parabolas.csv"
    _write_rows(path, ["z_minus_z0_nm", "vertex_mV", "vertex_err_mV", "curvature_signal_per_mV2"],
                zip(pf.z_rel, pf.vertex, pf.vertex_err, pf.curvature))
    written.append(path)
    curve = cal.extract_casimir(ds, result, geom, (float(block["extract_z_min_nm"]),
                                                  float(block["extract_z_max_nm"])))
    path = out / "casimir_extracted.csv"
    curve.to_csv(path)
    written.append(path)
    return written


def cmd_oracle(cfg, out, args):
    cfg.require("oracle")
    block = cfg.section("oracle")
    geom = cfg.geometry(0.0)
    zs = block["z_nm"] if isinstance(block["z_nm"], list) else [block["z_nm"]]
    grid = LaplaceGrid(int(block["nx"]), int(block["neta"]))
    rows = oracle_table([float(z) for z in zs], geom, grid)
    path = out / "oracle.csv"
    write_oracle_csv(rows, path)
    return [path]


def cmd_material_eval(cfg, out, args):
    cfg.require("material-eval")
    block = cfg.section("material_eval")
    material = cfg.material()
    lo, hi, n = float(block["zeta_min_eV"]), float(block["zeta_max_eV"]), int(block["points"])
    if not (0 < lo < hi and n >= 2):
        raise ConfigError("need 0 < zeta_min_eV < zeta_max_eV and points >= 2")
    e_ev = np.geomspace(lo, hi, n)
    zeta = e_ev / HBAR_EV_S
    eps = np.atleast_1d(epsilon_imag(material, zeta))
    path = out / "epsilon.csv"
    _write_rows(path, ["hbar_zeta_eV", "zeta_rad_per_s", "epsilon"], zip(e_ev, zeta, eps))
    return [path]


COMMANDS = {
    "force-curve": cmd_force_curve,
    "diff-pfa": cmd_diff_pfa,
    "calibrate": cmd_calibrate,
    "oracle": cmd_oracle,
    "material-eval": cmd_material_eval,
}


def build_parser():
    p = argparse.ArgumentParser(prog="angcasimir", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="random seed (u64)")
    p.add_argument("--threads", type=int, default=1,
                   help="accepted for compatibility; results do not depend on it")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 0 <= args.seed < 2 ** 64:
        parser.error("--seed must be an unsigned 64-bit integer")
    if args.threads < 1:
        parser.error("--threads must be positive")
    from .config import RunConfig
    out = Path(args.out)
    try:
        cfg = RunConfig.load(args.config)
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", UserWarning)
            written = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"angcasimir {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CasimirError as exc:
        print(f"angcasimir {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
