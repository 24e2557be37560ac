"""Command-line front door: subcommands, run manifests, CSV emission.

Every run writes its outputs plus a JSON manifest (params, grid, seeds,
code version, params hash, flags).  CSV outputs are deterministic: reruns
with identical manifest inputs are byte-identical; timestamps live only in
the manifest.  Exit codes: 0 success, 1 physics-check failure (verify),
2 usage/configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, asdict
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import (
    QuadratureSpec,
    effective_potential_check,
    falsifiability_scan,
    gamma_at_separation,
    short_distance_rate,
)
from .config import ConfigError, ExperimentConfig, load_config, params_hash
from .dynamics import (
    EvolutionConfig,
    FreeHamiltonian,
    ensemble_vs_master_check,
    run_ensemble,
    run_trajectory,
)
from .quadrature import QuadratureError
from .state import make_gaussian_packet, load_state, save_state
from .units import (
    LAMBDA_GRW_SI,
    derive_r_G,
    si_preset,
)

ENV_OUT_DIR = "GRWFLASH_OUT_DIR"


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written alongside every output file."""

    subcommand: str
    flags: dict
    params: dict
    grid: dict
    master_seed: int | None
    n_traj: int | None
    code_version: str
    params_hash: str
    defaults_applied: dict
    outputs: list
    created_utc: str

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _manifest(config: ExperimentConfig, subcommand, flags, outputs,
              master_seed=None, n_traj=None) -> RunManifest:
    p = config.params
    return RunManifest(
        subcommand=subcommand,
        flags={k: v for k, v in flags.items() if v is not None},
        params={
            "lambda": p.lam,
            "r_C": p.r_C,
            "G": p.G,
            "hbar": p.hbar,
            "masses": list(p.masses),
            "smearing": p.smearing.kind,
            "smearing_width": p.smearing.width,
        },
        grid={
            "dim": config.grid.dim,
            "n_points": config.grid.n_points,
            "spacing": config.grid.spacing,
            "origin": list(config.grid.origin),
        },
        master_seed=master_seed,
        n_traj=n_traj,
        code_version=__version__,
        params_hash=params_hash(p, config.grid),
        defaults_applied=config.defaults_applied,
        outputs=[os.path.basename(str(o)) for o in outputs],
        created_utc=datetime.now(timezone.utc).isoformat(),
    )


def _csv_header(fh, config: ExperimentConfig, master_seed=None) -> None:
    line = f"# params_hash={params_hash(config.params, config.grid)}"
    if master_seed is not None:
        line += f" master_seed={master_seed}"
    fh.write(line + "\n")


def _initial_state(config: ExperimentConfig, section: dict):
    if section.get("state_file"):
        return load_state(section["state_file"])
    grid = config.grid
    n = config.params.n_particles
    centers = np.asarray(section["packet_center"], dtype=float)
    if centers.size == n:  # scalar center per particle in 1D
        centers = centers.reshape(n, 1) * np.ones((n, grid.dim))
    centers = centers.reshape(n, grid.dim)
    widths = np.asarray(section["packet_width"], dtype=float)
    if widths.size == 1:
        widths = np.repeat(widths, n)
    momenta = section.get("packet_momentum")
    if momenta is not None:
        momenta = np.asarray(momenta, dtype=float).reshape(n, grid.dim)
    return make_gaussian_packet(grid, n, centers, widths, momenta)


def _evolution_config(section: dict, config: ExperimentConfig) -> EvolutionConfig:
    ham_kind = section.get("hamiltonian", "none")
    if ham_kind == "none":
        ham = FreeHamiltonian.none()
    elif ham_kind == "kinetic":
        ham = FreeHamiltonian.kinetic(config.params.masses, config.params.hbar)
    else:
        raise ConfigError(f"unknown hamiltonian {ham_kind!r}")
    return EvolutionConfig(
        total_time=section["total_time"],
        free_hamiltonian=ham,
        dt_free=section.get("dt_free", 0.05),
        snapshot_times=tuple(section.get("snapshot_times") or ()),
        softening=section.get("softening"),
    )


def _write_flash_csv(path, config, master_seed, flashes, dim) -> None:
    cols = ["time", "particle"] + ["x", "y", "z"][:dim]
    with open(path, "w") as fh:
        _csv_header(fh, config, master_seed)
        fh.write(",".join(cols) + "\n")
        for f in flashes:
            cells = [repr(f.time), str(f.particle)] + [repr(c) for c in f.position]
            fh.write(",".join(cells) + "\n")


def _cmd_trajectory(config, args, out_dir):
    sec = dict(config.section("trajectory"))
    if args.seed is not None:
        sec["seed"] = args.seed
    psi0 = _initial_state(config, sec)
    evo = _evolution_config(sec, config)
    traj = run_trajectory(psi0, config.params, evo, sec["seed"], sec["master_seed"])
    flash_path = os.path.join(out_dir, "flashes.csv")
    state_path = os.path.join(out_dir, "final_state.grws")
    _write_flash_csv(flash_path, config, sec["master_seed"], traj.flashes,
                     config.grid.dim)
    save_state(traj.final_state, state_path)
    manifest = _manifest(config, "trajectory", vars(args),
                         [flash_path, state_path],
                         master_seed=sec["master_seed"], n_traj=1)
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(f"trajectory seed={sec['seed']}: {len(traj.flashes)} flashes, "
          f"outputs in {out_dir}")
    return 0


def _cmd_ensemble(config, args, out_dir):
    sec = dict(config.section("ensemble"))
    if args.seed is not None:
        sec["master_seed"] = args.seed
    if args.n_traj is not None:
        sec["n_traj"] = args.n_traj
    psi0 = _initial_state(config, sec)
    evo = _evolution_config(sec, config)
    result = run_ensemble(
        psi0, config.params, evo, sec["n_traj"], sec["master_seed"],
        workers=args.threads, batch_size=sec["batch_size"],
    )
    rho_path = os.path.join(out_dir, "density_matrix.csv")
    with open(rho_path, "w") as fh:
        _csv_header(fh, config, sec["master_seed"])
        fh.write("i,j,re,im,std_error\n")
        ent = result.rho.entries
        se = result.entry_se
        for i in range(ent.shape[0]):
            for j in range(ent.shape[1]):
                fh.write(f"{i},{j},{ent[i, j].real!r},{ent[i, j].imag!r},"
                         f"{se[i, j]!r}\n")
    stats_path = os.path.join(out_dir, "ensemble_report.json")
    counts = result.flash_counts
    with open(stats_path, "w") as fh:
        json.dump({
            "n_traj": result.n_traj,
            "flash_count_mean": float(counts.mean()),
            "flash_count_var": float(counts.var(ddof=1)),
            "expected_mean": config.params.lam * config.params.n_particles
                             * evo.total_time,
            "max_entry_se": float(result.entry_se.max()),
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = _manifest(config, "ensemble", vars(args), [rho_path, stats_path],
                         master_seed=sec["master_seed"], n_traj=sec["n_traj"])
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(f"ensemble n={sec['n_traj']}: mean flash count {counts.mean():.3f}, "
          f"outputs in {out_dir}")
    return 0


def _cmd_verify(config, args, out_dir):
    sec = dict(config.section("verify"))
    if args.seed is not None:
        sec["master_seed"] = args.seed
    if args.n_traj is not None:
        sec["n_traj"] = args.n_traj
    if args.tolerance is not None:
        sec["se_limit"] = args.tolerance
    psi0 = _initial_state(config, sec)
    evo = EvolutionConfig(total_time=sec["total_time"],
                          softening=sec.get("softening"))
    report, result, _oracle = ensemble_vs_master_check(
        psi0, config.params, evo, sec["n_traj"], sec["master_seed"],
        se_limit=sec["se_limit"], workers=args.threads,
    )
    report_path = os.path.join(out_dir, "verify_report.json")
    with open(report_path, "w") as fh:
        json.dump({
            "trace_distance": report.trace_dist,
            "std_error": report.std_error,
            "three_sigma_bound": 3 * report.std_error,
            "se_limit": report.se_limit,
            "n_traj": report.n_traj,
            "passed": report.passed,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = _manifest(config, "verify", vars(args), [report_path],
                         master_seed=sec["master_seed"], n_traj=sec["n_traj"])
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(report.summary())
    return 0 if report.passed else 1


def _cmd_kernel(config, args, out_dir):
    sec = config.section("kernel")
    rel_tol = args.tolerance if args.tolerance is not None else sec["rel_tol"]
    spec = QuadratureSpec(rel_tol=rel_tol, abs_tol=sec["abs_tol"])
    path = os.path.join(out_dir, "kernel.csv")
    with open(path, "w") as fh:
        _csv_header(fh, config)
        fh.write("separation,re,im,error\n")
        for s in sec["separations"]:
            pt = gamma_at_separation(s, config.params, spec)
            fh.write(f"{s!r},{pt.value.real!r},{pt.value.imag!r},{pt.error!r}\n")
    manifest = _manifest(config, "kernel", vars(args), [path])
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(f"kernel table for {len(sec['separations'])} separations in {out_dir}")
    return 0


def _cmd_slope(config, args, out_dir):
    sec = config.section("slope")
    tol = args.tolerance if args.tolerance is not None else sec["tolerance"]
    fit = short_distance_rate(config.params, sec["separations"], tolerance=tol)
    path = os.path.join(out_dir, "slope.csv")
    with open(path, "w") as fh:
        _csv_header(fh, config)
        fh.write("separation,excess_rate,error\n")
        for s, v, e in zip(fit.separations, fit.excess, fit.errors):
            fh.write(f"{s!r},{v!r},{e!r}\n")
    report_path = os.path.join(out_dir, "slope_report.json")
    with open(report_path, "w") as fh:
        json.dump({
            "slope": fit.slope,
            "intercept": fit.intercept,
            "expected_slope": fit.expected_slope,
            "rel_deviation": fit.rel_deviation,
            "r_squared": fit.r_squared,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = _manifest(config, "slope", vars(args), [path, report_path])
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(f"slope {fit.slope:.6g} vs expected {fit.expected_slope:.6g} "
          f"({100 * fit.rel_deviation:.2f}% off, R^2={fit.r_squared:.6f})")
    return 0


def _cmd_potential(config, args, out_dir):
    sec = config.section("potential")
    rows = effective_potential_check(sec["d_values"], config.params)
    path = os.path.join(out_dir, "potential.csv")
    with open(path, "w") as fh:
        _csv_header(fh, config)
        fh.write("d,quadrature,closed_form,rel_error,newton_deviation\n")
        for r in rows:
            fh.write(f"{r.d!r},{r.quadrature!r},{r.closed_form!r},"
                     f"{r.rel_error!r},{r.newton_deviation!r}\n")
    manifest = _manifest(config, "potential", vars(args), [path])
    manifest.write(os.path.join(out_dir, "manifest.json"))
    onset = [r.d for r in rows if r.newton_deviation > 0.01]
    print(f"potential table in {out_dir}; >1% Newton deviation at d = {onset}")
    return 0


def _cmd_scan(config, args, out_dir):
    sec = config.section("scan")
    tol = args.tolerance if args.tolerance is not None else sec["tolerance"]
    result = falsifiability_scan(
        sec["separation"], config.params.r_C, sec["lambda_grid"],
        config.params, tolerance=tol,
    )
    path = os.path.join(out_dir, "scan.csv")
    with open(path, "w") as fh:
        _csv_header(fh, config)
        fh.write("lambda,total_rate,intrinsic,excess,excess_error\n")
        for row in zip(result.lambda_grid, result.rates, result.intrinsic,
                       result.excess, result.excess_errors):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    manifest = _manifest(config, "scan", vars(args), [path])
    manifest.write(os.path.join(out_dir, "manifest.json"))
    print(f"falsifiability scan over {len(result.lambda_grid)} rates in {out_dir}")
    return 0


def _cmd_presets(config, args, out_dir):
    print("CODATA SI presets (lambda = 1e-16 1/s, r_C = 1e-7 m):")
    for name in ("proton", "electron"):
        p = si_preset(name, LAMBDA_GRW_SI)
        r_g = derive_r_G(p, 0, 0)
        print(f"  {name:<9} m = {p.masses[0]:.10e} kg   "
              f"r_G = {r_g:.4e} m   eps = {r_g / p.r_C:.4e}")
    return 0


_COMMANDS = {
    "trajectory": _cmd_trajectory,
    "ensemble": _cmd_ensemble,
    "verify": _cmd_verify,
    "kernel": _cmd_kernel,
    "slope": _cmd_slope,
    "potential": _cmd_potential,
    "scan": _cmd_scan,
    "presets": _cmd_presets,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grwflash",
        description="Stochastic and exact solvers for the GRW model with "
                    "gravitating flashes.",
    )
    parser.add_argument("--config", help="experiment config file")
    parser.add_argument("--seed", type=int, help="override the (master) seed")
    parser.add_argument("--n-traj", type=int, dest="n_traj",
                        help="override the trajectory count")
    parser.add_argument("--out-dir", dest="out_dir",
                        help=f"output directory (default ${ENV_OUT_DIR} or cwd)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for ensembles (0 = auto)")
    parser.add_argument("--tolerance", type=float,
                        help="override the subcommand tolerance")
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    return parser


def run_subcommand(config: ExperimentConfig, args) -> int:
    out_dir = args.out_dir or os.environ.get(ENV_OUT_DIR) or os.getcwd()
    os.makedirs(out_dir, exist_ok=True)
    return _COMMANDS[args.subcommand](config, args, out_dir)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            config = load_config(args.config)
        else:
            if args.subcommand != "presets":
                print("error: --config is required for this subcommand",
                      file=sys.stderr)
                return 2
            config = None
        return run_subcommand(config, args) if config is not None else \
            _cmd_presets(None, args, None)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except QuadratureError as exc:
        print(f"error: quadrature did not converge: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
