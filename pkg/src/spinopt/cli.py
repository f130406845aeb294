"""Command-line pipeline: field map -> optimal subset -> hologram -> validation.

Every command reads one YAML configuration (flags override single entries),
writes plain CSV/text/PNG outputs into the output directory, and is
idempotent: rerunning with unchanged inputs rewrites identical files.
Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import ensemble as ens
from . import fields, holography, photophysics, protocols, shotnoise
from .config import RunConfig, load_config
from .errors import SpinoptError


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_or_compute_field(cfg: RunConfig) -> fields.ScalarField2D:
    if cfg.import_path:
        return fields.import_field_map(cfg.import_path)
    return fields.biot_savart_rabi_map(
        cfg.antenna(), cfg.grid(), cfg.frame(), n_segments=cfg.n_segments
    )


def cmd_fieldmap(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    field = _load_or_compute_field(cfg)
    fields.export_field_map(field, out / "omega_map.csv")
    omega0 = field.center_value
    deviation = fields.normalized_deviation(field, omega0)
    fields.export_field_map(deviation, out / "omega_deviation.csv")
    lines = ["target_uniformity,n_pixels,achieved_uniformity"]
    for target in cfg.uniformity_targets:
        mask = fields.uniformity_region(field, omega0, target, cfg.uniformity_shape)
        achieved = fields.region_uniformity(field, mask, omega0)
        lines.append(f"{target},{int(mask.sum())},{achieved:.6f}")
    (out / "uniformity_regions.csv").write_text("\n".join(lines) + "\n")
    print(f"fieldmap: wrote {field.grid.nx}x{field.grid.ny} map to {out}")
    return 0


def _sensitivity_and_subset(cfg: RunConfig, field):
    eta_map = protocols.sensitivity_map(
        field, cfg.protocol, cfg.protocol_params()
    )
    subset, curve = ens.optimal_subset(eta_map)
    return eta_map, subset, curve


def cmd_optimize(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    field = _load_or_compute_field(cfg)
    proto = cfg.protocol
    eta_map, subset, curve = _sensitivity_and_subset(cfg, field)
    fields.export_field_map(eta_map, out / f"sensitivity_map_{proto}.csv")
    mask_field = fields.ScalarField2D(
        field.grid, subset.mask.astype(float), unit="bool"
    )
    fields.export_field_map(mask_field, out / f"subset_mask_{proto}.csv")

    with open(out / f"ensemble_curve_{proto}.csv", "w") as fh:
        fh.write("n,eta_ens\n")
        step = max(1, curve.curve.size // 5000)
        rows = sorted(set(range(0, curve.curve.size, step)) | {curve.n_star - 1})
        for i in rows:
            fh.write(f"{i + 1},{curve.curve[i]:.10g}\n")

    omega0 = field.center_value
    eta_center = eta_map.values[eta_map.grid.center_index]
    eta_min = float(np.min(curve.eta_sorted))
    report = [
        f"protocol: {proto}",
        f"n_sensors_total: {eta_map.values.size}",
        f"n_star: {curve.n_star}",
        f"eta_ens_optimal: {curve.eta_ens_optimal:.10g}",
        f"eta_threshold: {curve.eta_threshold:.10g}",
        f"eta_center: {eta_center:.10g}",
        f"threshold_over_center: {curve.eta_threshold / eta_center:.6f}",
        f"threshold_over_min: {curve.eta_threshold / eta_min:.6f}",
        f"db_convention: {cfg.db_convention}",
        "",
        "uniformity_baseline,gain_db,n_pixels",
    ]
    for target in cfg.uniformity_targets:
        mask = fields.uniformity_region(field, omega0, target, cfg.uniformity_shape)
        gain = ens.metrology_gain(eta_map, mask, subset.mask, cfg.db_convention)
        report.append(f"{target},{gain:.4f},{int(mask.sum())}")
    (out / f"gains_{proto}.txt").write_text("\n".join(report) + "\n")
    print(
        f"optimize[{proto}]: N*={curve.n_star}, "
        f"eta_th/eta_center={curve.eta_threshold / eta_center:.3f}"
    )
    return 0


def cmd_hologram(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    mask_path = out / f"subset_mask_{cfg.protocol}.csv"
    if mask_path.exists():
        subset_mask = fields.import_field_map(mask_path).values > 0.5
    else:
        field = _load_or_compute_field(cfg)
        _, subset, _ = _sensitivity_and_subset(cfg, field)
        subset_mask = subset.mask
    hcfg = cfg.holography_config()
    plan, log = holography.hologram_for_subset(subset_mask, hcfg)

    n = hcfg.grid_size
    holo_grid = fields.GridSpec(float(n), float(n), n, n)
    fields.export_field_map(
        fields.ScalarField2D(holo_grid, plan.phase, unit="rad"),
        out / "phase_map.csv",
    )
    gray = np.round(plan.phase / (2 * np.pi) * 255).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(out / "phase_map.png")
    intensity = plan.image_intensity()
    fields.export_field_map(
        fields.ScalarField2D(holo_grid, intensity, unit="intensity"),
        out / "intensity_sim.csv",
    )
    with open(out / "iteration_log.csv", "w") as fh:
        fh.write("iter,nonuniformity,efficiency\n")
        for i, (nu, eff) in enumerate(zip(log.nonuniformity, log.efficiency)):
            fh.write(f"{i},{nu:.8g},{eff:.8g}\n")

    aberration = holography.polynomial_phase_screen(
        n, seed=cfg.seed, amplitude_rad=cfg.aberration_amplitude
    )
    refined, fb_log = holography.camera_feedback(plan, aberration, hcfg)
    with open(out / "feedback_log.csv", "w") as fh:
        fh.write("iter,nonuniformity,efficiency\n")
        for i, (nu, eff) in enumerate(zip(fb_log.nonuniformity, fb_log.efficiency)):
            fh.write(f"{i},{nu:.8g},{eff:.8g}\n")
    final_nu = holography.nonuniformity(
        refined.image_intensity(extra_phase=aberration), refined.signal_mask
    )
    print(
        f"hologram: synthesis non-uniformity {log.nonuniformity[-1]:.4f}, "
        f"after feedback {final_nu:.4f}"
    )
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    out = _out_dir(cfg)
    mc = cfg.mc
    params = cfg.ramsey_params()
    lam0 = float(mc["lambda0"])
    # scale photon number so every channel has lambda(0) ~ lambda0
    params_mc = protocols.RamseyParams(
        gamma_e=params.gamma_e,
        t2_star=params.t2_star,
        p=params.p,
        tau=params.tau,
        contrast=params.contrast,
        n_avg=lam0,
    )
    step = shotnoise.default_fd_step(params_mc)
    rng = np.random.default_rng(cfg.seed)
    rows = ["label,shots,mean,std,se,fisher_pred,eq3_pred,ratio"]
    worst = 0.0
    for k in range(int(mc["n_ensembles"])):
        n_sensors = int(rng.integers(2, int(mc["max_sensors"]) + 1))
        eps = rng.uniform(-0.4 * np.pi, 0.4 * np.pi, n_sensors)
        channels = [shotnoise.ramsey_channel(e, params_mc) for e in eps]
        config = shotnoise.MCConfig(
            shots=int(mc["shots"]), seed=cfg.seed + 1000 + k, fd_step=step
        )
        stats = shotnoise.simulate_estimator(channels, config)
        etas = np.array(
            [np.sqrt(lam0 * params_mc.tau) / abs(shotnoise._slope(c, 0.0, step)) for c in channels]
        )
        eta_ens = np.sqrt(n_sensors) / np.sum(1.0 / etas)
        eq3_pred = eta_ens / np.sqrt(params_mc.tau)  # per-shot spread
        ratio = stats.std / stats.fisher_pred
        worst = max(worst, abs(ratio - 1.0))
        rows.append(
            f"ens{k},{stats.shots},{stats.mean:.6g},{stats.std:.6g},"
            f"{stats.se:.6g},{stats.fisher_pred:.6g},{eq3_pred:.6g},{ratio:.4f}"
        )
    (out / "mc_report.csv").write_text("\n".join(rows) + "\n")

    pen = cfg.penalty
    intensity = photophysics.gaussian_intensity_field(
        int(pen["n_pixels"]), pen["nonuniformity"], pen["mean_intensity"], seed=cfg.seed
    )
    report = photophysics.illumination_penalty(
        intensity,
        pen["mean_intensity"],
        cfg.rate_params(),
        cfg.ramsey_params(),
        i_sat=pen["i_sat"],
        window=photophysics.ReadoutWindow(pen["t_readout_us"], 0.001),
    )
    (out / "penalty_report.txt").write_text(
        "illumination penalty report\n"
        f"nonuniformity: {report.nonuniformity:.4f}\n"
        f"n_pixels: {report.n_pixels}\n"
        f"n_excluded: {report.n_excluded}\n"
        f"loss_db: {report.loss_db:.4f}\n"
    )
    summary = (
        f"MC worst |std/fisher_pred - 1| over {mc['n_ensembles']} ensembles: {worst:.4f}\n"
        f"illumination penalty: {report.loss_db:.4f} dB at "
        f"{report.nonuniformity:.1%} non-uniformity\n"
    )
    (out / "summary.txt").write_text(summary)
    print(summary.strip())
    return 0


COMMANDS = {
    "fieldmap": cmd_fieldmap,
    "optimize": cmd_optimize,
    "hologram": cmd_hologram,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinopt",
        description="Optimal spin subsets for ensemble magnetometry",
    )
    parser.add_argument("command", choices=[*COMMANDS, "run-all"])
    parser.add_argument("--config", type=str, default=None, help="YAML config file")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="top-level RNG seed")
    parser.add_argument(
        "--protocol", choices=["ramsey", "echo", "cw"], default=None
    )
    parser.add_argument(
        "--import", dest="import_path", type=str, default=None,
        help="import an externally computed field map (CSV grid format)",
    )
    parser.add_argument(
        "--db-convention", choices=["20log10", "10log10"], default=None
    )
    return parser


def _overrides_from_args(args) -> dict:
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.protocol is not None:
        overrides["protocol"] = args.protocol
    if args.db_convention is not None:
        overrides["db_convention"] = args.db_convention
    if args.import_path is not None:
        overrides["field"] = {"import_path": args.import_path}
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides_from_args(args))
    except (SpinoptError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "run-all":
            for name in ("fieldmap", "optimize", "hologram", "validate"):
                code = COMMANDS[name](cfg)
                if code:
                    return code
            return 0
        return COMMANDS[args.command](cfg)
    except (SpinoptError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - unexpected runtime failures
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
