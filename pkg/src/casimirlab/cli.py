"""Command-line workbench driver.

Commands: permittivity, force, roughness, calibrate, errors, compare,
reproduce.  Exit codes: 0 success, 1 validation problem, 2 numerical
failure.  Output tables are plain text with '#' headers so they can be
read back with numpy.loadtxt.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import __version__
from .compare import compare, rough_corrected_curve, smooth_force_interpolator, theory_band
from .configfile import load_config, save_spectrum_file
from .electrocal import (
    CalibrationTruth, SweepSpec, calibrate, extract_casimir, save_dataset,
    synthesize_dataset,
)
from .errors import NumericalError, ValidationError
from .lifshitz import LayerStack, SphereGeometry, ThermalConfig, force_curve
from .materials import (
    gold_drude, gold_plasma, ito_model, ito_synthetic_spectrum,
    ito_tabulated_model, quartz_substrate,
)
from .paperdata import (
    FILM_THICKNESS_NM, load_paper_table, sample_metadata, applied_voltages,
    uv_reduction_fractions,
)
from .roughness import gold_sphere_roughness, ito_plate_roughness
from .spectra import eval_eps_imaginary_axis
from .stats import (
    build_error_budget, calibrate_systematic_floor, electric_force_systematic,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{message}\n\n{self.format_usage()}")


def _write_table(path, header: str, rows, fmt: str) -> None:
    lines = [f"# {header}"]
    lines += [fmt % tuple(row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        print(f"wrote {path}")


def _preset_stack(sample: str, carriers: str, tail: str | None = None,
                  gold: str = "drude") -> LayerStack:
    sphere = gold_drude() if gold == "drude" else gold_plasma()
    if tail:
        film = ito_tabulated_model(sample, tail, carriers)
    else:
        film = ito_model(sample, carriers)
    return LayerStack(sphere, film, FILM_THICKNESS_NM, quartz_substrate())


def _stack_from_args(args) -> tuple[LayerStack, SphereGeometry, ThermalConfig]:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        if cfg.stack is None:
            raise ValidationError("config file has no layer stack")
        return cfg.stack, cfg.geometry, cfg.thermal
    stack = _preset_stack(args.sample, args.carriers, getattr(args, "tail", None))
    return stack, SphereGeometry(), ThermalConfig()


def _out_path(args, name: str):
    if args.out is None:
        return None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir / name


def cmd_permittivity(args) -> int:
    stack, _, _ = _stack_from_args(args)
    model = {"sphere": stack.sphere, "film": stack.film,
             "substrate": stack.substrate}[args.layer]
    xi = np.geomspace(args.xi_from, args.xi_to, args.points)
    eps = np.array([float(eval_eps_imaginary_axis(model, float(x))) for x in xi])
    _write_table(_out_path(args, f"permittivity_{args.layer}.txt"),
                 "xi_eV, eps", zip(xi, eps), "%.8e %.8e")
    return 0


def cmd_force(args) -> int:
    stack, geom, cfg = _stack_from_args(args)
    seps = np.arange(args.a_from, args.a_to + 0.5 * args.step, args.step)
    if args.rough:
        forces = rough_corrected_curve(stack, geom, cfg, ito_plate_roughness(),
                                       gold_sphere_roughness(), seps)
    else:
        forces = force_curve(stack, geom, cfg, seps).force_pn
    _write_table(_out_path(args, "force.txt"),
                 "a_nm, F_pN (attractive force magnitude)",
                 zip(seps, np.abs(forces)), "%.3f %.6f")
    return 0


def cmd_roughness(args) -> int:
    stack, geom, cfg = _stack_from_args(args)
    seps = np.arange(args.a_from, args.a_to + 0.5 * args.step, args.step)
    rough = rough_corrected_curve(stack, geom, cfg, ito_plate_roughness(),
                                  gold_sphere_roughness(), seps)
    smooth = smooth_force_interpolator(stack, geom, cfg, seps.min() - 2.0,
                                       seps.max() + 2.0)
    sm = np.asarray(smooth(seps))
    corr = 100.0 * (rough / sm - 1.0)
    _write_table(_out_path(args, "roughness.txt"),
                 "a_nm, smooth_pN, rough_pN, correction_pct",
                 zip(seps, np.abs(sm), np.abs(rough), corr),
                 "%.3f %.6f %.6f %.4f")
    return 0


def _paper_curve_interpolator(sample: str):
    """Attractive-force interpolant through the embedded table, extended
    by a cubic power law on both sides (the synthesis needs values down
    to contact and out to the sweep start, where the force is negligible)."""
    tab = load_paper_table(sample)
    log_f = PchipInterpolator(np.log(tab.a_nm), np.log(tab.force_set1_pn))
    f_lo, f_hi = tab.force_set1_pn[0], tab.force_set1_pn[-1]
    a_lo, a_hi = tab.a_nm[0], tab.a_nm[-1]

    def curve(a):
        a = np.asarray(a, dtype=float)
        mid = -np.exp(log_f(np.log(np.clip(a, a_lo, a_hi))))
        lo = -f_lo * (a_lo / a) ** 3
        hi = -f_hi * (a_hi / a) ** 3
        return np.where(a < a_lo, lo, np.where(a > a_hi, hi, mid))

    return curve


def _calibration_report(res, label: str) -> str:
    lines = [
        f"calibration ({label})",
        f"  V0      = {res.v0_mv:9.2f} +- {res.v0_sigma_mv:.2f} mV",
        f"  m       = {res.sensitivity_nm_per_v:9.2f} +- {res.sensitivity_sigma:.2f} nm/V",
        f"  z0      = {res.z0_nm:9.2f} +- {res.z0_sigma:.2f} nm",
        f"  ktilde  = {res.ktilde_nn_per_v:9.4f} +- {res.ktilde_sigma:.4f} nN/V",
        f"  V0(a) trend z-score = {res.v0_trend_zscore:+.1f}"
        f" ({'no anomaly' if res.v0_is_flat() else 'ANOMALOUS'})",
    ]
    if res.drift_rate_nm_per_s is not None:
        lines.insert(5, f"  drift   = {res.drift_rate_nm_per_s:9.4f} nm/s")
    return "\n".join(lines)


def cmd_calibrate(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        truth = cfg.calibration or CalibrationTruth(drift_rate_nm_per_s=args.drift)
    else:
        truth = CalibrationTruth(drift_rate_nm_per_s=args.drift,
                                 sensor_noise_v=args.noise)
    curve = _paper_curve_interpolator(args.sample)
    dataset = synthesize_dataset(truth, curve, seed=args.seed)
    if args.save_dataset:
        save_dataset(dataset, args.save_dataset)
        print(f"wrote {args.save_dataset}")
    uncorrected = calibrate(dataset, corrected=False)
    corrected = calibrate(dataset, corrected=True)
    print(_calibration_report(uncorrected, "uncorrected: drift and finite "
                                           "acquisition rate ignored"))
    print(_calibration_report(corrected, "corrected"))
    truth_line = (f"truth: V0={truth.v0_mv} mV, m={truth.sensitivity_nm_per_v} nm/V, "
                  f"z0={truth.contact_separation_nm} nm, "
                  f"ktilde={truth.force_constant_nn_per_v} nN/V, "
                  f"drift={truth.drift_rate_nm_per_s} nm/s")
    print(truth_line)
    for res, tag in ((uncorrected, "uncorrected"), (corrected, "corrected")):
        _write_table(_out_path(args, f"v0_vs_a_{tag}.txt"),
                     "a_nm, V0_mV, sigma_mV",
                     zip(res.a_nm, res.v0_vs_a_mv, res.v0_vs_a_sigma_mv),
                     "%.1f %.4f %.4f")
        _write_table(_out_path(args, f"stability_{tag}.txt"),
                     "a_end_nm, z0_nm, ktilde_nN_per_V",
                     zip(res.stability_a_end, res.stability_z0,
                         res.stability_ktilde),
                     "%.0f %.4f %.6f")
    return 0


def cmd_errors(args) -> int:
    tab = load_paper_table(args.sample)
    meta = sample_metadata(args.sample)
    volts = applied_voltages(args.sample)
    el = electric_force_systematic(tab.a_nm, tab.radius_um, volts,
                                   meta["v0_v"], meta["delta_a_nm"])
    floor = calibrate_systematic_floor(tab.a_nm, tab.total_error_pn,
                                       meta["random_error_pn"], el)
    budget = build_error_budget(tab.a_nm, meta["random_error_pn"], floor,
                                tab.radius_um, volts, meta["v0_v"],
                                meta["delta_a_nm"])
    rel = 100.0 * budget.total_pn / tab.force_set1_pn
    print(f"sigma of the mean = {meta['sigma_mean_pn']} pN -> random error "
          f"{2.0 * meta['sigma_mean_pn']:.1f} pN at 95% (Student factor 2)")
    _write_table(_out_path(args, f"errors_{args.sample}.txt"),
                 "a_nm, F_pN, dr_pN, ds_pN, dtot_pN, rel_pct",
                 zip(tab.a_nm, tab.force_set1_pn, budget.random_pn,
                     budget.sys_total_pn, budget.total_pn, rel),
                 "%.0f %.1f %.2f %.3f %.3f %.2f")
    return 0


def cmd_compare(args) -> int:
    tab = load_paper_table(args.sample)
    geom, cfg = SphereGeometry(), ThermalConfig()
    lo = _preset_stack(args.sample, args.carriers, tail="lower")
    hi = _preset_stack(args.sample, args.carriers, tail="upper")
    band = theory_band(lo, hi, geom, cfg, ito_plate_roughness(),
                       gold_sphere_roughness(), tab.a_nm)
    rep = compare(band, tab, measurement_set=args.set)
    _write_table(_out_path(args, f"compare_{args.sample}_{args.carriers}.txt"),
                 "a_nm, theory_lo_pN, theory_hi_pN, measured_pN, err_pN, overlap",
                 zip(rep.a_nm, rep.theory_lo_pn, rep.theory_hi_pn,
                     rep.measured_pn, rep.measured_err_pn,
                     rep.overlap.astype(int)),
                 "%.0f %.3f %.3f %.1f %.1f %d")
    print(f"sample={args.sample} carriers={args.carriers}: overlap "
          f"{rep.overlap_fraction:.0%} -> {rep.verdict()}")
    return 0


def cmd_reproduce(args) -> int:
    sample = args.sample
    print(f"reproduce: sample={sample}, seed={args.seed}")
    geom, cfg = SphereGeometry(), ThermalConfig()
    plate, sphere = ito_plate_roughness(), gold_sphere_roughness()
    tab = load_paper_table(sample)
    meta = sample_metadata(sample)
    curve_step = 10.0 if args.coarse else 1.0
    band_step = 6.0 if args.coarse else 2.0

    # 1. permittivities on the imaginary axis
    model_inc = ito_model(sample, "drude")
    model_exc = ito_model(sample, "none")
    xi = np.geomspace(0.02, 30.0, 60)
    eps_rows = [(x, float(eval_eps_imaginary_axis(model_inc, x)),
                 float(eval_eps_imaginary_axis(model_exc, x))) for x in xi]
    _write_table(_out_path(args, "permittivity.txt"),
                 "xi_eV, eps_with_carriers, eps_without_carriers",
                 eps_rows, "%.6e %.6e %.6e")
    spec = ito_synthetic_spectrum(sample, "upper")
    if args.out:
        save_spectrum_file(_out_path(args, "spectrum_synthetic.txt"),
                           spec.omega, spec.im_eps,
                           header=f"synthetic {sample} film spectrum")

    # 2. smooth and rough force curves for both carrier treatments
    seps = np.arange(60.0, 301.0, curve_step)
    curves = {}
    for carriers in ("drude", "none"):
        stack = _preset_stack(sample, carriers)
        curves[carriers] = rough_corrected_curve(stack, geom, cfg, plate,
                                                 sphere, seps)
    _write_table(_out_path(args, "force_curves.txt"),
                 "a_nm, F_pN_with_carriers, F_pN_without_carriers (magnitudes, rough-corrected)",
                 zip(seps, np.abs(curves["drude"]), np.abs(curves["none"])),
                 "%.0f %.4f %.4f")
    i100 = int(np.argmin(np.abs(seps - 100.0)))
    print(f"  carrier gap at 100 nm: "
          f"{100 * (1 - curves['none'][i100] / curves['drude'][i100]):.1f}%")

    # 3. calibration round trip against the embedded curve
    truth = CalibrationTruth(
        v0_mv=meta["calibration"]["v0_mv"],
        sensitivity_nm_per_v=meta["calibration"]["m_nm_per_v"],
        contact_separation_nm=meta["calibration"]["z0_nm"],
        force_constant_nn_per_v=meta["calibration"]["ktilde_nn_per_v"],
        drift_rate_nm_per_s=args.drift)
    dataset = synthesize_dataset(truth, _paper_curve_interpolator(sample),
                                 seed=args.seed)
    corrected = calibrate(dataset, corrected=True)
    uncorrected = calibrate(dataset, corrected=False)
    print(_calibration_report(uncorrected, "uncorrected"))
    print(_calibration_report(corrected, "corrected"))
    extraction = extract_casimir(dataset, corrected)
    sigma_mean = float(np.mean(extraction.forces_pn.std(axis=0, ddof=1)
                               / np.sqrt(extraction.n_values_per_separation)))
    print(f"  extracted {extraction.n_values_per_separation} values per "
          f"separation; variance of the mean {sigma_mean:.2f} pN")

    # 4. error budget calibrated to the embedded totals
    volts = applied_voltages(sample)
    el = electric_force_systematic(tab.a_nm, tab.radius_um, volts,
                                   meta["v0_v"], meta["delta_a_nm"])
    floor = calibrate_systematic_floor(tab.a_nm, tab.total_error_pn,
                                       meta["random_error_pn"], el)
    budget = build_error_budget(tab.a_nm, meta["random_error_pn"], floor,
                                tab.radius_um, volts, meta["v0_v"],
                                meta["delta_a_nm"])

    # 5. comparison against the measured table, both carrier treatments
    verdicts = {}
    for carriers in ("drude", "none"):
        lo = _preset_stack(sample, carriers, tail="lower")
        hi = _preset_stack(sample, carriers, tail="upper")
        band = theory_band(lo, hi, geom, cfg, plate, sphere, tab.a_nm,
                           step_nm=band_step)
        rep = compare(band, tab, measurement_set=args.set)
        verdicts[carriers] = rep
        _write_table(_out_path(args, f"compare_{carriers}.txt"),
                     "a_nm, theory_lo_pN, theory_hi_pN, measured_pN, err_pN, overlap",
                     zip(rep.a_nm, rep.theory_lo_pn, rep.theory_hi_pn,
                         rep.measured_pn, rep.measured_err_pn,
                         rep.overlap.astype(int)),
                     "%.0f %.3f %.3f %.1f %.1f %d")

    # final summary in the shape of the embedded table
    print(f"\n  a(nm)   |F|meas+-tot   theory band (carriers)   "
          f"theory band (no carriers)")
    for i, a in enumerate(tab.a_nm):
        ci = verdicts["drude"]
        cn = verdicts["none"]
        print(f"  {a:5.0f}  {tab.force_set1_pn[i]:8.1f}+-{budget.total_pn[i]:4.1f}"
              f"   [{-ci.theory_hi_pn[i]:8.1f}, {-ci.theory_lo_pn[i]:8.1f}]"
              f"   [{-cn.theory_hi_pn[i]:8.1f}, {-cn.theory_lo_pn[i]:8.1f}]")
    for carriers, rep in verdicts.items():
        label = "carriers included" if carriers == "drude" else "carriers disregarded"
        print(f"  {label}: overlap {rep.overlap_fraction:.0%} -> {rep.verdict()}")
    print(f"  UV/untreated reduction at 60/100/140 nm: "
          + ", ".join(f"{100 * r:.1f}%" for r in uv_reduction_fractions()))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="casimirlab",
                     description="sphere-plate dispersion-force workbench")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_tail=False):
        p.add_argument("--config", help="INI run configuration")
        p.add_argument("--sample", default="untreated",
                       choices=["untreated", "uv"])
        p.add_argument("--carriers", default="drude",
                       choices=["drude", "plasma", "none"])
        if with_tail:
            p.add_argument("--tail", choices=["upper", "lower"])
        p.add_argument("--out", help="directory for output tables")

    p = sub.add_parser("permittivity", help="dielectric response on the imaginary axis")
    add_common(p, with_tail=True)
    p.add_argument("--layer", default="film", choices=["sphere", "film", "substrate"])
    p.add_argument("--xi-from", type=float, default=0.01)
    p.add_argument("--xi-to", type=float, default=30.0)
    p.add_argument("--points", type=int, default=100)
    p.set_defaults(func=cmd_permittivity)

    p = sub.add_parser("force", help="force vs separation")
    add_common(p, with_tail=True)
    p.add_argument("--from", dest="a_from", type=float, default=60.0)
    p.add_argument("--to", dest="a_to", type=float, default=300.0)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--rough", action="store_true",
                   help="apply geometrical roughness averaging")
    p.set_defaults(func=cmd_force)

    p = sub.add_parser("roughness", help="roughness correction table")
    add_common(p)
    p.add_argument("--from", dest="a_from", type=float, default=60.0)
    p.add_argument("--to", dest="a_to", type=float, default=160.0)
    p.add_argument("--step", type=float, default=5.0)
    p.set_defaults(func=cmd_roughness)

    p = sub.add_parser("calibrate", help="synthetic electrostatic calibration")
    add_common(p)
    p.add_argument("--synthetic", action="store_true",
                   help="generate a synthetic dataset (the only mode)")
    p.add_argument("--drift", type=float, default=0.05,
                   help="separation drift rate in nm/s")
    p.add_argument("--noise", type=float, default=0.0053,
                   help="sensor noise in V")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--save-dataset", help="write the synthetic sweeps to a file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("errors", help="error budget reproducing the embedded totals")
    add_common(p)
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("compare", help="theory band vs embedded measurements")
    add_common(p)
    p.add_argument("--set", type=int, default=1, choices=[1, 2])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("reproduce", help="full pipeline: permittivity to comparison")
    add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drift", type=float, default=0.05)
    p.add_argument("--set", type=int, default=1, choices=[1, 2])
    p.add_argument("--coarse", action="store_true",
                   help="coarse grids for a quick smoke run")
    p.set_defaults(func=cmd_reproduce)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
