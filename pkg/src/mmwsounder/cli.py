"""Command-line front end: waveform design, snapshot simulation, capture
processing, link budgets, and schedule inspection.

Configuration is line-oriented ``key = value`` INI, mirrored by the
defaults below; command-line flags override file values and the final
resolved configuration is echoed before the run (and embedded verbatim
in the run report). Exit codes: 0 success, 2 configuration error,
3 numeric non-convergence, 4 data integrity.
"""

from __future__ import annotations

import argparse
import copy
import math
import os
import re
import sys

from .errors import (
    CalibrationError,
    ConfigError,
    DriftEstimationError,
    FormatError,
)

DEFAULT_CONFIG: dict[str, dict[str, str]] = {
    "waveform": {
        "num_tones": "801",
        "tone_spacing": "500kHz",
        "start_freq": "50MHz",
        "target_papr_db": "0.5",
        "max_iters": "5000",
    },
    "schedule": {
        "repetitions": "10",
        "waveform_duration": "2us",
        "guard_time": "2us",
        "anchor_policy": "auto",
    },
    "scenario": {
        "kind": "los",
        "distance_m": "100",
        "scene_file": "",
        "orientations": "0,90,180,270",
    },
    "clocks": {
        "tx": "shared",
        "rx": "shared",
        "clock_seed": "0",
    },
    "front_end": {
        "noise_figure_db": "5",
        "adc_bits": "10",
        "ripple_seed": "none",
        "ripple_db": "1.0",
    },
    "capture": {
        "seed": "0",
        "averaging": "1",
        "tx_power_dbm": "37",
        "snapshot_repeat": "1",
        "snapshot_interval": "100ms",
        "write_calibration": "true",
    },
    "process": {
        "drift_correction": "true",
        "window": "rect",
        "threshold_db": "none",
    },
}

_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9}
_FREQ_UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9.]+(?:[eE][-+]?[0-9]+)?)\s*(\S*)\s*$")


def _parse_quantity(text: str, units: dict[str, float], what: str) -> float:
    m = _QUANTITY_RE.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse {what}: {text!r}")
    value = float(m.group(1))
    suffix = m.group(2).replace("µ", "u").lower()
    if not suffix:
        return value
    if suffix not in units:
        raise ConfigError(
            f"unknown {what} unit {m.group(2)!r} in {text!r} "
            f"(expected one of {', '.join(sorted(units))})"
        )
    return value * units[suffix]


def parse_time(text: str) -> float:
    return _parse_quantity(text, _TIME_UNITS, "time")


def parse_freq(text: str) -> float:
    return _parse_quantity(text, _FREQ_UNITS, "frequency")


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_optional(text: str):
    return None if str(text).strip().lower() in ("", "none") else text


def load_config(path: str | None, overrides) -> dict[str, dict[str, str]]:
    """Defaults, then config file, then flag overrides; strict keys."""
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        from .io import metadata_from_text

        with open(path, encoding="utf-8") as f:
            loaded = metadata_from_text(f.read())
        for section, kv in loaded.items():
            if section not in config:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in kv.items():
                if key not in config[section]:
                    raise ConfigError(f"unknown config key {key} in [{section}]")
                config[section][key] = value
    for (section, key), value in overrides:
        if value is not None:
            config[section][key] = str(value)
    return config


def _echo_config(config: dict[str, dict[str, str]]) -> None:
    from .io import metadata_to_text

    sys.stdout.write("# resolved configuration\n")
    sys.stdout.write(metadata_to_text(config))


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _build_plan(config):
    from .waveform import make_tone_plan

    wf = config["waveform"]
    return make_tone_plan(
        int(wf["num_tones"]),
        parse_freq(wf["tone_spacing"]),
        parse_freq(wf["start_freq"]),
    )


def _build_schedule(config):
    from .beams import Side, default_codebook
    from .sweep import build_schedule

    sc = config["schedule"]
    tx = [b for b, _ in default_codebook(Side.TX).azimuth_row()]
    rx = [b for b, _ in default_codebook(Side.RX).azimuth_row()]
    return build_schedule(
        tx,
        rx,
        int(sc["repetitions"]),
        parse_time(sc["waveform_duration"]),
        parse_time(sc["guard_time"]),
        sc["anchor_policy"],
    )


def _build_clock(mode: str, seed: int):
    from .impairments import free_running_clock, gps_clock, shared_clock

    mode = mode.strip().lower()
    if mode == "shared":
        return shared_clock()
    if mode == "gps":
        return gps_clock(seed=seed)
    if mode in ("free", "free_running"):
        return free_running_clock(seed=seed)
    raise ConfigError(f"unknown clock mode {mode!r} (shared, gps, free)")


def _build_front_end(config):
    from .impairments import RxFrontEnd

    fe = config["front_end"]
    adc = _parse_optional(fe["adc_bits"])
    ripple = _parse_optional(fe["ripple_seed"])
    return RxFrontEnd(
        noise_figure=float(fe["noise_figure_db"]),
        adc_bits=None if adc is None else int(adc),
        ripple_seed=None if ripple is None else int(ripple),
        ripple_db=float(fe["ripple_db"]),
    )


def _build_channel(config):
    from .channel import los_channel

    sc = config["scenario"]
    kind = sc["kind"].strip().lower()
    if kind == "los":
        return los_channel(float(sc["distance_m"]))
    if kind == "scene":
        scene = sc["scene_file"]
        if not scene:
            raise ConfigError("scenario.kind = scene requires scene_file")
        if not os.path.exists(scene):
            raise ConfigError(f"scene file not found: {scene}")
        from .channel import channel_from_sections
        from .io import metadata_from_text

        with open(scene, encoding="utf-8") as f:
            return channel_from_sections(metadata_from_text(f.read()))
    raise ConfigError(f"unknown scenario kind {kind!r} (los, scene)")


def cmd_waveform(args) -> int:
    config = load_config(
        args.config,
        [
            (("waveform", "num_tones"), args.tones),
            (("waveform", "target_papr_db"), args.target),
            (("waveform", "max_iters"), args.max_iters),
        ],
    )
    _echo_config(config)
    out = _out_dir(args)

    from .report import write_run_report
    from .waveform import (
        export_waveform,
        optimize_phases,
        papr_of_phases,
        tx_backoff,
        zadoff_chu_phases,
    )

    plan = _build_plan(config)
    wf = optimize_phases(
        plan,
        float(config["waveform"]["target_papr_db"]),
        int(config["waveform"]["max_iters"]),
        seed=args.seed,
    )
    descriptor = os.path.join(out, "waveform.ini")
    export_waveform(wf, descriptor)

    results = {
        "papr_db": f"{wf.papr:.4f}",
        "target_papr_db": config["waveform"]["target_papr_db"],
        "converged": str(wf.converged).lower(),
        "iterations": str(wf.iterations),
        "tx_backoff_db": f"{tx_backoff(wf.papr):.4f}",
        "descriptor": descriptor,
    }
    if args.compare:
        if args.compare != "zadoff-chu":
            raise ConfigError(f"unknown comparison waveform {args.compare!r}")
        zc = papr_of_phases(plan, zadoff_chu_phases(plan.num_tones))
        results["zadoff_chu_papr_db"] = f"{zc:.4f}"
        results["zadoff_chu_margin_db"] = f"{zc - wf.papr:.4f}"
    report = os.path.join(out, "papr_report.ini")
    write_run_report(report, config, results)

    print(f"papr: {wf.papr:.4f} dB (target {config['waveform']['target_papr_db']}, "
          f"converged: {wf.converged})")
    print(f"tx back-off: {tx_backoff(wf.papr):.4f} dB")
    if "zadoff_chu_papr_db" in results:
        print(f"zadoff-chu comparison: {results['zadoff_chu_papr_db']} dB "
              f"(+{results['zadoff_chu_margin_db']} dB)")
    print(f"wrote {descriptor}")
    print(f"wrote {report}")
    return 0 if wf.converged else 3


def cmd_simulate(args) -> int:
    config = load_config(
        args.config,
        [
            (("scenario", "distance_m"), args.distance),
            (("scenario", "scene_file"), args.scene),
            (("scenario", "kind"), "scene" if args.scene else None),
            (("scenario", "orientations"), args.orientations),
            (("schedule", "repetitions"), args.reps),
            (("schedule", "anchor_policy"), args.anchor_policy),
            (("clocks", "rx"), args.clock),
            (("capture", "seed"), args.seed),
            (("capture", "averaging"), args.averaging),
            (("capture", "snapshot_repeat"), args.snapshot_repeat),
            (("capture", "snapshot_interval"), args.interval),
        ],
    )
    _echo_config(config)
    out = _out_dir(args)

    from .beams import Side, default_codebook
    from .capture import simulate_calibration, simulate_capture
    from .io import write_capture
    from .sweep import snapshot_cadence

    plan = _build_plan(config)
    sched = _build_schedule(config)
    ch = _build_channel(config)
    fe = _build_front_end(config)
    clock_seed = int(config["clocks"]["clock_seed"])
    clocks = (
        _build_clock(config["clocks"]["tx"], clock_seed),
        _build_clock(config["clocks"]["rx"], clock_seed + 1),
    )
    seed = int(config["capture"]["seed"])
    averaging = int(config["capture"]["averaging"])
    tx_power = float(config["capture"]["tx_power_dbm"])
    repeat = int(config["capture"]["snapshot_repeat"])
    orientations = [
        float(o) for o in config["scenario"]["orientations"].split(",") if o.strip()
    ]
    if not orientations:
        raise ConfigError("scenario.orientations is empty")

    if repeat > 1:
        starts = snapshot_cadence(
            sched, parse_time(config["capture"]["snapshot_interval"]), repeat
        )
    else:
        starts = [0.0]

    tx_cb = default_codebook(Side.TX)
    written = []
    for orientation in orientations:
        rx_cb = default_codebook(Side.RX, orientation=orientation)
        for k, t0 in enumerate(starts):
            cap = simulate_capture(
                ch,
                sched,
                (tx_cb, rx_cb),
                clocks,
                fe,
                rx_orientation=orientation,
                seed=seed + k,
                averaging=averaging,
                tx_power_dbm=tx_power,
                plan=plan,
                snapshot_start=float(t0),
            )
            name = f"capture_o{orientation:g}"
            if repeat > 1:
                name += f"_s{k:03d}"
            path = os.path.join(out, name + ".mmws")
            write_capture(cap, path)
            written.append(path)

    if _parse_bool(config["capture"]["write_calibration"]):
        # The bench calibration keeps the ripple (its whole point) and
        # the thermal noise, but bypasses the ADC: the tone-domain
        # quantizer is pathological on a flat zero-phase response (every
        # tone rounds identically, a coherent ~0.4 dB bias), where the
        # real instrument's time-domain quantization errors decorrelate.
        import dataclasses

        cal_fe = dataclasses.replace(fe, adc_bits=None)
        cal = simulate_calibration(
            (tx_cb, default_codebook(Side.RX)), cal_fe, seed=seed, plan=plan
        )
        path = os.path.join(out, "calibration.mmws")
        write_capture(cal, path)
        written.append(path)

    for path in written:
        print(f"wrote {path}")
    return 0


def _system_gains(cap) -> tuple[float, float]:
    from .beams import gain_db

    tx_cb, rx_cb = cap.codebooks()
    g_tx = max(float(gain_db(p, *p.steering)) for _, p in tx_cb.patterns)
    g_rx = max(float(gain_db(p, *p.steering)) for _, p in rx_cb.patterns)
    return g_tx, g_rx


def cmd_process(args) -> int:
    config = load_config(
        args.config,
        [
            (("process", "drift_correction"),
             "false" if args.no_drift_correction else None),
            (("process", "window"), args.window),
            (("process", "threshold_db"), args.threshold),
        ],
    )
    _echo_config(config)
    out = _out_dir(args)

    if not os.path.exists(args.cal):
        raise ConfigError(f"calibration file not found: {args.cal}")
    for path in args.captures:
        if not os.path.exists(path):
            raise ConfigError(f"capture file not found: {path}")

    from .impairments import ClockMode
    from .io import read_capture
    from .processing import (
        correct_drift,
        directional_pdp,
        estimate_drift,
        pas,
        path_loss_360,
        sector_pdp,
    )
    from .report import pas_table, pdp_products, render_pas, write_run_report

    cal = read_capture(args.cal)
    if cal.kind != "calibration":
        raise CalibrationError(f"{args.cal} is not a calibration capture")

    correct = _parse_bool(config["process"]["drift_correction"])
    window = config["process"]["window"]
    threshold = _parse_optional(config["process"]["threshold_db"])

    results: dict[str, str] = {}
    pdps = {}
    sectors = {}
    gains = None
    products = []
    for path in args.captures:
        cap = read_capture(path)
        orientation = cap.rx_orientation
        if orientation in pdps:
            raise ConfigError(
                f"duplicate RX orientation {orientation:g} (file {path})"
            )
        tag = f"o{orientation:g}"
        gains = gains or _system_gains(cap)
        clocks = cap.clocks()
        drifting = any(c.mode is not ClockMode.SHARED for c in clocks)
        if drifting and correct:
            try:
                est = estimate_drift(cap)
                cap = correct_drift(cap, est.slope)
                results[f"drift_slope_rad_s_{tag}"] = f"{est.slope:.6g}"
                results[f"drift_residual_rad_{tag}"] = f"{est.residual_rms:.6g}"
                results[f"drift_ambiguous_{tag}"] = str(est.ambiguous).lower()
            except DriftEstimationError as exc:
                results[f"drift_status_{tag}"] = f"estimation failed: {exc}"
        elif drifting:
            results[f"drift_status_{tag}"] = (
                "residual drift present: free-running clock, correction disabled"
            )
        pdp = directional_pdp(cap, cal, window=window)
        pdps[orientation] = pdp
        sectors[orientation] = sector_pdp(pdp)
        products += pdp_products(out, tag, pdp, sectors[orientation])

    pas_result = pas(pdps)
    pas_path = os.path.join(out, "pas.tsv")
    pas_table(pas_path, pas_result)
    pas_fig = os.path.join(out, "pas.png")
    render_pas(pas_fig, pas_result, "power angular spectrum")
    products += [pas_path, pas_fig]

    pl = path_loss_360(
        sectors,
        gains,
        threshold_db=None if threshold is None else float(threshold),
    )
    results["path_loss_db"] = f"{pl:.4f}"
    results["system_gains_dbi"] = f"{gains[0]:.3f},{gains[1]:.3f}"
    results["orientations"] = ",".join(f"{o:g}" for o in sorted(pdps))

    report = os.path.join(out, "report.ini")
    write_run_report(report, config, results)
    products.append(report)

    print(f"path loss (360 deg): {pl:.4f} dB")
    for key, value in results.items():
        if key.startswith("drift_"):
            print(f"{key}: {value}")
    for p in products:
        print(f"wrote {p}")
    return 0


def cmd_budget(args) -> int:
    from .beams import link_budget
    from .report import write_table

    bandwidth = parse_freq(args.bandwidth)
    averaging = int(args.averaging)
    if averaging < 1:
        raise ConfigError("averaging must be >= 1")
    base = link_budget(
        args.eirp, args.rx_gain, args.nf, bandwidth, args.required_snr
    )
    averaging_gain = 10.0 * math.log10(averaging)
    total = base + averaging_gain
    noise_floor = -174.0 + 10.0 * math.log10(bandwidth) + args.nf

    rows = [
        ("eirp_dbm", args.eirp),
        ("rx_gain_dbi", args.rx_gain),
        ("noise_figure_db", args.nf),
        ("bandwidth_hz", bandwidth),
        ("noise_floor_dbm", noise_floor),
        ("required_snr_db", args.required_snr),
        ("averaging", averaging),
        ("averaging_gain_db", averaging_gain),
        ("max_path_loss_db", total),
    ]
    for name, value in rows:
        print(f"{name:20s} {value:.4f}" if isinstance(value, float)
              else f"{name:20s} {value}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "budget.tsv")
        write_table(path, ("quantity", "value"), rows)
        print(f"wrote {path}")
    return 0


def cmd_sweep_describe(args) -> int:
    config = load_config(
        args.config,
        [
            (("schedule", "repetitions"), args.reps),
            (("schedule", "anchor_policy"), args.anchor_policy),
            (("schedule", "guard_time"), args.guard),
        ],
    )
    from .sweep import describe

    print(describe(_build_schedule(config), max_rows=args.rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmws",
        description="Beam-switched mm-wave channel sounder twin.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI configuration file")
        p.add_argument("--out", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=0, help="master seed")

    p = sub.add_parser("waveform", help="design the sounding waveform")
    common(p)
    p.add_argument("--tones", type=int, help="number of tones")
    p.add_argument("--target", type=float, help="target PAPR in dB")
    p.add_argument("--max-iters", type=int, help="optimizer iteration budget")
    p.add_argument("--compare", help="also measure a reference design (zadoff-chu)")
    p.set_defaults(func=cmd_waveform)

    p = sub.add_parser("simulate", help="simulate snapshot captures")
    common(p)
    p.add_argument("--distance", type=float, help="LOS distance in metres")
    p.add_argument("--scene", help="scene file (INI channel sections)")
    p.add_argument("--orientations", help="comma-separated RX orientations")
    p.add_argument("--reps", type=int, help="sweep repetitions")
    p.add_argument("--anchor-policy", help="auto, none, or insert:N")
    p.add_argument("--clock", help="RX clock mode: shared, gps, free")
    p.add_argument("--averaging", type=int, help="per-slot averaging factor")
    p.add_argument("--snapshot-repeat", type=int, help="snapshots per capture")
    p.add_argument("--interval", help="snapshot cadence, e.g. 100ms")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("process", help="process captures into products")
    common(p)
    p.add_argument("captures", nargs="+", help="capture files, one per orientation")
    p.add_argument("--cal", required=True, help="calibration capture file")
    p.add_argument("--no-drift-correction", action="store_true",
                   help="skip drift estimation/correction")
    p.add_argument("--window", help="delay window: rect or hann")
    p.add_argument("--threshold", help="sector PDP threshold in dB, or none")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("budget", help="link-budget worksheet")
    p.add_argument("--out", help="also write budget.tsv here")
    p.add_argument("--eirp", type=float, default=57.0, help="EIRP in dBm")
    p.add_argument("--rx-gain", type=float, default=20.0, help="RX array gain in dBi")
    p.add_argument("--nf", type=float, default=5.0, help="receiver noise figure in dB")
    p.add_argument("--bandwidth", default="400MHz", help="sounding bandwidth")
    p.add_argument("--required-snr", type=float, default=1.0,
                   help="detector SNR requirement in dB")
    p.add_argument("--averaging", type=int, default=1, help="coherent averages")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("sweep", help="schedule tools")
    sweep_sub = p.add_subparsers(dest="sweep_command", required=True)
    d = sweep_sub.add_parser("describe", help="print the sweep schedule")
    common(d)
    d.add_argument("--reps", type=int, help="sweep repetitions")
    d.add_argument("--anchor-policy", help="auto, none, or insert:N")
    d.add_argument("--guard", help="guard time, e.g. 2us")
    d.add_argument("--rows", type=int, default=8, help="slot rows to print")
    d.set_defaults(func=cmd_sweep_describe)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, CalibrationError, DriftEstimationError) as exc:
        print(f"data integrity error: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
