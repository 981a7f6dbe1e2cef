"""Command-line driver binding the pipeline end to end.

Subcommands:

    simulate   write bob.fsow / eve.fsow / truth.json for a configured link
    analyze    recover symbols and write report.json + CSV series
    finitelen  emit rate-split and repetition-rate leakage-bound curves
    binsweep   emit the bin-width sweep for the eavesdropper channel

Configuration comes from a YAML file (--config); command-line flags
override file values.  FSOSEC_LOG selects the log level.
"""

from __future__ import annotations

import argparse
import datetime
import logging
import os
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from . import atmosphere, waveio
from .errors import ConfigError, EstimationError, FsosecError, InfeasibleRateError
from .fading import ChannelParams, PrbsSpec, SimConfig, gen_prbs15, wiretap_run
from .finite_length import exponent_curve, secrecy_exponent
from .metrics import (
    InputDist,
    bin_width_sweep,
    ergodic_rate,
    long_span_rate,
    mutual_info_soft,
    optimize_threshold,
    outage_curve,
    select_bin_width,
    slot_metrics,
    soft_transition,
)
from .recovery import recover_frame

log = logging.getLogger("fsosec")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("FSOSEC_LOG", "warn").lower()
    if level not in _LOG_LEVELS:
        raise ConfigError(f"FSOSEC_LOG must be one of {sorted(_LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=_LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return cfg


def _field(section: dict, name: str, default):
    value = section.get(name, default)
    if value is None and default is not None:
        return default
    return value


def _build_channel(section: dict, where: str) -> ChannelParams:
    try:
        return ChannelParams(
            mean_gain=float(_field(section, "mean_gain", 1.0)),
            scint_index=float(_field(section, "scint_index", 0.0)),
            noise_sigma=float(_field(section, "noise_sigma", 0.1)),
            dc_offset=float(_field(section, "dc_offset", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _build_prbs(section: dict, where: str) -> PrbsSpec:
    try:
        return PrbsSpec(
            register_bits=int(_field(section, "register_bits", 15)),
            taps=tuple(_field(section, "taps", (15, 14))),
            initial_state=int(_field(section, "initial_state", 0x7FFF)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _build_sim(cfg: dict, seed_override: int | None) -> SimConfig:
    sim = cfg.get("sim")
    if sim is None:
        raise ConfigError("sim: section is required for this command")
    if not isinstance(sim, dict):
        raise ConfigError("sim: must be a mapping")
    seed = seed_override if seed_override is not None else int(_field(sim, "rng_seed", 0))
    try:
        return SimConfig(
            prbs=_build_prbs(sim.get("prbs", {}), "sim.prbs"),
            rep_rate_hz=float(_field(sim, "rep_rate_hz", 10e6)),
            sample_rate_hz=float(_field(sim, "sample_rate_hz", 50e6)),
            duration_s=float(_field(sim, "duration_s", 0.2)),
            coherence_s=float(_field(sim, "coherence_s", 4e-3)),
            on_amplitude=float(_field(sim, "on_amplitude", 1.0)),
            bob=_build_channel(sim.get("bob", {"mean_gain": 1.0, "scint_index": 0.1,
                                               "noise_sigma": 0.08, "dc_offset": 0.1}), "sim.bob"),
            eve=_build_channel(sim.get("eve", {"mean_gain": 0.6, "scint_index": 0.1,
                                               "noise_sigma": 0.25, "dc_offset": 0.05}), "sim.eve"),
            gain_correlation=float(_field(sim, "gain_correlation", 0.0)),
            rng_seed=seed,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sim: {exc}") from exc


def _parse_grid(spec, what: str) -> np.ndarray:
    """Grid from either an explicit list or {start, stop, points}."""
    if isinstance(spec, (list, tuple)):
        if not spec:
            raise ConfigError(f"{what}: grid must be nonempty")
        return np.asarray(spec, dtype=np.float64)
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["points"]))
        except KeyError as exc:
            raise ConfigError(f"{what}: needs start/stop/points, missing {exc}") from exc
    raise ConfigError(f"{what}: expected a list or start/stop/points mapping")


def _parse_rth_flag(text: str) -> list[float]:
    if ":" in text:
        start, stop, points = text.split(":")
        return list(np.linspace(float(start), float(stop), int(points)))
    return [float(tok) for tok in text.split(",") if tok]


class _Campaign:
    """Resolved inputs shared by analyze / finitelen / binsweep."""

    def __init__(self, cfg: dict, args):
        analysis = cfg.get("analysis") or {}
        if not isinstance(analysis, dict):
            raise ConfigError("analysis: must be a mapping")
        self.analysis = analysis

        has_sim = cfg.get("sim") is not None
        has_paths = cfg.get("input_paths") is not None
        if has_sim == has_paths:
            raise ConfigError("exactly one of sim / input_paths must be present")

        self.source = "sim" if has_sim else "files"
        self.seed = getattr(args, "seed", None)
        if has_sim:
            sim = _build_sim(cfg, self.seed)
            self.records = {}
            self.records["bob"], self.records["eve"], self.truth = wiretap_run(sim)
            self.prbs_spec = sim.prbs
            self.rep_rate_hz = sim.rep_rate_hz
            default_coherence = sim.coherence_s
            self.seed = sim.rng_seed
        else:
            paths = cfg["input_paths"]
            if not isinstance(paths, dict) or set(paths) != {"bob", "eve"}:
                raise ConfigError("input_paths: must map exactly the keys bob and eve")
            self.records = {}
            for name, p in paths.items():
                try:
                    self.records[name] = waveio.read_waveform(p)
                except (OSError, ValueError) as exc:
                    raise ConfigError(f"input_paths.{name}: {exc}") from exc
            self.truth = None
            self.prbs_spec = _build_prbs(analysis.get("prbs", {}), "analysis.prbs")
            self.rep_rate_hz = float(_field(analysis, "rep_rate_hz", 10e6))
            default_coherence = float(_field(analysis, "coherence_s", 4e-3))
        self.paths = cfg.get("input_paths", {"bob": "<sim>", "eve": "<sim>"})

        if getattr(args, "coherence_ms", None) is not None:
            self.coherence_s = args.coherence_ms * 1e-3
        else:
            self.coherence_s = float(_field(analysis, "coherence_s", default_coherence))

        px_cfg = _field(analysis, "px", [0.5, 0.5])
        try:
            self.px = InputDist(float(px_cfg[0]), float(px_cfg[1]))
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"analysis.px: {exc}") from exc

        self.lpf_cutoff_hz = _field(analysis, "lpf_cutoff_hz", 6e6)
        if self.lpf_cutoff_hz is not None:
            self.lpf_cutoff_hz = float(self.lpf_cutoff_hz)
        self.min_peak_ratio = float(_field(analysis, "min_peak_ratio", 3.0))
        self.workers = getattr(args, "workers", None) or int(
            _field(analysis, "workers", os.cpu_count() or 1)
        )

        self.delta_cfg = analysis.get("delta_eve", {"mode": "sweep"})
        if getattr(args, "delta_mv", None) is not None:
            self.delta_cfg = {"mode": "fixed", "value": args.delta_mv * 1e-3}
        if not isinstance(self.delta_cfg, dict) or "mode" not in self.delta_cfg:
            raise ConfigError("analysis.delta_eve: needs a mode of fixed or sweep")

        self.frames = {}
        self.syncs = {}
        prbs_bits = gen_prbs15(self.prbs_spec)
        for name, record in self.records.items():
            try:
                frame, sync = recover_frame(
                    record,
                    prbs_bits,
                    self.rep_rate_hz,
                    self.coherence_s,
                    lpf_cutoff_hz=self.lpf_cutoff_hz,
                    min_peak_ratio=self.min_peak_ratio,
                )
            except FsosecError as exc:
                raise type(exc)(f"{self.paths.get(name, name)}: {exc}") from exc
            self.frames[name] = frame
            self.syncs[name] = sync
            log.info("synchronized %s at offset %d (peak %.3f)",
                     name, sync.offset_symbols, sync.peak_correlation)

    def sweep_grid(self) -> np.ndarray:
        v = self.frames["eve"].v
        span = float(v.max() - v.min())
        points = int(_field(self.delta_cfg, "points", 25))
        max_frac = float(_field(self.delta_cfg, "max_frac", 0.5))
        min_frac = float(_field(self.delta_cfg, "min_frac", 2e-4))
        if points < 5 or not 0 < min_frac < max_frac:
            raise ConfigError("analysis.delta_eve: need points >= 5 and 0 < min_frac < max_frac")
        return np.geomspace(span * max_frac, span * min_frac, points)

    def resolve_delta(self) -> tuple[float, list[tuple[float, float]], bool]:
        """(delta, sweep series, plateau flag) for the eavesdropper binning."""
        eve = self.frames["eve"]
        sweep = bin_width_sweep(eve.x, eve.v, self.sweep_grid(), self.px)
        mode = self.delta_cfg["mode"]
        if mode == "fixed":
            try:
                return float(self.delta_cfg["value"]), sweep, True
            except KeyError as exc:
                raise ConfigError("analysis.delta_eve: fixed mode needs a value") from exc
        if mode != "sweep":
            raise ConfigError(f"analysis.delta_eve.mode: unknown mode {mode!r}")
        choice = select_bin_width(sweep)
        if not choice.plateau:
            log.warning("bin-width sweep found no plateau; using the median width")
        return choice.delta, sweep, choice.plateau


def _pooled_tables(camp: _Campaign, delta_eve: float):
    bob, eve = camp.frames["bob"], camp.frames["eve"]
    _, mi_bob = optimize_threshold(bob.x, bob.v, camp.px)
    eve_table = soft_transition(eve.x, eve.v, delta_eve)
    return mi_bob, eve_table


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sim = _build_sim(cfg, args.seed)
    out = Path(args.out)
    bob, eve, truth = wiretap_run(sim)
    waveio.write_waveform(out / "bob.fsow", bob)
    waveio.write_waveform(out / "eve.fsow", eve)
    waveio.write_json(
        out / "truth.json",
        {
            "transmitted_bits": "".join("1" if b else "0" for b in truth.transmitted_bits),
            "slot_gains_bob": [float(g) for g in truth.slot_gains_bob],
            "slot_gains_eve": [float(g) for g in truth.slot_gains_eve],
            "frame_offset_samples": truth.frame_offset_samples,
            "rng_seed": sim.rng_seed,
            "rep_rate_hz": sim.rep_rate_hz,
            "sample_rate_hz": sim.sample_rate_hz,
            "coherence_s": sim.coherence_s,
        },
    )
    log.info("wrote %s (%d samples/channel)", out, bob.n_samples)
    return 0


def _atmos_entry(frame) -> dict | None:
    on = frame.v[frame.x == 1]
    try:
        stats = atmosphere.compute_atmos(on, wavelength_m=1.55e-6, path_length_m=7.8e3)
    except ValueError as exc:
        log.warning("turbulence stats unavailable: %s", exc)
        return None
    return stats


def cmd_analyze(args) -> int:
    cfg = _load_config(args.config)
    camp = _Campaign(cfg, args)
    analysis = camp.analysis
    out = Path(args.out)

    delta_eve, sweep, plateau = camp.resolve_delta()
    slots = slot_metrics(
        camp.frames["bob"], camp.frames["eve"], camp.px, delta_eve,
        workers=camp.workers, on_error="mark",
    )
    invalid = [s.slot_index for s in slots if not s.valid]
    if invalid:
        log.warning("slots %s could not be estimated and were marked invalid", invalid)
    rs_long = long_span_rate(camp.frames["bob"], camp.frames["eve"], camp.px, delta_eve)
    rs_erg = ergodic_rate(slots)

    grid_cfg = _field(analysis, "outage_grid", {"start": 0.0, "stop": camp.rep_rate_hz,
                                                "points": 101})
    if args.rth_grid is not None:
        r_th = _parse_rth_flag(args.rth_grid)
    else:
        r_th = list(_parse_grid(grid_cfg, "analysis.outage_grid"))
    outage = outage_curve(slots, r_th)

    wavelength = float(_field(analysis, "wavelength_m", 1.55e-6))
    path_len = float(_field(analysis, "path_length_m", 7.8e3))
    atmos = {}
    for name, frame in camp.frames.items():
        on = frame.v[frame.x == 1]
        try:
            stats = atmosphere.compute_atmos(on, wavelength, path_len)
            atmos[name] = {
                "sigma_i2": stats.sigma_i2,
                "cn2": stats.cn2,
                "wavelength_m": stats.wavelength_m,
                "path_length_m": stats.path_length_m,
            }
        except ValueError as exc:
            log.warning("turbulence stats unavailable for %s: %s", name, exc)
            atmos[name] = None

    report = {
        "meta": {
            "package_version": metadata.version("fsosec"),
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "source": camp.source,
            "seed": camp.seed,
            "n_slots": camp.frames["bob"].n_slots,
            "coherence_s": camp.coherence_s,
            "rep_rate_hz": camp.rep_rate_hz,
            "lpf_cutoff_hz": camp.lpf_cutoff_hz,
            "delta_eve_v": delta_eve,
            "delta_eve_mode": camp.delta_cfg["mode"],
            "delta_plateau": plateau,
            "invalid_slots": invalid,
            "sync": {
                name: {
                    "offset_symbols": s.offset_symbols,
                    "peak_correlation": s.peak_correlation,
                    "second_peak": s.second_peak,
                }
                for name, s in camp.syncs.items()
            },
        },
        "slots": [
            {
                "slot_index": s.slot_index,
                "t_start_ms": s.slot_index * camp.coherence_s * 1e3,
                "mi_bob": s.mi_bob if s.valid else None,
                "mi_eve": s.mi_eve if s.valid else None,
                "rs_i": s.rs_i if s.valid else None,
                "rs_i_bps": s.rs_i_bps if s.valid else None,
                "mean_voltage_bob": s.mean_voltage_bob,
                "valid": s.valid,
            }
            for s in slots
        ],
        "rs_long_span": rs_long,
        "rs_ergodic": rs_erg,
        "outage": [{"r_th_bps": r, "probability": p} for r, p in outage],
        "atmos": atmos,
    }
    waveio.write_json(out / "report.json", report)
    waveio.write_slots_csv(out / "slots.csv", slots, camp.coherence_s)
    waveio.write_outage_csv(out / "outage.csv", outage)
    waveio.write_binsweep_csv(out / "binsweep.csv", sweep)
    if args.dump_frames:
        waveio.write_frame_csv(out / "bob_frame.csv", camp.frames["bob"])
        waveio.write_frame_csv(out / "eve_frame.csv", camp.frames["eve"])
    log.info("analysis complete: rs_ergodic=%.4f bits/letter over %d slots",
             rs_erg, camp.frames["bob"].n_slots)
    return 0


def cmd_finitelen(args) -> int:
    cfg = _load_config(args.config)
    camp = _Campaign(cfg, args)
    fl = camp.analysis.get("finite_length") or {}
    if not isinstance(fl, dict):
        raise ConfigError("analysis.finite_length: must be a mapping")
    out = Path(args.out)

    delta_eve, _, _ = camp.resolve_delta()
    slot = fl.get("slot")
    if slot is None:
        mi_bob, eve_table = _pooled_tables(camp, delta_eve)
    else:
        x, vb = camp.frames["bob"].slot_pairs(int(slot))
        _, ve = camp.frames["eve"].slot_pairs(int(slot))
        _, mi_bob = optimize_threshold(x, vb, camp.px)
        eve_table = soft_transition(x, ve, delta_eve)

    total_rate = float(_field(fl, "total_rate", mi_bob))
    mi_eve = mutual_info_soft(eve_table, camp.px)
    log.info("finite-length budget: total rate %.4f, eavesdropper MI %.4f bits/letter",
             total_rate, mi_eve)

    r_b_grid = _parse_grid(
        _field(fl, "r_b_grid", [round(f * total_rate, 6) for f in (0.3, 0.5, 0.7, 0.9)]),
        "finite_length.r_b_grid",
    )
    n_grid = _parse_grid(
        _field(fl, "n_grid", list(np.unique(np.geomspace(10, 1e6, 25).astype(np.int64)))),
        "finite_length.n_grid",
    )
    curve = exponent_curve(eve_table, camp.px, [total_rate - r for r in r_b_grid])
    rows = []
    for (r_e, h), r_b in zip(curve.points, r_b_grid):
        feasible = h > 0.0
        if not feasible:
            log.warning("message rate %.4f leaves randomness rate %.4f <= eavesdropper MI; "
                        "row flagged infeasible", r_b, r_e)
        for n in n_grid:
            rows.append((float(r_b), int(n), float(np.exp(-h * int(n))), feasible))
    waveio.write_csv(out / "rate_split.csv",
                     ["R_B_bits_per_letter", "n", "delta_bound", "feasible"], rows)

    t_o = float(_field(fl, "t_o_s", camp.frames["bob"].n_symbols / camp.rep_rate_hz))
    r_b_rep = float(_field(fl, "r_b", 0.5 * total_rate))
    rep_grid = _parse_grid(_field(fl, "rep_grid_hz", list(np.geomspace(1e3, 1e7, 13))),
                           "finite_length.rep_grid_hz")
    r_e_rep = total_rate - r_b_rep
    if r_e_rep < 0:
        raise ConfigError(f"finite_length.r_b: {r_b_rep} exceeds the total rate {total_rate}")
    h_rep = secrecy_exponent(r_e_rep, eve_table, camp.px)
    rep_rows = [
        (rep, int(round(rep * t_o)), float(np.exp(-h_rep * round(rep * t_o))), h_rep > 0.0)
        for rep in rep_grid
    ]
    waveio.write_csv(out / "repetition.csv",
                     ["R_rep_hz", "n", "delta_bound", "feasible"], rep_rows)

    delta_target = float(_field(fl, "delta_target", 1e-20))
    for r_b in r_b_grid:
        try:
            n_req = required_length(delta_target, total_rate - float(r_b), eve_table, camp.px)
            log.info("R_B=%.4f bits/letter -> required n for %.1e: %d",
                     r_b, delta_target, n_req)
        except InfeasibleRateError:
            log.info("R_B=%.4f bits/letter -> required n for %.1e: infeasible",
                     r_b, delta_target)
    return 0


def cmd_binsweep(args) -> int:
    cfg = _load_config(args.config)
    camp = _Campaign(cfg, args)
    out = Path(args.out)
    eve = camp.frames["eve"]
    sweep = bin_width_sweep(eve.x, eve.v, camp.sweep_grid(), camp.px)
    choice = select_bin_width(sweep)
    waveio.write_binsweep_csv(out / "binsweep.csv", sweep)
    print(f"selected bin width: {choice.delta:.9g} V "
          f"({'plateau' if choice.plateau else 'median fallback'})")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsosec",
        description="Simulate and analyze an intensity-modulated optical wiretap link.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML campaign configuration")
        p.add_argument("--out", default="fsosec_out", help="output directory")
        p.add_argument("--seed", type=int, help="override the simulation RNG seed")
        p.add_argument("--coherence-ms", type=float, dest="coherence_ms",
                       help="override the coherence slot length, milliseconds")
        p.add_argument("--delta-mv", type=float, dest="delta_mv",
                       help="force a fixed eavesdropper bin width, millivolts")
        p.add_argument("--rth-grid", dest="rth_grid",
                       help="outage targets as start:stop:points or a comma list, bits/s")
        p.add_argument("--workers", type=int, help="worker threads for per-slot analysis")

    p_sim = sub.add_parser("simulate", help="synthesize and persist a wiretap transmission")
    common(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_an = sub.add_parser("analyze", help="recover symbols and estimate secrecy metrics")
    common(p_an)
    p_an.add_argument("--dump-frames", action="store_true",
                      help="also write per-symbol frame CSVs")
    p_an.set_defaults(func=cmd_analyze)

    p_fl = sub.add_parser("finitelen", help="finite-length leakage-bound curves")
    common(p_fl)
    p_fl.set_defaults(func=cmd_finitelen)

    p_bs = sub.add_parser("binsweep", help="bin-width dependence of the eavesdropper MI")
    common(p_bs)
    p_bs.set_defaults(func=cmd_binsweep)
    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except FsosecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EstimationError as exc:  # pragma: no cover - subclass of FsosecError
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
