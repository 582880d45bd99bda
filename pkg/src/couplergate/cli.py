"""Command-line runner: one subcommand per experiment family.

Every run writes its data files plus ``manifest.json`` into the output
directory.  Exit status is 0 on success, 2 for configuration problems and
3 when a numerical stage fails (the stage is named on stderr).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import click
import numpy as np

from . import __version__
from .calibrate import (CalibrationError, CalibrationPlan, choose_pulse_shape, decoherence_sweep,
                        estimate_drive_frequencies, run_gate_protocol,
                        scan_drive_frequency)
from .config import ConfigError, ExperimentConfig, TABLES, load_config, shipped_config
from .dynamics import IntegrationError, PropagationSettings
from .floquet import FloquetQualityError, identify_leakage_candidates, quasienergy_map
from .hilbert import TWO_PI, computational_labels, fock_index, format_label, parse_label
from .perturbation import (ExtractionError, PerturbationContext, SingularPathError, closed_form_j12,
                           extract_j_from_dynamics, path_sum_j)
from .pulse import ConstantEnvelope, two_tone
from .spectrum import zz_sweep

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
NUMERICAL_ERRORS = (IntegrationError, CalibrationError, FloquetQualityError, ExtractionError,
                    SingularPathError, np.linalg.LinAlgError, FloatingPointError)


class StageFailure(click.ClickException):
    exit_code = EXIT_NUMERICAL

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")


class ConfigFailure(click.ClickException):
    exit_code = EXIT_CONFIG


def fmt(value) -> str:
    """Locale-free, round-trip number formatting; missing values become empty cells."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


@dataclass
class RunManifest:
    command: str
    config_digest: str
    started: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    stages: dict[str, float] = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except NUMERICAL_ERRORS as exc:
            raise StageFailure(getattr(exc, "stage", name), exc) from exc
        finally:
            self.stages[name] = round(time.perf_counter() - t0, 3)

    def record(self, path: Path, root: Path) -> None:
        self.files[path.relative_to(root).as_posix()] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write(self, root: Path) -> None:
        data = {"tool": "couplergate", "version": __version__, "command": self.command,
                "config_sha256": self.config_digest, "started": self.started,
                "finished": datetime.now(timezone.utc).isoformat(),
                "stage_seconds": self.stages, "files": dict(sorted(self.files.items()))}
        (root / "manifest.json").write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


class Run:
    """Output directory plus manifest bookkeeping for one subcommand."""

    def __init__(self, command: str, cfg: ExperimentConfig, out: Path):
        self.root = out
        self.root.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command, cfg.digest())

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.root / name
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        self.manifest.record(path, self.root)
        return path

    def json(self, name: str, payload) -> Path:
        path = self.root / name
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.manifest.record(path, self.root)
        return path

    def close(self):
        self.manifest.write(self.root)


def _load(config: str, levels: int | None, scenario: str | None) -> ExperimentConfig:
    try:
        cfg = shipped_config(config) if config in TABLES and not Path(config).exists() else load_config(config)
        if scenario is not None:
            cfg = cfg.with_scenario(scenario)
        if levels is not None:
            cfg = cfg.with_levels(levels)
    except ConfigError as exc:
        raise ConfigFailure(str(exc)) from None
    return cfg


def _linspace(spec, what: str) -> np.ndarray:
    start, stop, count = spec
    if int(count) != count or count < 1:
        raise ConfigFailure(f"{what}: point count must be a positive integer")
    return np.linspace(start, stop, int(count))


def common(fn):
    fn = click.option("--config", "config", required=True,
                      help="YAML config path, or one of the shipped tables: aba, abc, threeq.")(fn)
    fn = click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path), default=None,
                      help="Output directory (default: output.directory from the config).")(fn)
    fn = click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True)(fn)
    fn = click.option("--levels", type=click.IntRange(min=2), default=None,
                      help="Override the truncation of every mode.")(fn)
    fn = click.option("--scenario", default=None, help="Protocol name inside the config.")(fn)
    return fn


def _open(command, config, out, levels, scenario):
    cfg = _load(config, levels, scenario)
    root = out if out is not None else Path(cfg.section("output").get("directory", "out"))
    return cfg, Run(command, cfg, root)


@click.group()
@click.version_option(__version__)
def main():
    """Microwave-activated sqrt(iSWAP) gates through a driven transmon coupler."""


@main.command("zz-map")
@common
def zz_map(config, out, threads, levels, scenario):
    """Static ZZ over a grid of the two qubit frequencies."""
    cfg, run = _open("zz-map", config, out, levels, scenario)
    sec = cfg.section("zz_map")
    if not sec:
        raise ConfigFailure("config has no zz_map section")
    w1 = _linspace(sec["omega1_GHz"], "zz_map.omega1_GHz")
    w2 = _linspace(sec["omega2_GHz"], "zz_map.omega2_GHz")
    with run.manifest.stage("zz_sweep"):
        sweep = zz_sweep(cfg.device, w1, w2, cfg.protocol.pair, sec.get("min_overlap", 0.5), threads)
    run.csv("zz_map.csv", ["omega1_GHz", "omega2_GHz", "zeta_kHz", "log10_abs_zeta"], sweep.rows())
    run.close()


@main.command("j12-scan")
@common
@click.option("--dynamics/--no-dynamics", default=None, help="Also extract J from time-domain runs.")
def j12_scan(config, out, threads, levels, scenario, dynamics):
    """Effective coupling versus coupler anharmonicity."""
    cfg, run = _open("j12-scan", config, out, levels, scenario)
    sec = cfg.section("j12_scan")
    if not sec:
        raise ConfigFailure("config has no j12_scan section")
    dynamics = sec.get("dynamics", False) if dynamics is None else dynamics
    proto, device = cfg.protocol, cfg.device
    alphas = _linspace(sec["alpha_c_MHz"], "j12_scan.alpha_c_MHz")
    seeds = estimate_drive_frequencies(device, proto.pair, proto.detuning, proto.coupler)
    # keep the measured Stark offset of the working point when alpha_c moves
    offsets = (np.subtract(proto.frequencies, seeds) if proto.frequencies is not None else np.zeros(2))
    rows = []
    with run.manifest.stage("j12"):
        for a in alphas:
            dev = device.with_mode(proto.coupler, anharmonicity=a / 1e3)
            ctx = PerturbationContext.from_device(dev, (proto.amplitude,) * 2, proto.detuning,
                                                  proto.pair, proto.coupler)
            j_dyn = None
            if dynamics:
                freqs = np.add(estimate_drive_frequencies(dev, proto.pair, proto.detuning, proto.coupler),
                               offsets)
                sched = two_tone(proto.coupler, tuple(freqs), ConstantEnvelope(proto.amplitude))
                try:
                    j_dyn = extract_j_from_dynamics(dev, sched, sec.get("horizon_ns", 1200.0),
                                                    proto.pair) / TWO_PI * 1e3
                except ExtractionError:
                    j_dyn = math.nan
            rows.append((float(a), closed_form_j12(ctx) / TWO_PI * 1e3, path_sum_j(ctx) / TWO_PI * 1e3,
                         j_dyn))
    run.csv("j12_scan.csv", ["alpha_c_MHz", "J_closed_MHz", "J_pathsum_MHz", "J_dynamics_MHz"], rows)
    run.close()


def _tracked_labels(cfg: ExperimentConfig):
    device, proto = cfg.device, cfg.protocol
    labels = list(computational_labels(device, proto.pair))
    c = device.index_of(proto.coupler)
    for lab in labels[:3]:
        extra = list(lab)
        extra[c] = 2
        labels.append(tuple(extra))
    return labels


@main.command("gate-report")
@common
@click.option("--scan/--no-scan", default=False, show_default=True,
              help="Calibrate frequency and pulse shape instead of using the config values.")
@click.option("--basis", type=click.Choice(["dressed", "bare"]), default="dressed", show_default=True)
def gate_report_cmd(config, out, threads, levels, scenario, scan, basis):
    """Gate fidelities, fitted phases, leakage and population trajectories."""
    cfg, run = _open("gate-report", config, out, levels, scenario)
    with run.manifest.stage("gate_protocol"):
        result = run_gate_protocol(cfg, scan=scan, shape_search=scan, threads=threads, basis=basis)
    summary = {"scenario": result.scenario, **result.report.as_dict(),
               "frequencies_GHz": list(result.frequencies), "sigma_ns": result.sigma}
    run.json("gate_report.json", summary)
    tracked = _tracked_labels(cfg)
    for name, traj in result.trajectories.items():
        pops = traj.populations()
        idx = [fock_index(lab, cfg.device) for lab in tracked]
        rows = ([t, *pops[k, idx]] for k, t in enumerate(traj.times))
        run.csv(f"trajectory_{name}.csv", ["t_ns", *(format_label(lab) for lab in tracked)], rows)
    run.close()


@main.command("floquet-map")
@common
def floquet_map(config, out, threads, levels, scenario):
    """Quasienergies against drive scale and ranked leakage candidates."""
    cfg, run = _open("floquet-map", config, out, levels, scenario)
    sec = cfg.section("floquet")
    proto = cfg.protocol
    scales = _linspace(sec.get("scales", [0, 1, 11]), "floquet.scales")
    schedule = two_tone(proto.coupler, proto.frequencies, ConstantEnvelope(proto.amplitude))
    window = TWO_PI * sec.get("window_MHz", 100.0) / 1e3
    with run.manifest.stage("floquet"):
        qmap = quasienergy_map(cfg.device, schedule, scales, threads=threads)
    run.csv("quasienergies.csv", ["scale_s", "label", "quasienergy_GHz"], qmap.rows())
    ranking = {}
    for text in sec.get("states", []):
        state = parse_label(text, cfg.device)
        r = identify_leakage_candidates(qmap, state, window, proto.pair)
        ranking[format_label(state)] = {
            "warning": r.warning,
            "candidates": [{"label": format_label(c.label), "min_gap_MHz": c.min_gap / TWO_PI * 1e3,
                            "hybridization": c.hybridization} for c in r.candidates],
        }
    run.json("leakage_candidates.json", ranking)
    run.close()


@main.command("decoherence-sweep")
@common
@click.option("--scan/--no-scan", default=False, show_default=True)
def decoherence_cmd(config, out, threads, levels, scenario, scan):
    """Gate error under uniform relaxation and dephasing."""
    cfg, run = _open("decoherence-sweep", config, out, levels, scenario)
    sec = cfg.section("decoherence")
    if not sec.get("points"):
        raise ConfigFailure("config has no decoherence points")
    points = [(p.get("T1_us"), p.get("Tphi_us")) for p in sec["points"]]
    with run.manifest.stage("gate_protocol"):
        unitary = run_gate_protocol(cfg, scan=scan, shape_search=scan, threads=threads,
                                    trajectory_step=cfg.protocol.duration)
    with run.manifest.stage("lindblad"):
        res = decoherence_sweep(cfg, points, threads=threads, unitary=unitary)
    run.csv("decoherence.csv", ["T1_us", "Tphi_us", "gate_error"],
            ((p.t1, p.tphi, p.error) for p in res))
    run.close()


@main.command("calibrate")
@common
@click.option("--shape/--no-shape", default=False, show_default=True,
              help="Also search the pulse-shape grid at the refined frequency.")
def calibrate_cmd(config, out, threads, levels, scenario, shape):
    """Scan the second drive frequency (and optionally the pulse shape)."""
    cfg, run = _open("calibrate", config, out, levels, scenario)
    proto, device = cfg.protocol, cfg.device
    sec = cfg.section("calibration")
    seeds = estimate_drive_frequencies(device, proto.pair, proto.detuning, proto.coupler)
    freqs = proto.frequencies or seeds
    plan = CalibrationPlan(proto.detuning, proto.amplitude, sec.get("scan_window_MHz", 6.0) / 1e3,
                           sec.get("scan_step_MHz", 0.5) / 1e3)
    settings = PropagationSettings(rtol=sec.get("rtol", 1e-8), atol=sec.get("atol", 1e-10))
    with run.manifest.stage("scan"):
        scan = scan_drive_frequency(device, freqs[0], plan.scan_values(freqs[1]), proto.amplitude,
                                    proto.pair, proto.coupler, proto.detuning, sec.get("horizon_ns"),
                                    sec.get("samples", 601), settings, threads)
    run.csv("scan.csv", ["omega2d_GHz", "max_transfer"], scan.rows())
    payload = {"scenario": proto.name, "seed_frequencies_GHz": list(seeds),
               "omega1d_GHz": freqs[0], "omega2d_GHz": scan.optimum, "horizon_ns": scan.horizon,
               "note": scan.note,
               "scan": [{"omega2d_GHz": v, "max_transfer": o} for v, o in scan.rows()]}
    if shape:
        with run.manifest.stage("shape"):
            res = choose_pulse_shape(device, (freqs[0], scan.optimum), proto.amplitude,
                                     sec.get("sigma_grid_ns", [proto.sigma]),
                                     sec.get("duration_grid_ns", [proto.duration]), proto.pair,
                                     proto.coupler, proto.ramp_ratio, settings, threads)
        run.csv("shape.csv", ["sigma_ns", "duration_ns", "fidelity_cond"], res.rows())
        payload["sigma_ns"], payload["duration_ns"] = res.sigma, res.duration
    run.json("calibration.json", payload)
    run.close()


if __name__ == "__main__":  # pragma: no cover
    main()
