# cli.py
"""
Kommandozeile: generate, run, check, ensemble.

Exit-Codes: 0 = alle Prüfungen bestanden, 1 = mindestens eine Prüfung
verletzt, 2 = ungültige Eingabe (Parameter, Datei, CFL).
"""
import functools
import logging
import time
from pathlib import Path

import click
from pydantic import ValidationError

from . import __version__
from .curve_geometry import circle_profile, ellipse_profile, geometry_report, inequality_slacks, resample_profile
from .ensemble_stats import EnsembleConfig, martingale_tests, run_ensemble
from .errors import CurveFlowError
from .flow_deterministic import deterministic_monitor_audit, run_rcf
from .flow_stochastic import pathwise_monitor_audit, run_scf, run_srcf, sde_coefficient_check
from .json_io import (read_profile, save_to_json, write_manifest, write_profile, write_snapshots,
                      write_trajectory)
from .models import FlowConfig, RunManifest
from .settings import configure_logging
from .spectral import AngleGrid
from .symmetry_skeleton import (SupportFourier, class_membership, extract_skeleton, flower_generator,
                                grid_for_order, isoperimetric_estimate_check)


logger = logging.getLogger(__name__)

EXIT_FAILED = 1
EXIT_INVALID = 2


def _fail(message):
    click.echo(f"Fehler: {message}", err=True)
    raise SystemExit(EXIT_INVALID)


def _invalid_input(func):
    """CurveFlowError und ValidationError werden zu einer einzeiligen Diagnose mit Exit-Code 2."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CurveFlowError as e:
            _fail(f"{type(e).__name__}: {e.detail}")
        except ValidationError as e:
            first = e.errors()[0]
            location = ".".join(str(part) for part in first["loc"]) or "config"
            _fail(f"{location}: {first['msg']}")
    return wrapper


def _manifest(command, out, config, seeds=(), inputs=(), outputs=(), start_time=None):
    manifest = RunManifest(command=command, config=config, seeds=list(seeds), tool_version=__version__,
                           inputs=[str(p) for p in inputs], outputs=[str(p) for p in outputs],
                           wall_clock_seconds=time.time() - start_time if start_time else 0.0)
    return write_manifest(manifest, out)


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING (sonst CURVEFLOW_LOG_LEVEL)")
@click.version_option(__version__, prog_name="curveflow")
def main(log_level):
    """Simulator und Prüfwerkzeug für (stochastische) renormalisierte Krümmungsflüsse konvexer Kurven."""
    configure_logging(log_level)


def _resampled(profile, samples):
    if not samples:
        return profile
    try:
        grid = AngleGrid(samples)
    except ValueError as e:
        _fail(str(e))
    return resample_profile(profile, grid)


def _parse_modes(values):
    modes = {}
    for value in values:
        try:
            k, amplitude = value.split(":")
            modes[int(k)] = float(amplitude)
        except ValueError:
            _fail(f"--mode erwartet k:wert, nicht '{value}'")
    return modes


@main.command()
@click.argument("kind", type=click.Choice(["circle", "ellipse", "flower", "support-fourier"]))
@click.option("--radius", default=1.0, show_default=True, type=float)
@click.option("--a", "axis_a", default=2.0, show_default=True, type=float, help="Halbachse in x")
@click.option("--b", "axis_b", default=1.0, show_default=True, type=float, help="Halbachse in y")
@click.option("--n", "order", default=3, show_default=True, type=int, help="Symmetrieordnung")
@click.option("--eps", default=0.05, show_default=True, type=float)
@click.option("--a0", default=1.0, show_default=True, type=float)
@click.option("--mode", "modes", multiple=True, help="support-fourier: k:wert für den cos(k n theta)-Mode von 1/rho")
@click.option("--samples", default=None, type=int, help="Gitterpunkte (Default 256 bzw. Vielfaches von 2n)")
@click.option("--out", "out", default="out", show_default=True, type=click.Path(file_okay=False))
@_invalid_input
def generate(kind, radius, axis_a, axis_b, order, eps, a0, modes, samples, out):
    """Erzeugt eine Profildatei (profile.json) und ein Manifest."""
    start_time = time.time()
    try:
        grid = AngleGrid(samples) if samples else None
    except ValueError as e:
        _fail(str(e))
    if kind == "circle":
        profile = circle_profile(radius, grid)
    elif kind == "ellipse":
        profile = ellipse_profile(axis_a, axis_b, grid)
    elif kind == "flower":
        profile = flower_generator(order, eps, a0, grid)
    else:
        fourier = SupportFourier.from_radius_modes(order, a0, _parse_modes(modes))
        profile = fourier.to_profile(grid or grid_for_order(order))

    out = Path(out)
    path = write_profile(profile, out / "profile.json")
    config = {"kind": kind, "radius": radius, "a": axis_a, "b": axis_b, "n": order, "eps": eps, "a0": a0,
              "modes": list(modes), "samples": profile.grid.n_samples}
    _manifest("generate", out, config, outputs=[path], start_time=start_time)
    click.echo(str(path))


@main.command()
@click.argument("profile_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--flow", type=click.Choice(["rcf", "srcf", "scf"]), default="rcf", show_default=True)
@click.option("--t-end", default=1.0, show_default=True, type=float)
@click.option("--dt-max", default=1e-2, show_default=True, type=float)
@click.option("--dt", default=None, type=float, help="Fester Zeitschritt (wird gegen CFL geprüft)")
@click.option("--cfl", default=0.4, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--record-every", default=10, show_default=True, type=int)
@click.option("--enforce-symmetry", is_flag=True)
@click.option("--noise-off", is_flag=True, help="Debug: SRCF-Drift ohne Rauschen")
@click.option("--noise-form", type=click.Choice(["curvature", "radius"]), default="curvature", show_default=True)
@click.option("--samples", default=None, type=int, help="Profil vor dem Lauf auf N Punkte neu abtasten")
@click.option("--snapshots", is_flag=True, help="Profile als Einzeldateien schreiben")
@click.option("--out", "out", default="out", show_default=True, type=click.Path(file_okay=False))
@_invalid_input
def run(profile_file, flow, t_end, dt_max, dt, cfl, seed, record_every, enforce_symmetry, noise_off,
        noise_form, samples, snapshots, out):
    """Integriert RCF, SRCF oder SCF, schreibt trajectory.jsonl und audit.json."""
    start_time = time.time()
    logging.info("Programm Start")
    initial = _resampled(read_profile(profile_file), samples)
    config = FlowConfig(t_end=t_end, dt_max=dt_max, dt=dt, cfl=cfl, record_every=record_every,
                        enforce_symmetry=enforce_symmetry, noise_off=noise_off, noise_form=noise_form)

    if flow == "rcf":
        trajectory = run_rcf(initial, config)
        audit = deterministic_monitor_audit(trajectory)
        header = {"flow": flow}
    else:
        outcome = (run_srcf if flow == "srcf" else run_scf)(initial, config, seed)
        trajectory = outcome.trajectory
        audit = pathwise_monitor_audit(outcome)
        if record_every == 1:
            audit.claims.append(sde_coefficient_check(outcome).as_claim())
        header = {"flow": flow, "seed": seed, "noise_form": noise_form}

    out = Path(out)
    outputs = [write_trajectory(trajectory, out / "trajectory.jsonl", header=header)]
    if snapshots:
        outputs.extend(write_snapshots(trajectory, out / "snapshots"))
    result = {"stop_reason": trajectory.stop_reason, "final_time": trajectory.final_time,
              "steps": trajectory.steps, "audit": audit.model_dump(),
              "failures": [claim.name for claim in audit.failures]}
    outputs.append(save_to_json(result, out / "audit.json"))
    manifest_config = {"flow": flow, "samples": initial.grid.n_samples, **config.model_dump()}
    _manifest("run", out, manifest_config, seeds=[seed] if flow != "rcf" else [], inputs=[profile_file],
              outputs=outputs, start_time=start_time)

    for claim in audit.claims:
        status = {True: "ok", False: "VERLETZT", None: "-"}[claim.passed]
        click.echo(f"{claim.name:36s} {status:9s} {claim.margin: .3e}")
    ok = audit.all_passed and trajectory.stop_reason == "completed"
    logging.info(f"Programm beendet. Laufzeit: {time.time() - start_time:.2f} Sekunden.")
    if not ok:
        click.echo(f"Fehlgeschlagen: {', '.join(result['failures']) or trajectory.stop_reason}", err=True)
        raise SystemExit(EXIT_FAILED)


@main.command()
@click.argument("profile_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out", default="out", show_default=True, type=click.Path(file_okay=False))
@_invalid_input
def check(profile_file, out):
    """Statische Ungleichungen, bei Symmetrie zusätzlich Skelett und isoperimetrische Kette."""
    start_time = time.time()
    profile = read_profile(profile_file)
    report = geometry_report(profile)
    slacks, tol = inequality_slacks(report)
    violated = [name for name, value in slacks.items() if value < -tol]
    result = {"report": report.model_dump(by_alias=True), "slacks": slacks, "tolerance": tol}

    n = profile.symmetry_order
    if n >= 2:
        membership = class_membership(profile, n)
        result["membership"] = membership.model_dump()
        if not membership.implication_holds:
            violated.append("sector_implication")
        if membership.in_Sn:
            result["skeleton"] = extract_skeleton(profile, n).model_dump()
            chain = isoperimetric_estimate_check(profile, n)
            result["chain"] = chain.model_dump()
            if not chain.chain_holds:
                violated.append("isoperimetric_chain")
    result["violated"] = violated

    out = Path(out)
    path = save_to_json(result, out / "check.json")
    _manifest("check", out, {}, inputs=[profile_file], outputs=[path], start_time=start_time)
    for name, value in slacks.items():
        click.echo(f"{name:16s} {value: .6e}")
    if violated:
        click.echo(f"Verletzt: {', '.join(violated)}", err=True)
        raise SystemExit(EXIT_FAILED)


@main.command()
@click.argument("profile_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--flow", type=click.Choice(["srcf", "scf"]), default="srcf", show_default=True)
@click.option("--paths", default=256, show_default=True, type=int)
@click.option("--t-end", default=0.25, show_default=True, type=float)
@click.option("--checkpoint", "checkpoints", multiple=True, type=float)
@click.option("--base-seed", default=0, show_default=True, type=int)
@click.option("--dt-max", default=1e-2, show_default=True, type=float)
@click.option("--cfl", default=0.4, show_default=True, type=float)
@click.option("--noise-form", type=click.Choice(["curvature", "radius"]), default="curvature", show_default=True)
@click.option("--enforce-symmetry", is_flag=True)
@click.option("--record-every", default=0, show_default=True, type=int, help="Zusätzliche Aufzeichnung je Pfad")
@click.option("--samples", default=None, type=int, help="Profil vor dem Lauf auf N Punkte neu abtasten")
@click.option("--quiet", is_flag=True, help="Keine Fortschrittsanzeige")
@click.option("--out", "out", default="out", show_default=True, type=click.Path(file_okay=False))
@_invalid_input
def ensemble(profile_file, flow, paths, t_end, checkpoints, base_seed, dt_max, cfl, noise_form, enforce_symmetry,
             record_every, samples, quiet, out):
    """Monte-Carlo-Ensemble mit Martingal-Tests; stats.json und ein JSONL pro Pfad."""
    start_time = time.time()
    logging.info("Programm Start")
    initial = _resampled(read_profile(profile_file), samples)
    flow_config = FlowConfig(t_end=t_end, dt_max=dt_max, cfl=cfl, noise_form=noise_form,
                             enforce_symmetry=enforce_symmetry)
    config = EnsembleConfig(n_paths=paths, base_seed=base_seed, flow=flow, checkpoints=list(checkpoints),
                            record_every=record_every, flow_config=flow_config)
    stats, records = run_ensemble(initial, config, progress=not quiet)
    verdicts = martingale_tests(stats, records)

    out = Path(out)
    outputs = []
    for record in records:
        header = {"flow": flow, "seed": record.seed, "noise_form": noise_form}
        outputs.append(write_trajectory(record.trajectory, out / "paths" / f"path_{record.index:04d}.jsonl",
                                        header=header))
    outputs.append(save_to_json({"stats": stats.model_dump(), "verdicts": verdicts.model_dump()},
                                out / "stats.json"))
    manifest_config = {"samples": initial.grid.n_samples, **config.model_dump()}
    _manifest("ensemble", out, manifest_config, seeds=[r.seed for r in records], inputs=[profile_file],
              outputs=outputs, start_time=start_time)

    for v in verdicts.verdicts:
        click.echo(f"{v.name:26s} {v.status}")
    logging.info(f"Programm beendet. Laufzeit: {time.time() - start_time:.2f} Sekunden.")
    if not verdicts.all_passed:
        raise SystemExit(EXIT_FAILED)
