# ensemble_stats.py
"""
Monte-Carlo-Ensembles unabhängiger SRCF/SCF-Pfade und Tests der
(Super-)Martingal-Aussagen über die Mittelwerte am Endzeitpunkt.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from tqdm import tqdm

from .errors import InsufficientPaths
from .flow_stochastic import run_scf, run_srcf
from .models import FlowConfig
from .settings import thread_count


logger = logging.getLogger(__name__)

QUANTITIES = ("h", "inv_lambda", "entropy", "deficit")
MIN_PATHS = 30
SE_FACTOR = 3.0
CHECKPOINT_TOL = 1e-9


class EnsembleConfig(BaseModel):
    """
    Ensemble-Parameter. Pfad i läuft mit seed = base_seed + i.
    """
    n_paths: int = Field(256, ge=1)
    base_seed: int = Field(0, ge=0, lt=2 ** 63)
    flow: Literal["srcf", "scf"] = "srcf"
    flow_config: FlowConfig
    checkpoints: List[float] = Field(default_factory=list, description="Auswertezeiten; 0 und t_end kommen dazu")
    quantities: List[Literal["h", "inv_lambda", "entropy", "deficit"]] = Field(default_factory=lambda: list(QUANTITIES))
    max_workers: Optional[int] = Field(None, ge=1)
    record_every: int = Field(0, ge=0, description="Zusätzliche Aufzeichnung alle k Schritte, 0 = nur Checkpoints")

    @model_validator(mode="after")
    def _check_checkpoints(self):
        t_end = self.flow_config.t_end
        if any(t < 0 or t > t_end for t in self.checkpoints):
            raise ValueError(f"checkpoints müssen in [0, {t_end}] liegen")
        return self

    @property
    def all_checkpoints(self):
        return sorted({0.0, float(self.flow_config.t_end)} | {float(t) for t in self.checkpoints})

    def path_config(self):
        """FlowConfig für einen Pfad: Checkpoints und alle record_every Schritte, ohne Profile."""
        return self.flow_config.model_copy(update={
            "record_times": [t for t in self.all_checkpoints if t > 0],
            "record_every": self.record_every,
            "record_profiles": False,
        })


@dataclass
class PathRecord:
    """Werte eines Pfads an allen Checkpoints; gestoppte Pfade tragen ihren letzten Wert weiter."""
    index: int
    seed: int
    stop_reason: str
    final_time: float
    values: Dict[str, List[float]] = field(default_factory=dict)
    alive: List[bool] = field(default_factory=list)
    trajectory: object = None


class CheckpointStats(BaseModel):
    t: float
    quantity: str
    mean: float
    std: float
    se: float
    survivors: int
    survivor_mean: Optional[float] = None
    survivor_se: Optional[float] = None


class EnsembleStats(BaseModel):
    n_paths: int
    base_seed: int
    flow: str
    symmetry_order: int
    checkpoints: List[float]
    quantities: List[str]
    table: List[CheckpointStats]
    stopped: Dict[str, int] = Field(default_factory=dict, description="stop_reason -> Anzahl")

    def entry(self, t, quantity):
        for row in self.table:
            if row.quantity == quantity and abs(row.t - t) <= CHECKPOINT_TOL:
                return row
        raise KeyError((t, quantity))


class Verdict(BaseModel):
    name: str
    status: Literal["pass", "fail", "no-claim"]
    statistic: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""


class VerdictReport(BaseModel):
    t: float
    verdicts: List[Verdict]
    survivor_sensitivity: List[Verdict] = Field(default_factory=list)

    @property
    def all_passed(self):
        return all(v.status != "fail" for v in self.verdicts)

    def verdict(self, name):
        for v in self.verdicts:
            if v.name == name:
                return v
        raise KeyError(name)


def _quantity(report, name):
    if name == "inv_lambda":
        return 1.0 / report.lambda_
    return float(getattr(report, name))


def _path_record(index, seed, outcome, checkpoints, quantities):
    traj = outcome.trajectory
    times = np.asarray(traj.times)
    record = PathRecord(index=index, seed=seed, stop_reason=traj.stop_reason,
                        final_time=traj.final_time, trajectory=traj)
    record.values = {name: [] for name in quantities}
    for t in checkpoints:
        hits = np.flatnonzero(np.abs(times - t) <= CHECKPOINT_TOL)
        alive = hits.size > 0
        # gestoppt: letzter aufgezeichneter Wert
        position = int(hits[0]) if alive else len(traj.reports) - 1
        record.alive.append(bool(alive))
        for name in quantities:
            record.values[name].append(_quantity(traj.reports[position], name))
    return record


def _simulate(initial, config, index):
    seed = config.base_seed + index
    runner = run_srcf if config.flow == "srcf" else run_scf
    outcome = runner(initial, config.path_config(), seed)
    return _path_record(index, seed, outcome, config.all_checkpoints, config.quantities)


def _stats(records, config, symmetry_order):
    table = []
    for k, t in enumerate(config.all_checkpoints):
        alive = np.array([r.alive[k] for r in records], dtype=bool)
        for name in config.quantities:
            values = np.array([r.values[name][k] for r in records], dtype=float)
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            row = CheckpointStats(t=t, quantity=name, mean=float(values.mean()), std=std,
                                  se=std / np.sqrt(values.size), survivors=int(alive.sum()))
            survivors = values[alive]
            if survivors.size > 1:
                row.survivor_mean = float(survivors.mean())
                row.survivor_se = float(survivors.std(ddof=1) / np.sqrt(survivors.size))
            table.append(row)
    stopped = {}
    for r in records:
        if r.stop_reason != "completed":
            stopped[r.stop_reason] = stopped.get(r.stop_reason, 0) + 1
    return EnsembleStats(n_paths=len(records), base_seed=config.base_seed, flow=config.flow,
                         symmetry_order=symmetry_order, checkpoints=config.all_checkpoints,
                         quantities=list(config.quantities), table=table, stopped=stopped)


def run_ensemble(initial, config, progress=True):
    """
    n_paths unabhängige Pfade parallel; Aggregation immer in Pfad-Reihenfolge.
    Fehlgeschlagene Pfade werden geloggt und fehlen im Ensemble (mit Warnung).
    :return: (EnsembleStats, Liste der PathRecords nach Index)
    """
    workers = config.max_workers or thread_count()
    start_time = time.time()
    logger.info(f"Ensemble Start: {config.n_paths} Pfade ({config.flow}), base_seed={config.base_seed}, "
                f"{workers} Threads")
    results = {}

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(_simulate, initial, config, i): i for i in range(config.n_paths)}
        for future in tqdm(as_completed(futures), total=len(futures), desc="Pfade", unit="Pfad", disable=not progress):
            index = futures[future]
            try:
                record = future.result()
                results[index] = record
                logger.debug(f"Pfad {index} fertig ({record.stop_reason}, t={record.final_time:.4g})")
            except Exception as e:
                logger.error(f"Pfad {index} (seed {config.base_seed + index}) Fehler: {e}", exc_info=True)

    records = [results[i] for i in sorted(results)]
    if len(records) < config.n_paths:
        logger.warning(f"Unvollständiges Ensemble: {len(records)} von {config.n_paths} Pfaden")
    stopped = sum(r.stop_reason != "completed" for r in records)
    if stopped:
        logger.warning(f"{stopped} Pfade vor t_end gestoppt (Werte werden weitergetragen)")
    duration = time.time() - start_time
    logger.info(f"Ensemble beendet. Laufzeit: {duration:.2f} Sekunden.")
    return _stats(records, config, initial.symmetry_order), records


def _upper_test(name, row, start):
    threshold = start + SE_FACTOR * row.se
    return Verdict(name=name, status="pass" if row.mean <= threshold + 1e-12 * max(1.0, abs(start)) else "fail",
                   statistic=row.mean, threshold=threshold, detail=f"SE = {row.se:.3e}")


def _two_sided_test(name, row, start):
    deviation = abs(row.mean - start)
    threshold = SE_FACTOR * row.se
    return Verdict(name=name, status="pass" if deviation <= threshold + 1e-12 * max(1.0, abs(start)) else "fail",
                   statistic=deviation, threshold=threshold, detail=f"mean = {row.mean:.6g}, start = {start:.6g}")


def _survivor_row(row):
    if row.survivor_mean is None:
        return None
    return CheckpointStats(t=row.t, quantity=row.quantity, mean=row.survivor_mean, std=0.0,
                           se=row.survivor_se, survivors=row.survivors)


def _verdicts(stats, t_end, use_survivors=False):
    verdicts = []

    def rows(quantity):
        if quantity not in stats.quantities:
            return None, None
        start = stats.entry(0.0, quantity).mean
        row = stats.entry(t_end, quantity)
        if use_survivors:
            row = _survivor_row(row)
        return row, start

    srcf = stats.flow == "srcf"
    row, start = rows("inv_lambda")
    if row is None or not srcf:
        verdicts.append(Verdict(name="inv_lambda_martingale", status="no-claim",
                                detail="nur für SRCF" if srcf else "SCF: keine Aussage"))
    else:
        verdicts.append(_two_sided_test("inv_lambda_martingale", row, start))

    row, start = rows("h")
    if row is None or not srcf:
        verdicts.append(Verdict(name="h_supermartingale", status="no-claim"))
    else:
        verdicts.append(_upper_test("h_supermartingale", row, start))

    row, start = rows("entropy")
    if row is None or not srcf or stats.symmetry_order < 3:
        reason = "Symmetrieordnung < 3" if stats.symmetry_order < 3 else "nur für SRCF"
        verdicts.append(Verdict(name="entropy_supermartingale", status="no-claim", detail=reason))
    else:
        verdicts.append(_upper_test("entropy_supermartingale", row, start))
    return verdicts


def martingale_tests(stats, raw=None):
    """
    (a) mean(1/lambda_T) = 1/lambda_0 bis auf 3 SE, (b) mean(h_T) <= h_0 + 3 SE,
    (c) mean(Ent_T) <= Ent_0 + 3 SE nur für n >= 3; alles auf allen Pfaden mit
    weitergetragenen Werten. Zusätzlich die Variante nur mit überlebenden Pfaden.
    :raises InsufficientPaths: bei weniger als 30 Pfaden.
    """
    n_paths = len(raw) if raw is not None else stats.n_paths
    if n_paths < MIN_PATHS:
        raise InsufficientPaths(f"{n_paths} Pfade, mindestens {MIN_PATHS} nötig")
    if not any(abs(t) <= CHECKPOINT_TOL for t in stats.checkpoints):
        raise ValueError("Checkpoints müssen t = 0 enthalten")
    t_end = max(stats.checkpoints)
    report = VerdictReport(t=t_end, verdicts=_verdicts(stats, t_end),
                           survivor_sensitivity=_verdicts(stats, t_end, use_survivors=True))
    for v in report.verdicts:
        logger.info(f"Verdikt {v.name}: {v.status} {v.detail}")
    return report
