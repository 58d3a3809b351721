# json_io.py
"""
Dateiformate: Profile (JSON), Trajektorien (JSON Lines mit Kopfzeile),
Manifeste und Statistiken (JSON).
"""
import json
import logging
from pathlib import Path

from pydantic import ValidationError

from .curve_geometry import CurvatureProfile
from .errors import ProfileFormatError
from .models import RunManifest
from .spectral import AngleGrid


logger = logging.getLogger(__name__)

PROFILE_FORMAT = "curveflow-profile"
PROFILE_VERSION = 1
MANIFEST_NAME = "manifest.json"
PROFILE_FIELDS = ("n_samples", "rho", "symmetry_order", "base_point")


def profile_to_dict(profile):
    return {
        "format": PROFILE_FORMAT,
        "version": PROFILE_VERSION,
        "n_samples": profile.grid.n_samples,
        "symmetry_order": profile.symmetry_order,
        "base_point": list(profile.base_point),
        "rho": [float(v) for v in profile.rho],
    }


def profile_from_dict(data):
    """
    Pflichtfelder sind n_samples, rho, symmetry_order und base_point; "format" ist optional,
    muss aber, falls vorhanden, curveflow-profile sein.
    :raises ProfileFormatError: bei fehlenden Feldern oder falscher Länge.
    :raises PositivityLost: wenn rho nicht überall positiv ist.
    """
    if not isinstance(data, dict):
        raise ProfileFormatError("Profil muss ein JSON-Objekt sein")
    if data.get("format", PROFILE_FORMAT) != PROFILE_FORMAT:
        raise ProfileFormatError(f"Kein {PROFILE_FORMAT}-Dokument (format = {data['format']!r})")
    missing = [key for key in PROFILE_FIELDS if key not in data]
    if missing:
        raise ProfileFormatError(f"Fehlende Felder: {', '.join(missing)}")
    rho, base_point = data["rho"], data["base_point"]
    if not isinstance(rho, list) or len(rho) != data["n_samples"]:
        raise ProfileFormatError(f"rho muss eine Liste mit n_samples = {data['n_samples']} Werten sein")
    if not isinstance(base_point, list) or len(base_point) != 2:
        raise ProfileFormatError("base_point muss zwei Koordinaten haben")
    try:
        grid = AngleGrid(int(data["n_samples"]))
        return CurvatureProfile(grid=grid, rho=rho, symmetry_order=int(data["symmetry_order"]),
                                base_point=tuple(base_point))
    except (TypeError, ValueError) as e:
        raise ProfileFormatError(str(e)) from e


def save_to_json(data, path):
    """Schreibt ein JSON-Dokument; IO-Fehler werden geloggt und weitergereicht."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
        logger.info(f"Datei {path} gespeichert")
    except IOError as e:
        logger.error(f"Fehler beim Speichern der Datei '{path}': {e}")
        raise
    return path


def load_json(path):
    try:
        with open(path, encoding='utf-8') as f:
            return json.load(f)
    except (IOError, json.JSONDecodeError) as e:
        raise ProfileFormatError(f"'{path}' ist nicht lesbar: {e}") from e


def write_profile(profile, path):
    return save_to_json(profile_to_dict(profile), path)


def read_profile(path):
    return profile_from_dict(load_json(path))


def write_trajectory(trajectory, path, header=None):
    """
    JSON Lines: optionale Kopfzeile {"header": true, ...}, dann eine Zeile pro Aufzeichnung.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            if header is not None:
                f.write(json.dumps({"header": True, **header}) + "\n")
            for row in trajectory.rows():
                f.write(json.dumps(row) + "\n")
        logger.info(f"Trajektorie mit {len(trajectory.times)} Zeilen in {path} gespeichert")
    except IOError as e:
        logger.error(f"Fehler beim Speichern der Trajektorie '{path}': {e}")
        raise
    return path


def read_trajectory(path):
    """(Kopfzeile oder None, Liste der Zeilen)"""
    header, rows = None, []
    try:
        with open(path, encoding='utf-8') as f:
            for line in f:
                if not line.strip():
                    continue
                row = json.loads(line)
                if row.get("header"):
                    header = row
                else:
                    rows.append(row)
    except (IOError, json.JSONDecodeError) as e:
        raise ProfileFormatError(f"Trajektorie '{path}' ist nicht lesbar: {e}") from e
    return header, rows


def write_snapshots(trajectory, directory):
    """Profil-Schnappschüsse als Einzeldateien snapshot_00000.json, ..."""
    directory = Path(directory)
    paths = []
    for k, (t, profile) in enumerate(zip(trajectory.times, trajectory.profiles)):
        data = profile_to_dict(profile)
        data["t"] = t
        paths.append(save_to_json(data, directory / f"snapshot_{k:05d}.json"))
    return paths


def write_manifest(manifest, directory):
    path = Path(directory) / MANIFEST_NAME
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.model_dump_json(indent=2), encoding='utf-8')
    except IOError as e:
        logger.error(f"Fehler beim Speichern des Manifests '{path}': {e}")
        raise
    return path


def read_manifest(directory):
    path = Path(directory) / MANIFEST_NAME
    try:
        return RunManifest.model_validate_json(path.read_text(encoding='utf-8'))
    except IOError as e:
        raise ProfileFormatError(f"Manifest '{path}' ist nicht lesbar: {e}") from e
    except ValidationError as e:
        raise ProfileFormatError(f"Manifest '{path}' ist ungültig: {e.errors()[0]['msg']}") from e
