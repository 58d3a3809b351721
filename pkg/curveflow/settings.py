# settings.py
import logging
import os

from dotenv import load_dotenv


# .env im Arbeitsverzeichnis ist optional
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DEFAULT_MAX_THREADS = 8


def configure_logging(level=None):
    """
    Logging einmalig konfigurieren (Einstiegspunkt der CLI).
    :param level: Name oder Zahl des Levels; sonst CURVEFLOW_LOG_LEVEL oder INFO.
    """
    if level is None:
        level = os.getenv("CURVEFLOW_LOG_LEVEL", "INFO")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def thread_count():
    """
    Anzahl der Worker-Threads für Ensembles.
    CURVEFLOW_THREADS begrenzt die Parallelität; ungültige Werte fallen auf den Default zurück.
    """
    default = min(DEFAULT_MAX_THREADS, os.cpu_count() or 1)
    raw = os.getenv("CURVEFLOW_THREADS")
    if not raw:
        return default
    try:
        value = int(raw)
    except ValueError:
        logging.getLogger(__name__).warning(f"CURVEFLOW_THREADS='{raw}' ist keine Zahl, nutze {default}")
        return default
    return max(1, value)
