# errors.py
"""
Fehlerklassen für curveflow.

Alle Fehler tragen ein ``detail`` mit dem verletzten Constraint, damit die CLI
eine einzeilige Diagnose ausgeben kann.
"""


class CurveFlowError(Exception):
    """Basisklasse aller curveflow-Fehler."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class PositivityLost(CurveFlowError):
    """rho (bzw. 1/rho) ist an mindestens einem Knoten nicht mehr positiv."""


class NotClosed(CurveFlowError):
    """Die rekonstruierte Kurve schließt sich nicht."""


class NotConvex(CurveFlowError):
    """p + p'' <= 0 oder Generator-Parameter verletzen die Konvexität."""


class CenterOutside(CurveFlowError):
    """Das Zentrum liegt nicht im Inneren der Kurve."""


class NotSymmetric(CurveFlowError):
    """Profil ist nicht G_n-symmetrisch oder das Gitter passt nicht zu n."""


class NotInSn(CurveFlowError):
    """Profil liegt nicht in der Klasse S_n (Pi nicht monoton)."""


class InsufficientSnapshots(CurveFlowError):
    """Zu wenige Aufzeichnungen für finite Differenzen."""


class InsufficientPaths(CurveFlowError):
    """Zu wenige Pfade für die asymptotischen Tests."""


class CflViolation(CurveFlowError):
    """Fester Zeitschritt verletzt die CFL-Schranke."""


class ProfileFormatError(CurveFlowError):
    """Profil- oder Manifest-Datei ist nicht lesbar oder unvollständig."""
