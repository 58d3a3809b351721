# models.py
"""
Pydantic-Modelle für Konfiguration, Berichte und Manifeste.
"""
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class GeometryReport(BaseModel):
    """
    Alle skalaren Funktionale eines Profils.
    """
    model_config = ConfigDict(populate_by_name=True, frozen=True)

    sigma: float = Field(..., gt=0, description="Länge der Kurve")
    lambda_: float = Field(..., gt=0, alias="lambda", description="Eingeschlossene Fläche")
    h: float = Field(..., description="Isoperimetrisches Verhältnis sigma/lambda")
    entropy: float = Field(..., description="Integral von log(rho) über theta")
    deficit: float = Field(..., description="sigma^2 - 4 pi lambda")
    psi: float = Field(..., description="ln(sigma/lambda^2)")
    rho_min: float
    rho_max: float
    pseudo_median: float
    r_int: float
    r_out: float
    int_rho: float = Field(..., description="Integral von rho d theta (= Integral rho^2 ds)")
    gage_slack: float
    green_osher_slack: float
    bonnesen_ok: bool
    closure_residual: float = 0.0

    @property
    def isoperimetric_ratio(self):
        return self.sigma ** 2 / self.lambda_


class FlowConfig(BaseModel):
    """
    Laufparameter für deterministische und stochastische Flüsse.
    """
    t_end: float = Field(..., gt=0, description="Endzeit")
    cfl: float = Field(0.4, gt=0, le=0.5, description="CFL-Zahl relativ zum Drei-Punkte-Laplace")
    dt_max: float = Field(1e-2, gt=0, description="Obere Schranke für dt")
    dt: Optional[float] = Field(None, gt=0, description="Fester Zeitschritt (wird gegen CFL geprüft)")
    record_every: int = Field(10, ge=0, description="Aufzeichnung alle k Schritte, 0 = nur Landezeiten")
    record_times: List[float] = Field(default_factory=list, description="Exakte Aufzeichnungszeiten")
    record_profiles: bool = True
    scheme: Literal["rk4_explicit"] = "rk4_explicit"
    derivative_method: Literal["spectral", "fd4"] = "spectral"
    rho_floor: float = Field(1e-6, gt=0)
    rho_cap: float = Field(1e6, gt=0)
    enforce_symmetry: bool = False
    noise_form: Literal["curvature", "radius"] = "curvature"
    noise_off: bool = False
    noise_cap: bool = True
    max_steps: int = Field(10_000_000, gt=0)

    @model_validator(mode="after")
    def _check_bounds(self):
        if self.rho_floor >= self.rho_cap:
            raise ValueError("rho_floor muss kleiner als rho_cap sein")
        if any(t < 0 or t > self.t_end for t in self.record_times):
            raise ValueError("record_times müssen in [0, t_end] liegen")
        return self


class ClaimResult(BaseModel):
    """
    Ergebnis einer einzelnen Monitor-Aussage. margin < 0 bedeutet Verletzung.
    passed = None: nicht anwendbar / keine Aussage.
    """
    name: str
    passed: Optional[bool]
    margin: float
    detail: str = ""


class AuditReport(BaseModel):
    kind: str
    claims: List[ClaimResult]

    @property
    def all_passed(self):
        return all(claim.passed is not False for claim in self.claims)

    @property
    def failures(self):
        return [claim for claim in self.claims if claim.passed is False]

    def claim(self, name):
        for claim in self.claims:
            if claim.name == name:
                return claim
        raise KeyError(name)


class RunManifest(BaseModel):
    """
    Ein Manifest pro Ausgabeverzeichnis.
    """
    command: str
    config: dict = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=list)
    tool_version: str
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    wall_clock_seconds: float = 0.0
