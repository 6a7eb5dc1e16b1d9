"""Pydantic request/response models for the compute service."""

from __future__ import annotations

import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .decay import ProfileSet, RadialProfile


class ProfileModel(BaseModel):
    """One radial spectral amplitude profile."""

    kind: Literal["gaussian", "bump"]
    amplitude: float = Field(1.0, ge=0)
    sigma: float = Field(1.0, gt=0, description="gaussian width")
    rc: float = Field(0.5, gt=0, description="bump plateau radius")
    width: Optional[float] = Field(None, gt=0, description="bump rolloff width")

    def to_profile(self) -> RadialProfile:
        if self.kind == "gaussian":
            return RadialProfile.gaussian(self.amplitude, self.sigma)
        return RadialProfile.bump(self.amplitude, self.rc, self.width)


class ProfileSetModel(BaseModel):
    """Initial-data profiles by role; omitted roles are identically zero."""

    n0: Optional[ProfileModel] = None
    u0_par: Optional[ProfileModel] = None
    u0_perp: Optional[ProfileModel] = None
    v0: Optional[ProfileModel] = None
    alignment: Literal["aligned", "orthogonal"] = "aligned"

    @model_validator(mode="after")
    def _nonempty(self):
        if not any((self.n0, self.u0_par, self.u0_perp, self.v0)):
            raise ValueError("at least one profile must be set")
        return self

    def to_profile_set(self) -> ProfileSet:
        conv = lambda p: p.to_profile() if p is not None else None
        return ProfileSet(n0=conv(self.n0), u0_par=conv(self.u0_par),
                          u0_perp=conv(self.u0_perp), v0=conv(self.v0),
                          alignment=self.alignment)


class EigenRequest(BaseModel):
    t: float = Field(1.0, ge=0)
    r_min: float = Field(1e-3, gt=0)
    r_max: float = Field(10.0, gt=0)
    samples: int = Field(100, ge=2, le=200_000)

    @model_validator(mode="after")
    def _ordered(self):
        if self.r_max <= self.r_min:
            raise ValueError("r_max must exceed r_min")
        return self


class TableResponse(BaseModel):
    columns: List[str]
    rows: List[List[float]]
    csv: str


class LinearDecayRequest(BaseModel):
    target: Literal["n", "u", "v", "diff"]
    k: int = Field(0, ge=0, le=3)
    profiles: ProfileSetModel
    t_min: float = Field(1e2, gt=0)
    t_max: float = Field(1e4, gt=0)
    samples: int = Field(25, ge=2, le=10_000)
    r0: float = Field(0.5, gt=0)
    R0: float = Field(2.0, gt=0)

    @model_validator(mode="after")
    def _ordered(self):
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")
        if self.R0 <= self.r0:
            raise ValueError("R0 must exceed r0")
        return self


class SeriesResponse(BaseModel):
    times: List[float]
    values: List[float]
    csv: str


class LowerBoundRequest(BaseModel):
    alpha0: float = Field(..., gt=0)
    r0: float = Field(..., gt=0)
    target: Literal["uv", "diff"] = "uv"
    t_min: float = Field(1e2, gt=0)
    t_max: float = Field(1e4, gt=0)
    samples: int = Field(25, ge=2, le=10_000)

    @model_validator(mode="after")
    def _ordered(self):
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")
        return self


class LowerBoundResponse(BaseModel):
    times: List[float]
    bound: List[float]
    upper: List[float]
    csv: str


class FitRequest(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    times: List[float]
    values: List[float]
    model: Literal["power", "exp"] = "power"
    window: Optional[Tuple[float, float]] = None


class FitResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    slope: float
    intercept: float
    rms_residual: float
    r_squared: float
    model: str
    window: Tuple[float, float]


class SimulateRequest(BaseModel):
    points_per_axis: int = Field(32, ge=4, le=128)
    box_length: float = Field(2.0 * math.pi, gt=0)
    dt: float = Field(1e-2, gt=0)
    t_end: float = Field(1.0, ge=0)
    eps: float = Field(1e-3, ge=0, lt=0.5)
    seed: int = Field(0, ge=0)
    band: Tuple[int, int] = (1, 3)
    scheme: Literal["etd1", "etd2rk"] = "etd2rk"
    mode: Literal["epns", "damped"] = "epns"
    dealias: bool = True
    record_every: int = Field(1, ge=1)
    snapshot_every: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _validate(self):
        if self.points_per_axis % 2 != 0:
            raise ValueError("points_per_axis must be even")
        if not 1 <= self.band[0] <= self.band[1]:
            raise ValueError("band must satisfy 1 <= k_lo <= k_hi")
        return self


class SnapshotPayload(BaseModel):
    step: int
    filename: str
    data_base64: str


class SimulateResponse(BaseModel):
    columns: List[str]
    records: List[List[float]]
    csv: str
    final_time: float
    snapshots: List[SnapshotPayload] = []
