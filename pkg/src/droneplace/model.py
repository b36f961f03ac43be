"""Domain types, unit helpers, config validation and JSON (de)serialization."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from functools import cached_property

import numpy as np

GBS_TAG = 0
UNSERVED = -1


def db_to_linear(x_db):
    out = np.power(10.0, np.asarray(x_db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def linear_to_db(x):
    out = 10.0 * np.log10(np.asarray(x, dtype=float))
    return float(out) if out.ndim == 0 else out


def dbm_to_mw(x_dbm):
    return db_to_linear(x_dbm)


@dataclass(frozen=True)
class Area:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class Scenario:
    area: Area
    gbs: tuple[float, float]
    ues: tuple[tuple[float, float], ...]

    @classmethod
    def from_points(cls, area: Area, gbs, ues) -> Scenario:
        pts = tuple((float(x), float(y)) for x, y in np.asarray(ues, dtype=float).reshape(-1, 2))
        return cls(area, (float(gbs[0]), float(gbs[1])), pts)

    @property
    def n(self) -> int:
        return len(self.ues)

    @cached_property
    def points(self) -> np.ndarray:
        arr = np.array(self.ues, dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        return arr

    @cached_property
    def gbs_point(self) -> np.ndarray:
        arr = np.array(self.gbs, dtype=float)
        arr.setflags(write=False)
        return arr


@dataclass(frozen=True)
class Environment:
    a: float = 9.61
    b: float = 0.16
    eta_los: float = 1.0
    eta_nlos: float = 20.0
    label: str = "urban"


@dataclass(frozen=True)
class SystemConfig:
    """Radio, environment and search constants. Defaults reproduce the urban simulation table."""

    env: Environment = field(default_factory=Environment)
    p_gbs_dbm: float = 40.0
    p_gbs_bk_dbm: float = 30.0
    p_dbs_dbm: float = 20.0
    alpha: float = 6.5
    n0_dbm_hz: float = -174.0
    fc_hz: float = 2e9
    fc_bk_hz: float = 28e9
    b_hz: float = 20e6
    b_bk_hz: float = 2000e6
    gamma_th_db: float = 5.0
    gamma_th_bk_db: float = -10.0
    c_min_bps: float = 1e6
    tau: float = 0.4
    k_max_cap: int = 100
    h_min_m: float = 20.0
    h_max_m: float = 400.0
    l_allowable_db: float = 119.0
    c_hat_gbs_bps: float = 70e6
    speed_of_light: float = 2.997925e8
    # search controls
    ignore_backhaul_k_cap: bool = False
    inner_iter_cap: int = 100
    kmeans_max_iters: int = 100

    def with_(self, **changes) -> SystemConfig:
        return replace(self, **changes)

    # linear-unit views
    @property
    def p_gbs_mw(self) -> float:
        return dbm_to_mw(self.p_gbs_dbm)

    @property
    def p_gbs_bk_mw(self) -> float:
        return dbm_to_mw(self.p_gbs_bk_dbm)

    @property
    def p_dbs_mw(self) -> float:
        return dbm_to_mw(self.p_dbs_dbm)

    @property
    def n0_mw_hz(self) -> float:
        return dbm_to_mw(self.n0_dbm_hz)

    @property
    def gamma_th(self) -> float:
        return db_to_linear(self.gamma_th_db)

    @property
    def gamma_th_bk(self) -> float:
        return db_to_linear(self.gamma_th_bk_db)


@dataclass(frozen=True)
class DbsSite:
    id: int
    x: float
    y: float
    altitude_m: float
    radius_m: float


@dataclass(frozen=True)
class Placement:
    """DBS sites plus the per-UE association tags (0 = GBS, j = DBS j, -1 = unserved)."""

    dbs: tuple[DbsSite, ...]
    association: tuple[int, ...]
    sinr_db: tuple[float, ...] = ()

    @property
    def k(self) -> int:
        return len(self.dbs)

    @cached_property
    def assoc_array(self) -> np.ndarray:
        arr = np.array(self.association, dtype=int)
        arr.setflags(write=False)
        return arr

    @cached_property
    def site_array(self) -> np.ndarray:
        """(k, 4) array of x, y, altitude, radius."""
        arr = np.array([[d.x, d.y, d.altitude_m, d.radius_m] for d in self.dbs], dtype=float).reshape(-1, 4)
        arr.setflags(write=False)
        return arr


def make_placement(sites, association, sinr_db=()) -> Placement:
    """Build a Placement from array-likes; sites rows are (x, y, altitude, radius)."""
    sites = np.asarray(sites, dtype=float).reshape(-1, 4)
    dbs = tuple(
        DbsSite(j + 1, float(x), float(y), float(h), float(r)) for j, (x, y, h, r) in enumerate(sites)
    )
    return Placement(dbs, tuple(int(a) for a in association), tuple(float(s) for s in sinr_db))


# ---------------------------------------------------------------- validation


def validate_config(config: SystemConfig) -> list[str]:
    bad = []
    env = config.env
    if not env.a > 0:
        bad.append("env.a must be positive")
    if not env.b > 0:
        bad.append("env.b must be positive")
    if not env.eta_nlos >= env.eta_los:
        bad.append("env.eta_nlos must be >= env.eta_los")
    if not 0.0 <= config.tau <= 1.0:
        bad.append(f"tau={config.tau} outside [0, 1]")
    if not config.alpha > 2:
        bad.append(f"alpha={config.alpha} must exceed 2")
    if not 0 < config.h_min_m < config.h_max_m:
        bad.append(f"altitude bounds h_min_m={config.h_min_m}, h_max_m={config.h_max_m} invalid")
    for name in ("fc_hz", "fc_bk_hz", "b_hz", "b_bk_hz", "c_min_bps", "speed_of_light", "c_hat_gbs_bps"):
        if not getattr(config, name) > 0:
            bad.append(f"{name} must be positive")
    for name in ("p_gbs_dbm", "p_gbs_bk_dbm", "p_dbs_dbm", "n0_dbm_hz", "l_allowable_db",
                 "gamma_th_db", "gamma_th_bk_db"):
        if not math.isfinite(getattr(config, name)):
            bad.append(f"{name} must be finite")
    if config.k_max_cap < 0:
        bad.append("k_max_cap must be non-negative")
    if config.inner_iter_cap < 1 or config.kmeans_max_iters < 1:
        bad.append("iteration caps must be >= 1")
    return bad


def validate_scenario(s: Scenario) -> list[str]:
    bad = []
    a = s.area
    if not (a.x_min < a.x_max and a.y_min < a.y_max):
        bad.append("area bounds are inverted or empty")
    if not a.contains(*s.gbs):
        bad.append(f"gbs {s.gbs} outside area")
    if s.n < 1:
        bad.append("scenario has no UEs")
    for i, (x, y) in enumerate(s.ues):
        if not a.contains(x, y):
            bad.append(f"ue {i} at ({x}, {y}) outside area")
    return bad


# ------------------------------------------------------------- serialization


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def scenario_to_dict(s: Scenario) -> dict:
    return {"area": asdict(s.area), "gbs": list(s.gbs), "ues": [list(p) for p in s.ues]}


def scenario_from_dict(d: dict) -> Scenario:
    return Scenario.from_points(Area(**{k: float(v) for k, v in d["area"].items()}), d["gbs"], d["ues"])


def config_to_dict(c: SystemConfig) -> dict:
    return asdict(c)


def config_from_dict(d: dict) -> SystemConfig:
    d = dict(d)
    env = Environment(**d.pop("env", {}))
    known = {f.name for f in fields(SystemConfig)}
    unknown = set(d) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    return SystemConfig(env=env, **d)


def placement_to_dict(p: Placement) -> dict:
    return {
        "dbs": [asdict(d) for d in p.dbs],
        "association": list(p.association),
        "sinr_db": list(p.sinr_db),
    }


def placement_from_dict(d: dict) -> Placement:
    dbs = tuple(DbsSite(**x) for x in d["dbs"])
    return Placement(dbs, tuple(int(a) for a in d["association"]), tuple(float(v) for v in d.get("sinr_db", ())))


def encode(obj) -> str:
    if isinstance(obj, Scenario):
        return _dumps(scenario_to_dict(obj))
    if isinstance(obj, SystemConfig):
        return _dumps(config_to_dict(obj))
    if isinstance(obj, Placement):
        return _dumps(placement_to_dict(obj))
    raise TypeError(f"cannot encode {type(obj).__name__}")


def decode_scenario(text: str) -> Scenario:
    return scenario_from_dict(json.loads(text))


def decode_config(text: str) -> SystemConfig:
    return config_from_dict(json.loads(text))


def decode_placement(text: str) -> Placement:
    return placement_from_dict(json.loads(text))
