"""Run configuration: YAML loading, validation, and world construction."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from .geometry import Blocker, Position, Scenario, Surface
from .kernel import RngStreams, micros, millis, seconds
from .mac import MacConfig
from .mobility import AvoidDisc, RandomWaypointTrajectory, StaticTrajectory, StreetWalkTrajectory, Trajectory
from .phy import AntennaModel, McsEntry, McsTable, MountedAntenna
from .schemes import BaselineScheme, IsacScheme, OracleScheme, SchemeKind
from .traffic import ArrivalSource, CbrSource, PoissonSource
from .world import DIRECTIONS, World

ENV_PREFIX = "SACSIM_"


class ParseError(Exception):
    pass


class ValidationError(Exception):
    """Carries every validation problem found, each naming the offending key."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("; ".join(errors))


def _data_path(name: str) -> Path:
    return Path(str(resources.files("sacsim").joinpath("data", name)))


def resolve_resource(ref: str, suffix: str = ".yaml") -> Path:
    """A bare name refers to a packaged data file; anything else is a path."""
    p = Path(ref)
    if p.exists():
        return p
    candidate = _data_path(ref if ref.endswith(suffix) else ref + suffix)
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no such file or packaged resource: {ref}")


def _load_yaml(path: Path) -> dict:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ParseError(f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be a mapping")
    return data


def apply_env_overrides(raw: dict, environ=None) -> dict:
    """SACSIM_MAC__AGGREGATION_SIZE=8 overrides mac.aggregation_size."""
    environ = os.environ if environ is None else environ
    out = copy.deepcopy(raw)
    for key, value in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        path = key[len(ENV_PREFIX):].lower().split("__")
        node = out
        for part in path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError([f"env override {key}: {part} is not a section"])
        node[path[-1]] = yaml.safe_load(value)
    return out


# ---------------------------------------------------------------------------
# scenario files


def load_scenario(ref: str) -> Scenario:
    path = resolve_resource(ref)
    data = _load_yaml(path)
    errors: list[str] = []

    def need(key, typ=None):
        if key not in data:
            errors.append(f"scenario.{key}: missing")
            return None
        return data[key]

    kind = need("kind")
    bounds = need("bounds")
    ap = need("ap_position")
    for k in ("carrier_freq_hz", "noise_dbm", "tx_power_dbm"):
        need(k)
    if errors:
        raise ValidationError(errors)

    surfaces = []
    for i, s in enumerate(data.get("surfaces", [])):
        try:
            surfaces.append(
                Surface(
                    normal_axis=int(s["normal_axis"]),
                    coord=float(s["coord"]),
                    u_range=tuple(float(v) for v in s["u_range"]),
                    v_range=tuple(float(v) for v in s["v_range"]),
                    reflection_loss_db=float(s.get("reflection_loss_db", 0.0)),
                    name=s.get("name", f"surface{i}"),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            errors.append(f"scenario.surfaces[{i}]: {e}")
    blockers = []
    for i, b in enumerate(data.get("blockers", [])):
        try:
            loss = b.get("penetration_loss_db", "inf")
            loss = math.inf if loss in ("inf", None) else float(loss)
            blockers.append(
                Blocker(
                    center=Position(*[float(v) for v in b["center"]]),
                    radius=float(b["radius"]),
                    height=float(b["height"]),
                    penetration_loss_db=loss,
                    name=b.get("name", f"blocker{i}"),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            errors.append(f"scenario.blockers[{i}]: {e}")
    if errors:
        raise ValidationError(errors)
    try:
        return Scenario(
            kind=str(kind),
            bounds=tuple(tuple(float(v) for v in axis) for axis in bounds),
            surfaces=surfaces,
            blockers=blockers,
            ap_position=Position(*[float(v) for v in ap]),
            carrier_freq_hz=float(data["carrier_freq_hz"]),
            noise_dbm=float(data["noise_dbm"]),
            tx_power_dbm=float(data["tx_power_dbm"]),
        )
    except ValueError as e:
        raise ValidationError([f"scenario: {e}"]) from e


def load_mcs_table(ref: str) -> McsTable:
    path = resolve_resource(ref)
    data = _load_yaml(path)
    entries = {}
    for key, row in data.get("entries", {}).items():
        entries[int(key)] = McsEntry(
            midpoint_db=float(row["midpoint_db"]),
            slope_db=float(row["slope_db"]),
            phy_rate_mbps=float(row["phy_rate_mbps"]),
        )
    if not entries:
        raise ValidationError(["mcs_table.entries: empty"])
    return McsTable(entries=entries, reference_length_bits=int(data.get("reference_length_bits", 12_000)))


# ---------------------------------------------------------------------------
# run config


@dataclass
class RunConfig:
    raw: dict
    scenario_ref: str
    scenario: Scenario
    scheme: SchemeKind
    scheme_label: str
    mac: MacConfig
    mcs_table: McsTable
    num_sectors: int
    mainlobe_gain_db: float
    sidelobe_gain_db: float
    ap_orientation_deg: float
    sta_orientation_deg: float
    traffic_rate_mbps: float
    traffic_arrival: str
    mobility: dict
    duration_ns: int
    warmup_ns: int
    master_seed: int

    def semantic_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True, default=str).encode()
        ).hexdigest()


_SCHEME_KEYS = {
    "baseline": {"kind", "label", "append_trn_tail"},
    "isac": {
        "kind",
        "label",
        "error_radius_m",
        "sensing_period_ms",
        "sensing_latency_ms",
        "intra_ppdu_switch",
        "report_airtime_us",
    },
    "oracle": {"kind", "label"},
}


def parse_scheme(section: dict, errors: list[str]) -> tuple[SchemeKind, str]:
    kind = section.get("kind", "baseline")
    label = section.get("label", kind)
    known = _SCHEME_KEYS.get(kind)
    if known is not None:
        for key in sorted(set(section) - known):
            errors.append(f"scheme: unknown key {key!r} for kind {kind!r}")
    if kind == "baseline":
        return BaselineScheme(append_trn_tail=bool(section.get("append_trn_tail", True))), label
    if kind == "isac":
        try:
            scheme = IsacScheme(
                error_radius_m=float(section.get("error_radius_m", 0.4)),
                sensing_period=millis(float(section.get("sensing_period_ms", 10.0))),
                sensing_latency=millis(float(section.get("sensing_latency_ms", 0.0))),
                intra_ppdu_switch=bool(section.get("intra_ppdu_switch", False)),
                report_airtime=micros(float(section.get("report_airtime_us", 0.0))),
            )
        except ValueError as e:
            errors.append(f"scheme: {e}")
            return OracleScheme(), label
        return scheme, label
    if kind == "oracle":
        return OracleScheme(), label
    errors.append(f"scheme.kind: unknown kind {kind!r}")
    return BaselineScheme(), label


def load_config(path: str | Path, overrides: Optional[dict] = None) -> RunConfig:
    raw = _load_yaml(Path(path))
    raw = apply_env_overrides(raw)
    if overrides:
        raw = _deep_merge(raw, overrides)
    return parse_config(raw)


def _deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_config(raw: dict) -> RunConfig:
    errors: list[str] = []

    scenario_ref = raw.get("scenario")
    scenario = None
    if not scenario_ref:
        errors.append("scenario: missing")
    else:
        try:
            scenario = load_scenario(str(scenario_ref))
        except FileNotFoundError as e:
            errors.append(f"scenario: {e}")
        except ValidationError as e:
            errors.extend(e.errors)

    mcs_ref = raw.get("mcs_table", "mcs_table")
    mcs_table = None
    try:
        mcs_table = load_mcs_table(str(mcs_ref))
    except FileNotFoundError as e:
        errors.append(f"mcs_table: {e}")
    except ValidationError as e:
        errors.extend(e.errors)

    scheme, scheme_label = parse_scheme(raw.get("scheme", {}), errors)

    mac_raw = raw.get("mac", {})
    mac = None
    try:
        mac = MacConfig(
            aggregation_size=int(mac_raw.get("aggregation_size", 1)),
            max_retries=int(mac_raw.get("max_retries", 7)),
            max_queue_delay=millis(float(mac_raw.get("max_queue_delay_ms", 50.0))),
            sifs=micros(float(mac_raw.get("sifs_us", 3.0))),
            difs=micros(float(mac_raw.get("difs_us", 8.0))),
            ack_duration=micros(float(mac_raw.get("ack_duration_us", 3.0))),
            beacon_interval=millis(float(mac_raw.get("beacon_interval_ms", 100.0))),
            sls_airtime=millis(float(mac_raw.get("sls_airtime_ms", 2.0))),
            trn_unit_duration=micros(float(mac_raw.get("trn_unit_duration_us", 48.0))),
            preamble_duration=micros(float(mac_raw.get("preamble_duration_us", 2.0))),
            mcs=int(mac_raw.get("mcs", 14)),
            msdu_size_bits=int(mac_raw.get("msdu_size_bits", 12_000)),
            sync_threshold_db=float(mac_raw.get("sync_threshold_db", 8.0)),
            failure_threshold=int(mac_raw.get("failure_threshold", 3)),
        )
    except (ValueError, TypeError) as e:
        errors.append(f"mac: {e}")
    if mac is not None and mcs_table is not None and mac.mcs not in mcs_table.entries:
        errors.append(f"mac.mcs: index {mac.mcs} not in MCS table")

    ant = raw.get("antenna", {})
    num_sectors = int(ant.get("num_sectors", 18))
    if num_sectors < 1:
        errors.append("antenna.num_sectors: must be positive")
    mainlobe = float(ant.get("mainlobe_gain_db", 15.0))
    sidelobe = float(ant.get("sidelobe_gain_db", 3.0))
    if sidelobe >= mainlobe:
        errors.append("antenna.sidelobe_gain_db: must be below mainlobe_gain_db")
    ap_orient = float(ant.get("ap_orientation_deg", 0.0))
    sta_orient_raw = ant.get("sta_orientation_deg", "half_sector")
    if sta_orient_raw == "half_sector":
        sta_orient = 180.0 / num_sectors
    else:
        sta_orient = float(sta_orient_raw)

    traffic = raw.get("traffic", {})
    rate = float(traffic.get("rate_mbps", 10.0))
    if rate < 0:
        errors.append("traffic.rate_mbps: must be nonnegative")
    arrival = str(traffic.get("arrival", "cbr"))
    if arrival not in ("cbr", "poisson"):
        errors.append(f"traffic.arrival: unknown model {arrival!r}")

    mobility = dict(raw.get("mobility", {}))
    mobility.setdefault("kind", "random_waypoint" if (scenario and scenario.kind == "living_room") else "street_walk")
    if float(mobility.get("speed_mps", 1.0)) < 0:
        errors.append("mobility.speed_mps: must be nonnegative")

    duration_s = float(raw.get("duration_s", 30.0))
    warmup_s = float(raw.get("warmup_s", 1.0))
    if duration_s <= warmup_s:
        errors.append("duration_s: must exceed warmup_s")
    master_seed = int(raw.get("master_seed", 1))

    if errors:
        raise ValidationError(errors)

    return RunConfig(
        raw=raw,
        scenario_ref=str(scenario_ref),
        scenario=scenario,
        scheme=scheme,
        scheme_label=scheme_label,
        mac=mac,
        mcs_table=mcs_table,
        num_sectors=num_sectors,
        mainlobe_gain_db=mainlobe,
        sidelobe_gain_db=sidelobe,
        ap_orientation_deg=ap_orient,
        sta_orientation_deg=sta_orient,
        traffic_rate_mbps=rate,
        traffic_arrival=arrival,
        mobility=mobility,
        duration_ns=seconds(duration_s),
        warmup_ns=seconds(warmup_s),
        master_seed=master_seed,
    )


# ---------------------------------------------------------------------------
# world construction


def build_trajectory(cfg: RunConfig, streams: RngStreams) -> Trajectory:
    mob = cfg.mobility
    kind = mob["kind"]
    scenario = cfg.scenario
    (x0, x1), (y0, y1), _ = scenario.bounds
    z = float(mob.get("z", 1.2))
    speed = float(mob.get("speed_mps", 1.0))
    if kind == "static":
        pos = mob.get("position")
        if pos is None:
            pos = [(x0 + x1) / 2.0, (y0 + y1) / 2.0, z]
        return StaticTrajectory(Position(*[float(v) for v in pos]))
    if kind == "street_walk":
        margin = float(mob.get("margin", 0.5))
        x_range = mob.get("x_range", [x0 + margin, x1 - margin])
        return StreetWalkTrajectory(
            x_range=(float(x_range[0]), float(x_range[1])),
            lane_y=float(mob.get("lane_y", (y0 + y1) / 2.0)),
            z=z,
            speed_mps=speed,
            start_x=mob.get("start_x"),
            bounce=bool(mob.get("bounce", True)),
        )
    if kind == "random_waypoint":
        margin = float(mob.get("margin", 0.5))
        clearance = float(mob.get("blocker_clearance_m", 0.25))
        avoid = [
            AvoidDisc(b.center.x, b.center.y, b.radius + clearance)
            for b in scenario.blockers
        ]
        return RandomWaypointTrajectory(
            bounds=((x0 + margin, x1 - margin), (y0 + margin, y1 - margin)),
            z=z,
            speed_mps=speed,
            rng=streams.mobility,
            pause_s=float(mob.get("pause_s", 0.0)),
            avoid=avoid,
        )
    raise ValidationError([f"mobility.kind: unknown kind {kind!r}"])


def build_world(cfg: RunConfig, streams: RngStreams) -> World:
    model = AntennaModel(
        num_sectors=cfg.num_sectors,
        mainlobe_gain_db=cfg.mainlobe_gain_db,
        sidelobe_gain_db=cfg.sidelobe_gain_db,
    )
    return World(
        scenario=cfg.scenario,
        ap_antenna=MountedAntenna(model, cfg.ap_orientation_deg),
        sta_antenna=MountedAntenna(model, cfg.sta_orientation_deg),
        ap_trajectory=StaticTrajectory(cfg.scenario.ap_position),
        sta_trajectory=build_trajectory(cfg, streams),
    )


def build_sources(cfg: RunConfig, streams: RngStreams) -> dict[str, ArrivalSource]:
    sources: dict[str, ArrivalSource] = {}
    for i, d in enumerate(DIRECTIONS):
        if cfg.traffic_arrival == "poisson":
            sources[d] = PoissonSource(cfg.traffic_rate_mbps, cfg.mac.msdu_size_bits, streams.traffic_substream(i))
        else:
            # Half-interval phase offset desynchronizes the two CBR flows.
            src = CbrSource(cfg.traffic_rate_mbps, cfg.mac.msdu_size_bits)
            if i == 1 and src.interval_ns:
                src.phase_ns = src.interval_ns // 2
            sources[d] = src
    return sources
