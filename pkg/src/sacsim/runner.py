"""Single runs and parameter sweeps, plus result/manifest serialization."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from .config import RunConfig, _deep_merge, parse_config
from .kernel import RngStreams, Simulator
from .mac import MacEngine
from .metrics import KpiAccumulator, KpiRecord
from .schemes import make_policy
from .config import build_sources, build_world

CSV_COLUMNS = [
    "scenario",
    "scheme",
    "axis",
    "axis_value",
    "seed",
    "throughput_mbps",
    "mean_delay_ms",
    "drop_rate",
    "arrived",
    "delivered",
    "dropped",
    "retx",
    "preamble_fails",
    "retrains",
]


def run(cfg: RunConfig, seed: Optional[int] = None, strict_checks: bool = False) -> KpiRecord:
    """Execute one simulation. Deterministic in (config, seed)."""
    master_seed = cfg.master_seed if seed is None else seed
    streams = RngStreams(master_seed)
    world = build_world(cfg, streams)
    sim = Simulator()
    policy = make_policy(cfg.scheme, world, streams.sensing)
    kpi = KpiAccumulator(warmup=cfg.warmup_ns)
    engine = MacEngine(
        sim=sim,
        world=world,
        policy=policy,
        mcs_table=cfg.mcs_table,
        config=cfg.mac,
        streams=streams,
        sources=build_sources(cfg, streams),
        kpi=kpi,
        duration=cfg.duration_ns,
        warmup=cfg.warmup_ns,
        strict_checks=strict_checks,
    )
    return engine.run()


# ---------------------------------------------------------------------------
# sweeps


def _set_path(d: dict, dotted: str, value) -> dict:
    parts = dotted.split(".")
    node: dict = {}
    cur = node
    for p in parts[:-1]:
        cur[p] = {}
        cur = cur[p]
    cur[parts[-1]] = value
    return _deep_merge(d, node)


def load_sweep_spec(path: str | Path) -> dict:
    import yaml

    path = Path(path)
    with open(path) as fh:
        spec = yaml.safe_load(fh)
    if not isinstance(spec, dict):
        raise ValueError(f"{path}: sweep spec must be a mapping")
    for key in ("axis", "values", "seeds"):
        if key not in spec:
            raise ValueError(f"{path}: sweep spec missing {key!r}")
    base = spec.get("base")
    if isinstance(base, str):
        base_path = (path.parent / base) if not Path(base).is_absolute() else Path(base)
        with open(base_path) as fh:
            spec["base"] = yaml.safe_load(fh)
    if not isinstance(spec.get("base"), dict):
        raise ValueError(f"{path}: sweep spec needs a 'base' run config (inline or path)")
    return spec


def _sweep_jobs(spec: dict) -> list[tuple[str, float, int, dict]]:
    """Expanded, deterministically ordered (scheme_label, value, seed, raw_cfg)."""
    base = spec["base"]
    overrides = spec.get("overrides")
    if overrides:
        base = _deep_merge(base, overrides)
    axis = spec["axis"]
    schemes = spec.get("schemes")
    if not schemes:
        schemes = [{"label": base.get("scheme", {}).get("kind", "baseline"), "scheme": base.get("scheme", {})}]
    jobs = []
    for sch in schemes:
        label = sch.get("label") or sch["scheme"].get("kind", "baseline")
        for value in spec["values"]:
            for seed in spec["seeds"]:
                raw = _deep_merge(base, {"scheme": sch["scheme"], "master_seed": int(seed)})
                raw = _set_path(raw, axis, value)
                jobs.append((label, value, int(seed), raw))
    return jobs


def _run_job(args):
    label, value, seed, raw = args
    cfg = parse_config(raw)
    rec = run(cfg)
    return (label, value, seed, cfg.scenario.kind, rec)


def sweep(spec: dict, workers: int = 1) -> list[dict]:
    """Run every (scheme, value, seed) combination. Row order is fixed by the
    spec, independent of how jobs are executed."""
    jobs = _sweep_jobs(spec)
    axis = spec["axis"]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs))
    else:
        results = [_run_job(j) for j in jobs]
    rows = []
    for label, value, seed, scenario_kind, rec in results:
        rows.append(
            {
                "scenario": scenario_kind,
                "scheme": label,
                "axis": axis,
                "axis_value": value,
                "seed": seed,
                "throughput_mbps": rec.throughput_mbps,
                "mean_delay_ms": rec.mean_delay_ms,
                "drop_rate": rec.drop_rate,
                "arrived": rec.counts["arrived"],
                "delivered": rec.counts["delivered"],
                "dropped": rec.counts["dropped"],
                "retx": rec.counts["retx"],
                "preamble_fails": rec.counts["preamble_fails"],
                "retrains": rec.counts["retrains"],
            }
        )
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_results(rows: list[dict], out_dir: str | Path, spec: Optional[dict] = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    with open(out / "results.json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {"tool_version": __version__, "row_count": len(rows)}
    if spec is not None:
        import hashlib

        manifest["config_hash"] = hashlib.sha256(
            json.dumps(spec, sort_keys=True, default=str).encode()
        ).hexdigest()
        manifest["axis"] = spec.get("axis")
        manifest["seeds"] = list(spec.get("seeds", []))
        manifest["values"] = list(spec.get("values", []))
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
