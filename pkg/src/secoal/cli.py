"""Command-line interface: config parsing, experiment subcommands, CSV output.

Configs are JSON with dB/dBm fields converted to linear/watts here, at the
boundary; everything downstream works in SI units. Results go to a fixed-
schema CSV (12 significant digits) next to a JSON manifest; identical
(config, seed) pairs produce byte-identical CSV bodies.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError, SecoalError, TooLargeToVerify, ValidationError
from .formation import (FormationConfig, FormationTrace, check_dc_partition,
                        is_dhp_stable)
from .geometry import NetworkState, RadioParams
from .simulate import (MobilityConfig, ScenarioConfig, SweepRow, deploy_random,
                       derive_seed_sequence, evaluate_deployment, run_mobile,
                       sweep)

CSV_COLUMNS = ("param", "value", "protocol", "seed_count", "avg_secrecy_rate",
               "stderr", "avg_coalition_size", "avg_max_coalition_size",
               "merges_per_min", "splits_per_min")

TIMESERIES_COLUMNS = ("t_s", "protocol", "num_coalitions", "avg_secrecy_rate",
                      "merges_cum", "splits_cum")

_SCENARIO_KEYS = {"N", "M", "K", "area_side_m", "power_w", "noise_dbm", "nu0_db",
                  "pathloss_exponent", "wavelength_m", "phase_model", "phase_seed",
                  "protocol", "seed", "num_deployments"}
_MOBILITY_KEYS = {"model", "speed_kmh", "decision_interval_s", "direction",
                  "reformation_period_s", "duration_s", "moving", "moving_indices"}
_FORMATION_KEYS = {"max_merge_set", "max_coalition_size", "max_rounds"}


def _fmt(x) -> str:
    if isinstance(x, int):
        return str(x)
    return f"{float(x):.12g}"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def parse_config(path) -> tuple[ScenarioConfig, MobilityConfig, FormationConfig]:
    """Load a JSON config; unknown keys are rejected, missing ones default."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return config_from_dict(doc, source=str(path))


def config_from_dict(doc: dict, source: str = "<config>",
                     ) -> tuple[ScenarioConfig, MobilityConfig, FormationConfig]:
    unknown = set(doc) - _SCENARIO_KEYS - {"mobility", "formation"}
    if unknown:
        raise ParseError(f"{source}: unknown key(s) {sorted(unknown)}")

    radio = RadioParams(
        total_slot_power_w=float(doc.get("power_w", 0.01)),
        noise_variance_w=dbm_to_watts(float(doc.get("noise_dbm", -90.0))),
        pathloss_exponent=float(doc.get("pathloss_exponent", 3.0)),
        exchange_snr_linear=db_to_linear(float(doc.get("nu0_db", 10.0))),
        carrier_wavelength_m=float(doc.get("wavelength_m", 0.125)),
        phase_model=doc.get("phase_model", "geometric"),
        phase_seed=int(doc.get("phase_seed", 0)),
    )
    scenario = ScenarioConfig(
        n_users=int(doc.get("N", 45)),
        n_destinations=int(doc.get("M", 2)),
        n_eavesdroppers=int(doc.get("K", 2)),
        area_side_m=float(doc.get("area_side_m", 2500.0)),
        radio=radio,
        protocol=doc.get("protocol", "df"),
        seed=int(doc.get("seed", 0)),
        num_deployments=int(doc.get("num_deployments", 100)),
    )

    mob_doc = doc.get("mobility", {})
    if not isinstance(mob_doc, dict):
        raise ParseError(f"{source}: 'mobility' must be an object")
    unknown = set(mob_doc) - _MOBILITY_KEYS
    if unknown:
        raise ParseError(f"{source}: unknown mobility key(s) {sorted(unknown)}")
    indices = mob_doc.get("moving_indices")
    mobility = MobilityConfig(
        model=mob_doc.get("model", "static"),
        speed_kmh=float(mob_doc.get("speed_kmh", 0.0)),
        decision_interval_s=float(mob_doc.get("decision_interval_s", 30.0)),
        direction=tuple(mob_doc.get("direction", (1.0, 0.0))),
        reformation_period_s=float(mob_doc.get("reformation_period_s", 30.0)),
        duration_s=float(mob_doc.get("duration_s", 300.0)),
        moving=mob_doc.get("moving", "users"),
        moving_indices=None if indices is None else tuple(int(i) for i in indices),
    )

    form_doc = doc.get("formation", {})
    if not isinstance(form_doc, dict):
        raise ParseError(f"{source}: 'formation' must be an object")
    unknown = set(form_doc) - _FORMATION_KEYS
    if unknown:
        raise ParseError(f"{source}: unknown formation key(s) {sorted(unknown)}")
    mms = form_doc.get("max_merge_set")
    formation = FormationConfig(
        protocol=scenario.protocol if scenario.protocol != "noncoop" else "df",
        max_merge_set=None if mms is None else int(mms),
        max_coalition_size=int(form_doc.get("max_coalition_size", 12)),
        max_rounds=int(form_doc.get("max_rounds", 1000)),
    )
    return scenario, mobility, formation


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join([
            r.param, _fmt(r.value), r.protocol, str(r.seed_count),
            _fmt(r.avg_secrecy_rate), _fmt(r.stderr), _fmt(r.avg_coalition_size),
            _fmt(r.avg_max_coalition_size), _fmt(r.merges_per_min),
            _fmt(r.splits_per_min)]))
    return "\n".join(lines) + "\n"


def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _trace_jsonl(trace: FormationTrace) -> str:
    return "".join(json.dumps(ev.to_json(), sort_keys=True) + "\n"
                   for ev in trace.events)


class _Manifest:
    def __init__(self, args, scenario, mobility, formation):
        self.doc = {
            "tool": "secoal",
            "version": __version__,
            "command": args.command,
            "seed": scenario.seed,
            "config": {
                "scenario": asdict(scenario),
                "mobility": asdict(mobility),
                "formation": asdict(formation),
            },
            "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "outputs": [],
        }

    def add(self, path: Path):
        self.doc["outputs"].append(path.name)

    def write(self, out_dir: Path):
        self.doc["finished_utc"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        write_atomic(out_dir / "manifest.json", json.dumps(self.doc, indent=2) + "\n")


def _load_inputs(args):
    if args.config:
        scenario, mobility, formation = parse_config(args.config)
    else:
        scenario, mobility, formation = config_from_dict({})
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    return scenario, mobility, formation


def _parse_protocols(arg: str | None, default: tuple[str, ...]) -> tuple[str, ...]:
    if not arg:
        return default
    protos = tuple(p.strip() for p in arg.split(",") if p.strip())
    for p in protos:
        if p not in ("df", "af", "noncoop"):
            raise ValidationError(f"unknown protocol {p!r}")
    return protos


def _partition_doc(state: NetworkState, scenario: ScenarioConfig, protocol: str,
                   partition, payoffs) -> dict:
    return {
        "protocol": protocol,
        "seed": scenario.seed,
        "radio": asdict(scenario.radio),
        "positions": {
            "users": state.user_positions.tolist(),
            "destinations": state.destination_positions.tolist(),
            "eavesdroppers": state.eavesdropper_positions.tolist(),
        },
        "partition": [list(b) for b in partition],
        "payoffs": list(payoffs),
    }


def cmd_run(args) -> int:
    scenario, mobility, formation = _load_inputs(args)
    protocols = _parse_protocols(args.protocols, (scenario.protocol,))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(args, scenario, mobility, formation)

    rows = sweep("n", [scenario.n_users], scenario, protocols=protocols,
                 form_cfg=formation, jobs=args.jobs)
    csv_path = out_dir / "results.csv"
    write_atomic(csv_path, rows_to_csv(rows))
    manifest.add(csv_path)

    # Replicate 0 gets its terminal partition (and optionally its trace)
    # persisted for later stability verification.
    ss = derive_seed_sequence(scenario.seed, "n", float(scenario.n_users), 0)
    state = deploy_random(scenario, ss)
    for proto in protocols:
        rec, result = evaluate_deployment(state, replace(scenario, protocol=proto),
                                          formation)
        doc = _partition_doc(state, scenario, proto, rec.partition, rec.payoffs)
        ppath = out_dir / f"partition_{proto}.json"
        write_atomic(ppath, json.dumps(doc, indent=2) + "\n")
        manifest.add(ppath)
        if args.trace and result is not None:
            tpath = out_dir / f"trace_{proto}.jsonl"
            write_atomic(tpath, _trace_jsonl(result.trace))
            manifest.add(tpath)
    manifest.write(out_dir)
    return 0


def cmd_sweep(args) -> int:
    scenario, mobility, formation = _load_inputs(args)
    if not args.param:
        raise ValidationError("--param is required for sweep")
    if not args.values:
        raise ValidationError("--values is required for sweep")
    values = [float(v) for v in args.values.split(",") if v.strip()]
    protocols = _parse_protocols(args.protocols, ("df", "noncoop"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(args, scenario, mobility, formation)

    rows = sweep(args.param, values, scenario, protocols=protocols,
                 form_cfg=formation, mobility=mobility,
                 duration_s=mobility.duration_s, jobs=args.jobs)
    csv_path = out_dir / "results.csv"
    write_atomic(csv_path, rows_to_csv(rows))
    manifest.add(csv_path)

    if args.trace and args.param != "speed":
        for value in values:
            ss = derive_seed_sequence(scenario.seed, args.param, value, 0)
            state = deploy_random(
                _apply(scenario, args.param, value), ss)
            for proto in protocols:
                if proto == "noncoop":
                    continue
                _, result = evaluate_deployment(
                    state, replace(_apply(scenario, args.param, value),
                                   protocol=proto), formation)
                tpath = out_dir / f"trace_{args.param}_{_fmt(value)}_{proto}.jsonl"
                write_atomic(tpath, _trace_jsonl(result.trace))
                manifest.add(tpath)
    manifest.write(out_dir)
    return 0


def _apply(scenario, param, value):
    from .simulate import apply_param
    return apply_param(scenario, param, value)


def cmd_mobility(args) -> int:
    scenario, mobility, formation = _load_inputs(args)
    protocols = _parse_protocols(args.protocols, (scenario.protocol,))
    if args.values:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    else:
        values = [mobility.speed_kmh]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(args, scenario, mobility, formation)

    rows = []
    for value in values:
        mob = replace(mobility, speed_kmh=float(value))
        if mob.model == "static" and value > 0:
            mob = replace(mob, model="random_walk")
        ts_lines = [",".join(TIMESERIES_COLUMNS)]
        for proto in protocols:
            ss = derive_seed_sequence(scenario.seed, "speed", float(value), 0)
            run = run_mobile(replace(scenario, protocol=proto), mob,
                             mob.duration_s, form_cfg=formation, ss=ss)
            for step in run.steps:
                ts_lines.append(",".join([
                    _fmt(step.t_s), proto, str(step.metrics.num_coalitions),
                    _fmt(step.metrics.avg_secrecy_rate), str(step.merges_cum),
                    str(step.splits_cum)]))
            rows.append(SweepRow(
                param="speed", value=float(value), protocol=proto, seed_count=1,
                avg_secrecy_rate=float(np.mean(
                    [s.metrics.avg_secrecy_rate for s in run.steps])),
                stderr=0.0,
                avg_coalition_size=float(np.mean(
                    [s.metrics.avg_coalition_size for s in run.steps])),
                avg_max_coalition_size=float(np.mean(
                    [s.metrics.avg_max_coalition_size for s in run.steps])),
                merges_per_min=run.merges_per_min,
                splits_per_min=run.splits_per_min))
            if args.trace:
                tpath = out_dir / f"trace_mobility_{_fmt(value)}_{proto}.jsonl"
                write_atomic(tpath, _trace_jsonl(run.trace))
                manifest.add(tpath)
        name = "timeseries.csv" if len(values) == 1 else f"timeseries_{_fmt(value)}.csv"
        ts_path = out_dir / name
        write_atomic(ts_path, "\n".join(ts_lines) + "\n")
        manifest.add(ts_path)
    csv_path = out_dir / "results.csv"
    write_atomic(csv_path, rows_to_csv(rows))
    manifest.add(csv_path)
    manifest.write(out_dir)
    return 0


def cmd_verify(args) -> int:
    if not args.partition:
        raise ValidationError("verify needs --partition FILE")
    try:
        doc = json.loads(Path(args.partition).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {args.partition}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.partition}:{exc.lineno}: {exc.msg}") from exc
    from .geometry import make_state
    radio = RadioParams(**doc["radio"])
    state = make_state(doc["positions"]["users"], doc["positions"]["destinations"],
                       doc["positions"]["eavesdroppers"], radio)
    partition = [tuple(b) for b in doc["partition"]]
    protocol = doc["protocol"]
    if protocol == "noncoop":
        protocol = "df"
    cfg = FormationConfig(protocol=protocol)
    try:
        report = is_dhp_stable(partition, cfg, state)
        print(f"dhp_stable: {'true' if report.stable else 'false'}")
        if not report.stable:
            print(f"witness: {report.witness}")
    except TooLargeToVerify as exc:
        print(f"dhp_stable: skipped ({exc})")
    try:
        dc = check_dc_partition(partition, state, protocol)
        print(f"dc_stable: {'true' if dc else 'false'}")
    except TooLargeToVerify as exc:
        print(f"dc_stable: skipped ({exc})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="secoal",
        description="Coalitional secrecy-beamforming simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep),
                     ("mobility", cmd_mobility), ("verify", cmd_verify)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--param", choices=("n", "k", "nu0_db", "speed"))
        p.add_argument("--values", help="comma-separated sweep values")
        p.add_argument("--protocols", help="comma-separated protocol list")
        p.add_argument("--trace", action="store_true",
                       help="also write formation event logs")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes for sweep replicates")
        p.add_argument("--partition", help="saved partition JSON (verify)")
        p.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except SecoalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
