"""Command-line entry point.

Subcommands:
  run       drive the threaded pipeline from a recorded log, MQTT on
  replay    deterministic offline replay (A/B clustering switch)
  record    copy a replayed stream into a new recording
  simulate  render a scenario to a log + ground-truth file
  eval      compare a pipeline status log with ground truth

Exit codes: 0 success, 2 configuration/usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import recording, simulation
from .config import ConfigError, load_config, paper_config_doc
from .pipeline import JsonlSink, replay_through, run_threaded
from .recording import Recorder
from .telemetry import MqttConfig, Publisher


def _parse_mqtt_url(url: str) -> tuple[str, int]:
    url = url.removeprefix("mqtt://")
    host, _, port = url.partition(":")
    return host, int(port) if port else 1883


def _make_publisher(cfg, mqtt_url: str | None):
    url = mqtt_url or os.environ.get("RADARFUSE_MQTT_URL")
    if url:
        host, port = _parse_mqtt_url(url)
        base = cfg.mqtt or MqttConfig()
        mqtt_cfg = MqttConfig(host=host, port=port, client_id=base.client_id,
                              topic_prefix=base.topic_prefix,
                              qos_status=base.qos_status,
                              qos_event=base.qos_event,
                              retain_status=base.retain_status,
                              publish_period=base.publish_period,
                              queue_limit=base.queue_limit)
    elif cfg.mqtt is not None:
        mqtt_cfg = cfg.mqtt
    else:
        return None
    return Publisher(cfg=mqtt_cfg)


def _load_cfg(path: str):
    if path == "paper":
        return load_config(paper_config_doc())
    return load_config(path)


def _apply_clustering(cfg, algorithm: str | None):
    if not algorithm:
        return cfg
    from dataclasses import replace
    from .clustering import ClusterAlgorithm
    return replace(cfg, clustering=replace(
        cfg.clustering, algorithm=ClusterAlgorithm(algorithm)))


def _sinks(args):
    status_log = getattr(args, "status_log", None)
    sink = JsonlSink(status_log) if status_log else None
    event_log = getattr(args, "event_log", None)
    esink = JsonlSink(event_log) if event_log else None
    return sink, esink


def cmd_run(args) -> int:
    cfg = _apply_clustering(_load_cfg(args.config), None)
    publisher = _make_publisher(cfg, args.mqtt_url)
    sink, esink = _sinks(args)
    records = recording.replay(args.log, speed=args.speed)
    run_threaded(cfg, records,
                 status_sink=sink.status if sink else None,
                 event_sink=esink.event if esink else None,
                 publisher=publisher)
    for s in (sink, esink):
        if s:
            s.close()
    return 0


def cmd_replay(args) -> int:
    cfg = _apply_clustering(_load_cfg(args.config), args.clustering)
    publisher = _make_publisher(cfg, args.mqtt_url)
    sink, esink = _sinks(args)
    records = recording.replay(args.log, speed=args.speed,
                               as_fast_as_possible=args.fast)
    replay_through(cfg, records,
                   status_sink=sink.status if sink else None,
                   event_sink=esink.event if esink else None,
                   publisher=publisher)
    for s in (sink, esink):
        if s:
            s.close()
    return 0


def cmd_record(args) -> int:
    header = recording.read_header(args.log)
    with Recorder(args.out, radar_ids=header["radars"]) as rec:
        for record in recording.replay(args.log, speed=args.speed,
                                       as_fast_as_possible=args.fast):
            rec.write(record)
    return 0


def cmd_simulate(args) -> int:
    if args.scenario == "paper":
        sc = simulation.paper_scenario(seed=args.seed)
    else:
        sc = load_scenario_file(args.scenario)
    simulation.simulate(sc, args.out, truth_path=args.truth)
    return 0


def load_scenario_file(path) -> simulation.Scenario:
    import math
    import yaml
    from .geometry import Pose
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    radars = []
    for r in doc.get("radars", []):
        p = r.get("pose", {})
        radars.append(simulation.RadarSpec(
            radar_id=r["radar_id"],
            pose=Pose(x=p.get("x", 0.0), y=p.get("y", 0.0), z=p.get("z", 0.0),
                      yaw=math.radians(p.get("yaw_deg", 0.0)),
                      pitch=math.radians(p.get("pitch_deg", 0.0)),
                      roll=math.radians(p.get("roll_deg", 0.0))),
            azimuth_fov=math.radians(r.get("azimuth_fov_deg", 120.0)),
            elevation_fov=math.radians(r.get("elevation_fov_deg", 30.0)),
            max_range=r.get("max_range", 14.0),
            frame_rate=r.get("frame_rate", 10.0),
            phase=r.get("phase", 0.0)))
    walkers = []
    for w in doc.get("walkers", []):
        walkers.append(simulation.WalkerSpec(
            walker_id=w["walker_id"], entry_time=w.get("entry_time", 0.0),
            waypoints=tuple(tuple(p) for p in w["waypoints"]),
            speed=w.get("speed", 1.0),
            dwells=tuple(tuple(d) for d in w.get("dwells", []))))
    nd = doc.get("noise", {})
    return simulation.Scenario(
        room_x=tuple(doc.get("room_x", (0.0, 12.0))),
        room_y=tuple(doc.get("room_y", (0.0, 6.0))),
        room_height=doc.get("room_height", 2.35),
        body_height=doc.get("body_height", 1.0),
        radars=tuple(radars), walkers=tuple(walkers),
        noise=simulation.NoiseSpec(
            pos_sigma=nd.get("pos_sigma", 0.1),
            points_per_target=nd.get("points_per_target", 6.0),
            ghost_rate=nd.get("ghost_rate", 0.5),
            dropout_prob=nd.get("dropout_prob", 0.02)),
        doppler_zero_suppression=doc.get("doppler_zero_suppression", True),
        duration=doc.get("duration", 60.0),
        seed=doc.get("seed", 0))


def read_count_series(path, zone_id=None):
    series = []
    zones = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            doc = json.loads(line)
            if "count" not in doc:
                continue
            zones.add(doc["zone_id"])
            if zone_id is None or doc["zone_id"] == zone_id:
                series.append((doc["t_s"], doc["count"]))
    if zone_id is None and len(zones) > 1:
        raise ValueError(f"log has multiple zones {sorted(zones)}; pass --zone")
    return series


def read_truth_series(path):
    series = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                series.append((doc["t_s"], doc["count"]))
    return series


def cmd_eval(args) -> int:
    estimate = read_count_series(args.pipeline_log, args.zone)
    truth = read_truth_series(args.truth)
    metrics = simulation.evaluate(estimate, truth,
                                  smoothing_seconds=args.window)
    doc = metrics.to_dict()
    print(json.dumps(doc, indent=2))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radarfuse")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the threaded pipeline from a log")
    run.add_argument("--config", required=True)
    run.add_argument("--log", required=True)
    run.add_argument("--speed", type=float, default=1.0)
    run.add_argument("--mqtt-url")
    run.add_argument("--status-log")
    run.add_argument("--event-log")
    run.set_defaults(func=cmd_run)

    rp = sub.add_parser("replay", help="deterministic offline replay")
    rp.add_argument("--config", required=True)
    rp.add_argument("--log", required=True)
    rp.add_argument("--speed", type=float, default=1.0)
    rp.add_argument("--fast", action="store_true",
                    help="no wall pacing; output is identical either way")
    rp.add_argument("--clustering", choices=["dbscan", "optics"])
    rp.add_argument("--mqtt-url")
    rp.add_argument("--status-log")
    rp.add_argument("--event-log")
    rp.set_defaults(func=cmd_replay)

    rec = sub.add_parser("record", help="re-record a replayed stream")
    rec.add_argument("--log", required=True)
    rec.add_argument("--out", required=True)
    rec.add_argument("--speed", type=float, default=1.0)
    rec.add_argument("--fast", action="store_true")
    rec.set_defaults(func=cmd_record)

    sim = sub.add_parser("simulate", help="render a synthetic scenario")
    sim.add_argument("--scenario", required=True,
                     help="scenario YAML path, or 'paper' for the bundled one")
    sim.add_argument("--out", required=True)
    sim.add_argument("--truth")
    sim.add_argument("--seed", type=int, default=7)
    sim.set_defaults(func=cmd_simulate)

    ev = sub.add_parser("eval", help="score a status log against truth")
    ev.add_argument("--pipeline-log", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--window", type=float, default=30.0)
    ev.add_argument("--zone")
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)
    return ap


def cli(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (simulation.InvalidScenario, recording.FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failure
        print(f"runtime error: {e}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli())
