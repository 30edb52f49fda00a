"""Operator command-line harness.

Subcommands:
  sim         run the simulated OBC, serving telemetry over UDP
  run         run one controller mission (embedded or against a live sim)
  bench-fig8  NMPC vs LOS+PI/PD side by side on the figure-eight
  replay      replay a .olog file or export one topic as CSV
  listen      tail and decode telemetry from a UDP endpoint

Exit codes: 0 success, 2 config/usage error, 3 connectivity error,
4 numeric fault.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import codec, guidance, logbag, runner, transport
from .client import BackseatClient
from .config import ConfigFileError, RunConfig, load_config
from .obc import OtterObc
from .runner import DropoutWindow, run_embedded_mission, write_metrics_csv
from .vessel import NumericFault

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONNECT = 3
EXIT_NUMERIC = 4


def _load(args) -> RunConfig:
    return load_config(getattr(args, "config", None))


def _path_from_args(cfg: RunConfig, spec: str) -> guidance.PolylinePath:
    if spec in ("fig8", "figure-eight", "figure8"):
        return guidance.figure_eight(cfg.bench.amplitude)
    points = []
    with open(spec, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            north, east = (float(part) for part in line.split(","))
            points.append((north, east))
    return guidance.PolylinePath(points, closed=False)


def cmd_sim(args) -> int:
    cfg = _load(args)
    rate_hz = args.rate if args.rate is not None else cfg.transport.rate_hz
    try:
        rate = transport.RateConfig(rate_hz)
        obc = OtterObc(params=cfg.vessel.params, telemetry_hz=rate_hz,
                       env=cfg.vessel.env)
        # each telemetry cycle is up to 4 sentences (pos, att, and the
        # 1 Hz status/time pair); burst keeps the paced stream current
        broadcaster = transport.open_broadcaster(
            cfg.transport.telemetry_endpoint, rate, burst=4)
        listener = transport.open_listener(cfg.transport.command_endpoint)
    except (transport.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except transport.TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"telemetry -> {cfg.transport.telemetry_endpoint.addr} "
          f"at {rate_hz:g} Hz, commands <- "
          f"{cfg.transport.command_endpoint.addr}")
    t0 = time.monotonic()
    try:
        while args.duration is None or time.monotonic() - t0 < args.duration:
            for line, _stamp in listener.poll(0.02):
                try:
                    obc.handle_command(codec.decode_sentence(line))
                except (codec.CodecError, TypeError):
                    pass
            for out in obc.tick(time.monotonic() - t0):
                broadcaster.send(out)
    except KeyboardInterrupt:
        pass
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    finally:
        broadcaster.close()
        listener.close()
    return EXIT_OK


def _run_embedded(cfg: RunConfig, controller: str, path, log_path,
                  dropout=None) -> runner.MissionResult:
    writer = logbag.LogWriter(log_path) if log_path else None
    try:
        result = run_embedded_mission(
            controller, path, params=cfg.vessel.params,
            nmpc_config=cfg.nmpc, los_config=cfg.los, env=cfg.vessel.env,
            duration=cfg.bench.duration, target_laps=cfg.bench.target_laps,
            dropout=dropout, origin_lat=cfg.vessel.origin_lat,
            origin_lon=cfg.vessel.origin_lon, log_writer=writer)
    finally:
        if writer:
            writer.close()
    return result


def cmd_run(args) -> int:
    try:
        cfg = _load(args)
        path = _path_from_args(cfg, args.path)
    except (ConfigFileError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.embedded:
        return _cmd_run_socket(args, cfg, path)
    dropout = None
    if cfg.bench.dropout_start >= 0:
        dropout = DropoutWindow(cfg.bench.dropout_start,
                                cfg.bench.dropout_duration)
    try:
        result = _run_embedded(cfg, args.controller, path, args.log, dropout)
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for key in sorted(result.metrics):
        print(f"{key}: {result.metrics[key]}")
    if not result.completed:
        print("mission timeout: metrics are partial")
    if args.metrics_csv:
        write_metrics_csv(result.metrics, args.metrics_csv)
    return EXIT_OK


def _cmd_run_socket(args, cfg: RunConfig, path) -> int:
    """Drive a controller against an already-running `otterlink sim`."""
    try:
        client = BackseatClient(cfg.transport.telemetry_endpoint,
                                cfg.transport.command_endpoint)
    except transport.TransportError as exc:
        print(f"cannot reach simulator: {exc}", file=sys.stderr)
        return EXIT_CONNECT
    if args.controller == "nmpc":
        ctl = runner.NmpcController(client, path, cfg.nmpc,
                                    cfg.vessel.params,
                                    cfg.vessel.origin_lat,
                                    cfg.vessel.origin_lon)
    else:
        ctl = runner.LosBaselineController(client, path, cfg.los,
                                           cfg.vessel.origin_lat,
                                           cfg.vessel.origin_lon)
    deadline = time.monotonic() + cfg.bench.duration
    got_any = time.monotonic()
    try:
        while time.monotonic() < deadline:
            ctl.step(time.monotonic())
            time.sleep(1.0 / runner.CONTROL_HZ)
            if getattr(ctl, "_latest", None) is not None:
                got_any = time.monotonic()
            elif time.monotonic() - got_any > 5.0:
                print("no telemetry received: is the simulator running?",
                      file=sys.stderr)
                return EXIT_CONNECT
    except KeyboardInterrupt:
        pass
    finally:
        client.close()
    return EXIT_OK


def cmd_bench_fig8(args) -> int:
    try:
        cfg = _load(args)
    except ConfigFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = guidance.figure_eight(cfg.bench.amplitude)
    rows = []
    try:
        for kind in ("nmpc", "baseline"):
            log_path = (f"{args.out_prefix}_{kind}.olog"
                        if args.out_prefix else None)
            result = _run_embedded(cfg, kind, path, log_path)
            rows.append((kind, result))
    except NumericFault as exc:
        print(f"numeric fault: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    header = f"{'controller':<10} {'rms_ct[m]':>10} {'max_ct[m]':>10} " \
             f"{'laps':>6} {'time[s]':>8}"
    print(header)
    csv_lines = ["controller,rms_cross_track_m,max_cross_track_m,laps,"
                 "completion_time_s"]
    for kind, result in rows:
        m = result.metrics
        print(f"{kind:<10} {m['rms_cross_track_m']:>10.3f} "
              f"{m['max_cross_track_m']:>10.3f} {m['laps']:>6.2f} "
              f"{m['completion_time_s']:>8.1f}")
        csv_lines.append(f"{kind},{m['rms_cross_track_m']!r},"
                         f"{m['max_cross_track_m']!r},{m['laps']!r},"
                         f"{m['completion_time_s']!r}")
    nmpc_rms = rows[0][1].metrics["rms_cross_track_m"]
    base_rms = rows[1][1].metrics["rms_cross_track_m"]
    ordering = nmpc_rms < base_rms
    print(f"ordering check (NMPC < baseline): "
          f"{'PASS' if ordering else 'FAIL'}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write("\n".join(csv_lines) + "\n")
    return EXIT_OK if ordering else 1


def cmd_replay(args) -> int:
    try:
        if args.csv_topic:
            count = logbag.export_csv(args.logfile, args.csv_topic,
                                      args.out or "export.csv")
            print(f"exported {count} rows to {args.out or 'export.csv'}")
            return EXIT_OK
        summary = logbag.replay(
            args.logfile, args.speed,
            lambda rec: print(f"[{rec.t_mono:10.3f}] {rec.direction} "
                              f"{rec.topic}: {rec.payload}"))
    except FileNotFoundError:
        print(f"no such log file: {args.logfile}", file=sys.stderr)
        return EXIT_CONFIG
    except logbag.UnknownTopicError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if summary.corrupt_count:
        print(f"warning: skipped {summary.corrupt_count} corrupt lines",
              file=sys.stderr)
    print(f"replayed {summary.delivered} records "
          f"in {summary.wall_time:.2f} s")
    return EXIT_OK


def cmd_listen(args) -> int:
    cfg = _load(args)
    try:
        listener = transport.open_listener(cfg.transport.telemetry_endpoint)
    except transport.TransportError as exc:
        print(f"cannot bind: {exc}", file=sys.stderr)
        return EXIT_CONNECT
    t0 = time.monotonic()
    try:
        while args.duration is None or time.monotonic() - t0 < args.duration:
            for line, stamp in listener.poll(0.2):
                try:
                    msg = codec.decode_sentence(line)
                    tag = type(msg).__name__
                except codec.CodecError as exc:
                    print(f"[{stamp:.3f}] decode error: {exc}")
                    continue
                print(f"[{stamp:.3f}] {tag}: {line.strip()}")
    except KeyboardInterrupt:
        pass
    finally:
        listener.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otterlink",
        description="Otter USV backseat-driver stack: simulator, "
                    "controllers, benchmark, and log tools.")
    parser.add_argument("--config", help="INI config file path")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="run the simulated OBC")
    p_sim.add_argument("--rate", type=float, default=None,
                       help="telemetry rate in Hz (1-20)")
    p_sim.add_argument("--duration", type=float, default=None)
    p_sim.set_defaults(func=cmd_sim)

    p_run = sub.add_parser("run", help="run one controller mission")
    p_run.add_argument("--controller", choices=("nmpc", "baseline"),
                       default="nmpc")
    p_run.add_argument("--path", default="fig8",
                       help="'fig8' or a waypoint file (north,east lines)")
    p_run.add_argument("--embedded", action="store_true",
                       help="run sim and controller in-process (no sockets)")
    p_run.add_argument("--log", default=None, help=".olog output path")
    p_run.add_argument("--metrics-csv", default=None)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench-fig8",
                             help="NMPC vs baseline on the figure-eight")
    p_bench.add_argument("--csv", default=None, help="comparison CSV path")
    p_bench.add_argument("--out-prefix", default=None,
                         help="write per-run .olog files with this prefix")
    p_bench.set_defaults(func=cmd_bench_fig8)

    p_rep = sub.add_parser("replay", help="replay or export a .olog file")
    p_rep.add_argument("logfile")
    p_rep.add_argument("--speed", type=float, default=0.0,
                       help="speed factor; 0 = as fast as possible")
    p_rep.add_argument("--csv-topic", default=None,
                       help="export this topic as CSV instead of replaying")
    p_rep.add_argument("--out", default=None, help="CSV output path")
    p_rep.set_defaults(func=cmd_replay)

    p_listen = sub.add_parser("listen", help="tail decoded telemetry")
    p_listen.add_argument("--duration", type=float, default=None)
    p_listen.set_defaults(func=cmd_listen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigFileError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
