"""Operator/CI command line: acquire, impedance, analyze.

Exit codes: 0 ok, 1 runtime failure, 2 usage error.  Every subcommand is
deterministic given its scenario inputs, so the same invocation in CI
produces the same files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import scenarios as bundled_scenarios
from .detect import (alpha_band_powers, classify_alpha, detect_artifacts,
                     group_bursts, CHEW_REFRACTORY_S, DEFAULT_REFRACTORY_S,
                     DEFAULT_THRESHOLD_UV)
from .dsp.filters import FilterSpec, filter_array
from .dsp.wavelet import cwt_morlet
from .emulator import Scenario
from .protocol import DEFAULT_MONTAGE, DeviceConfig
from .server import DEFAULT_PORT, RigServer, config_from_dict
from .session import SessionError, export_csv, read_session, replay

DEFAULT_DETECT_SITE = "Fz"


def _fail(msg: str, code: int = 1):
    print(f"eegrig: {msg}", file=sys.stderr)
    sys.exit(code)


def _load_scenario(name_or_path: str) -> Scenario:
    if name_or_path in bundled_scenarios.BUNDLED:
        return bundled_scenarios.load(name_or_path)
    path = Path(name_or_path)
    if not path.exists():
        _fail(f"scenario file not found: {name_or_path}", 2)
    return Scenario.from_json(path)


def _load_config(path: str | None) -> DeviceConfig:
    if path is None:
        return DeviceConfig()
    p = Path(path)
    if not p.exists():
        _fail(f"config file not found: {path}", 2)
    return config_from_dict(json.loads(p.read_text()))


def _channel_index(label: str) -> int:
    try:
        return DEFAULT_MONTAGE.index(label)
    except ValueError:
        _fail(f"unknown montage site {label!r}; have {', '.join(DEFAULT_MONTAGE)}", 2)


# ---------------------------------------------------------------------------

def cmd_acquire(args) -> int:
    config = _load_config(args.config)
    if args.source == "emu":
        if not args.scenario:
            _fail("--source emu needs --scenario", 2)
        scenario = _load_scenario(args.scenario)
        rig = RigServer(config=config, scenario=scenario,
                        session_dir=args.out, realtime=not args.fast)
    elif args.source.startswith("replay:"):
        path = args.source.split(":", 1)[1]
        if not Path(path).exists():
            _fail(f"recording not found: {path}", 2)
        speed = 1.0 if args.serve is not None else 0.0
        rig = RigServer(replay_device=replay(path, speed=speed),
                        session_dir=args.out)
    else:
        _fail(f"unknown source {args.source!r}", 2)

    ws = None
    if args.serve is not None:
        port = args.serve or DEFAULT_PORT
        ws = rig.serve(port=port)
        print(f"serving on ws://127.0.0.1:{ws.port}")

    resp = rig.handle_control({"cmd": "start"})
    if not resp["ok"]:
        _fail(resp["message"], 1)
    deadline = time.monotonic() + args.duration if args.duration else None
    try:
        while rig.mode in ("streaming", "replay"):
            if deadline is not None and time.monotonic() >= deadline:
                rig.handle_control({"cmd": "stop"})
                break
            time.sleep(0.02)
    except KeyboardInterrupt:
        rig.handle_control({"cmd": "stop"})
    if rig._error:
        _fail(f"device error: {rig._error}", 1)
    rig.shutdown()
    if ws is not None:
        ws.stop()
    if args.out:
        rec = read_session(args.out)
        print(f"recorded {rec.n_samples} samples to {args.out}")
    return 0


def cmd_impedance(args) -> int:
    scenario = _load_scenario(args.scenario)
    rig = RigServer(config=_load_config(args.config), scenario=scenario)
    if args.channel == "all":
        channels = list(range(8))
    else:
        channels = [_channel_index(c.strip()) for c in args.channel.split(",")]
    resp = rig.handle_control({"cmd": "impedance", "channels": channels})
    if not resp["ok"]:
        _fail(resp["message"], 1)
    readings = resp["readings"]
    if args.json:
        print(json.dumps({"readings": readings}, indent=1))
    else:
        print(f"{'site':<5} {'impedance':>12} {'quality':<10}")
        for r in readings:
            site = DEFAULT_MONTAGE[r["channel"]]
            print(f"{site:<5} {r['ohms'] / 1e3:>10.1f}kΩ {r['quality']:<10}")
    return 0


def cmd_analyze(args) -> int:
    try:
        rec = read_session(args.session)
    except (FileNotFoundError, SessionError) as e:
        _fail(f"cannot read session {args.session}: {e}", 2)
    fs = float(rec.metadata.sample_rate)
    emit = Path(args.emit or (str(args.session).rstrip("/") + "_analysis"))
    emit.mkdir(parents=True, exist_ok=True)
    data = rec.data.astype(np.float64)
    site = args.channel or DEFAULT_DETECT_SITE
    ch = _channel_index(site)

    # filtered traces always come out; the experiment figures start here
    band = (1.0, 40.0)
    filtered = filter_array(FilterSpec("bandpass", band[0], band[1], 4, fs), data)
    _write_trace_csv(emit / "filtered.csv", filtered, fs, rec.metadata.montage)

    if args.band:
        lo, hi = (float(v) for v in args.band.split(":"))
        windows = alpha_band_powers(data[ch], fs, band=(lo, hi), channel=ch)
        with open(emit / "band_power.csv", "w") as f:
            f.write("start_s,end_s,power_uv2\n")
            for s, e, p in windows:
                f.write(f"{s / fs},{e / fs},{p}\n")
        print(f"wrote {emit / 'band_power.csv'} ({len(windows)} windows)")

    if args.cwt:
        freqs = np.arange(1.0, 40.0 + 0.25, 0.5)
        scal = cwt_morlet(filtered[ch], fs, freqs)
        with open(emit / "scalogram.csv", "w") as f:
            f.write("freq_hz," + ",".join(f"{t / fs:.4f}" for t in scal.times) + "\n")
            for i, fr in enumerate(scal.freqs_hz):
                f.write(f"{fr}," + ",".join(f"{v:.4f}" for v in scal.magnitude[i]) + "\n")
        print(f"wrote {emit / 'scalogram.csv'}")

    if args.detect == "blinks":
        events = detect_artifacts(filtered[ch], DEFAULT_THRESHOLD_UV,
                                  args.refractory, fs, channel=ch)
        groups = group_bursts(events, gap_s=2.0, fs=fs)
        payload = {
            "site": site,
            "events": [{"onset": e.onset, "t_s": e.onset / fs,
                        "peak_uv": e.peak_uv} for e in events],
            "group_counts": groups,
        }
        (emit / "events.json").write_text(json.dumps(payload, indent=1))
        print(f"wrote {emit / 'events.json'}: {len(events)} events, groups {groups}")
    elif args.detect == "alpha":
        windows = alpha_band_powers(data[ch], fs, channel=ch)
        baseline = float(np.median([p for _, _, p in windows[:4]]))
        states = classify_alpha(windows, baseline)
        payload = {
            "site": site, "baseline_uv2": baseline,
            "windows": [{"start_s": w.start / fs, "end_s": w.end / fs,
                         "power_uv2": w.power_uv2, "state": w.state}
                        for w in states],
        }
        (emit / "alpha.json").write_text(json.dumps(payload, indent=1))
        closed = sum(1 for w in states if w.state == "eyes-closed")
        print(f"wrote {emit / 'alpha.json'}: {closed}/{len(states)} windows eyes-closed")

    if args.csv:
        export_csv(rec, emit / "session.csv")
        print(f"wrote {emit / 'session.csv'}")
    return 0


def _write_trace_csv(path, data, fs, montage):
    with open(path, "w") as f:
        f.write("index,t_s," + ",".join(montage) + "\n")
        for i in range(data.shape[1]):
            vals = ",".join(f"{v:.4f}" for v in data[:, i])
            f.write(f"{i},{i / fs},{vals}\n")
    print(f"wrote {path}")


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eegrig", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("acquire", help="run the rig and record a session")
    pa.add_argument("--source", default="emu",
                    help="emu or replay:<recording path>")
    pa.add_argument("--scenario", help="bundled scenario name or JSON file")
    pa.add_argument("--config", help="device config JSON file")
    pa.add_argument("--out", help="session output directory")
    pa.add_argument("--serve", nargs="?", const=0, type=int, default=None,
                    metavar="PORT", help="also serve the live socket endpoint")
    pa.add_argument("--duration", type=float, help="stop after this many seconds")
    pa.add_argument("--fast", action="store_true",
                    help="as-fast-as-possible instead of real time")
    pa.set_defaults(func=cmd_acquire)

    pi = sub.add_parser("impedance", help="electrode impedance check")
    pi.add_argument("--scenario", default="impedance-sweep")
    pi.add_argument("--config", help="device config JSON file")
    pi.add_argument("--channel", default="all",
                    help="'all' or comma-separated montage sites")
    pi.add_argument("--json", action="store_true", help="machine-readable output")
    pi.set_defaults(func=cmd_impedance)

    pn = sub.add_parser("analyze", help="figure-style analyses from a session")
    pn.add_argument("session", help="session directory or .neurec file")
    pn.add_argument("--band", metavar="LO:HI", help="band-power series, e.g. 8:12")
    pn.add_argument("--cwt", action="store_true", help="emit a scalogram matrix")
    pn.add_argument("--detect", choices=["blinks", "alpha"])
    pn.add_argument("--channel", help=f"montage site (default {DEFAULT_DETECT_SITE})")
    pn.add_argument("--refractory", type=float, default=DEFAULT_REFRACTORY_S,
                    help=f"detector hold-off seconds (chew wants {CHEW_REFRACTORY_S})")
    pn.add_argument("--emit", help="output directory")
    pn.add_argument("--csv", action="store_true", help="also export the session CSV")
    pn.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1


if __name__ == "__main__":
    sys.exit(main())
