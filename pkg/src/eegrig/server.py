"""Live service: owns the device, runs the pipeline, fans out to subscribers.

Single producer thread pulls frame blocks from the device, decodes and
calibrates them, filters, feeds the detectors, appends to the session and
pushes messages to per-subscriber bounded queues.  A slow subscriber loses
its own oldest messages (counted), never anybody else's, and never a sample
destined for the recorder.

Mode machine: idle <-> streaming, idle <-> impedance, idle <-> replay.
"""

from __future__ import annotations

import json
import os
import threading
import time
from collections import deque
from dataclasses import replace

import numpy as np

from . import protocol, wire
from .chunk import SignalChunk
from .detect import ArtifactDetector, DEFAULT_REFRACTORY_S, DEFAULT_THRESHOLD_UV
from .dsp.filters import FilterSpec, StreamingFilter
from .emulator import AlphaInterval, ArtifactEventSpec, EmulatedDevice, Scenario
from .impedance import ImpedanceReading, measure_impedance
from .protocol import DeviceCommand, DeviceConfig, Opcode
from .session import Marker, ReplayDevice, SessionMetadata, SessionWriter

DEFAULT_PORT = int(os.environ.get("EEGRIG_PORT", "9271"))
DEFAULT_CHUNK_SAMPLES = 25     # 100 ms at 250 SPS


class Subscriber:
    """Bounded drop-oldest message queue; the producer never blocks on it."""

    def __init__(self, maxlen: int = 256, name: str = ""):
        self.name = name
        self._q = deque(maxlen=maxlen)
        self._maxlen = maxlen
        self._event = threading.Event()
        self.dropped = 0

    def push(self, msg: bytes):
        if len(self._q) >= self._maxlen:
            self.dropped += 1
        self._q.append(msg)
        self._event.set()

    def pop(self, timeout: float | None = 0.5) -> bytes | None:
        while True:
            try:
                return self._q.popleft()
            except IndexError:
                self._event.clear()
                if not self._q and not self._event.wait(timeout):
                    return None


def config_from_dict(d: dict) -> DeviceConfig:
    kwargs = {}
    for key in ("sample_rate", "gain", "vref"):
        if key in d:
            kwargs[key] = d[key]
    cfg = DeviceConfig(**kwargs)
    if "leadoff_channels" in d:
        cfg = cfg.with_leadoff_channels(d["leadoff_channels"])
    return cfg


class RigServer:
    """Acquisition core plus JSON control plane.

    Give it an EmulatedDevice factory (scenario) or a ReplayDevice; call
    handle_control for the control plane and subscribe() for the data plane.
    """

    def __init__(self, config: DeviceConfig | None = None,
                 scenario: Scenario | None = None,
                 replay_device: ReplayDevice | None = None,
                 session_dir=None, chunk_samples: int = DEFAULT_CHUNK_SAMPLES,
                 realtime: bool = True, filter_band=(1.0, 40.0),
                 detect_channel: int = 1,
                 threshold_uv: float = DEFAULT_THRESHOLD_UV,
                 refractory_s: float = DEFAULT_REFRACTORY_S,
                 operator: str = ""):
        self.config = config or DeviceConfig()
        self.scenario = scenario
        self._replay_device = replay_device
        self.session_dir = session_dir
        self.chunk_samples = chunk_samples
        self.realtime = realtime
        self.filter_band = filter_band
        self.detect_channel = detect_channel
        self.threshold_uv = threshold_uv
        self.refractory_s = refractory_s
        self.operator = operator

        self.mode = "idle"
        self.device = None
        self.session: SessionWriter | None = None
        self.subscribers: list[Subscriber] = []
        self.last_impedance: list[dict] = []
        self.latency_s: deque = deque(maxlen=4096)   # frame-ready -> enqueue
        self.samples_recorded = 0
        self._seq = 0
        self._t_start = time.monotonic()
        self._thread = None
        self._stop_flag = threading.Event()
        self._lock = threading.RLock()
        self._error = ""

    # -- data plane ---------------------------------------------------------

    def subscribe(self, maxlen: int = 256, name: str = "") -> Subscriber:
        sub = Subscriber(maxlen, name)
        with self._lock:
            self.subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: Subscriber):
        with self._lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)

    def _broadcast(self, msg: bytes):
        with self._lock:
            subs = list(self.subscribers)
        for sub in subs:
            sub.push(msg)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    # -- control plane ------------------------------------------------------

    def handle_control(self, message) -> dict:
        """Execute one control message (dict or JSON text); never raises."""
        try:
            if isinstance(message, (str, bytes)):
                message = json.loads(message)
            if not isinstance(message, dict) or "cmd" not in message:
                return {"ok": False, "error": "parse", "message": "need a cmd field"}
            cmd = message["cmd"]
            if cmd == "status":
                return {"ok": True, "status": self.status()}
            if cmd == "configure":
                return self._cmd_configure(message)
            if cmd == "start":
                return self._cmd_start()
            if cmd == "stop":
                return self._cmd_stop()
            if cmd == "impedance":
                return self._cmd_impedance(message.get("channels"))
            if cmd == "mark":
                return self._cmd_mark(message.get("text", ""))
            if cmd == "scenario_set":
                return self._cmd_scenario_set(message)
            return {"ok": False, "error": "parse", "message": f"unknown cmd {cmd!r}"}
        except (TypeError, ValueError, KeyError) as e:
            return {"ok": False, "error": "parse", "message": str(e)}

    def _state_error(self, what: str) -> dict:
        return {"ok": False, "error": "state",
                "message": f"{what} not allowed in mode {self.mode!r}"}

    def _cmd_configure(self, message) -> dict:
        if self.mode != "idle":
            return self._state_error("configure")
        self.config = config_from_dict(message.get("config", {}))
        return {"ok": True}

    def _make_device(self):
        if self._replay_device is not None:
            return self._replay_device
        if self.scenario is None:
            raise ValueError("no scenario configured for the emulated device")
        dev = EmulatedDevice(self.config, self.scenario, realtime=self.realtime)
        dev.command(DeviceCommand.simple(Opcode.START))
        dev.command(DeviceCommand.simple(Opcode.RDATAC))
        return dev

    def _cmd_start(self) -> dict:
        with self._lock:
            if self.mode != "idle":
                return self._state_error("start")
            try:
                self.device = self._make_device()
            except ValueError as e:
                return {"ok": False, "error": "device", "message": str(e)}
            self.mode = "replay" if isinstance(self.device, ReplayDevice) else "streaming"
            fs = float(self.device.config.sample_rate)
            self._filter = StreamingFilter(
                FilterSpec("bandpass", self.filter_band[0], self.filter_band[1], 4, fs))
            self._alpha_filter = StreamingFilter(FilterSpec("bandpass", 8.0, 12.0, 4, fs))
            self._alpha_acc = np.zeros(8)
            self._alpha_count = 0
            self.latest_alpha_power = [0.0] * 8
            self._detector = ArtifactDetector(self.threshold_uv, self.refractory_s,
                                              fs, channel=self.detect_channel)
            if self.session_dir is not None:
                meta = SessionMetadata.create(
                    os.path.basename(str(self.session_dir)) or "session",
                    self.device.config, self.operator)
                self.session = SessionWriter(self.session_dir, meta)
            self.samples_recorded = 0
            self._error = ""
            self._stop_flag.clear()
            self._thread = threading.Thread(target=self._acquisition_loop,
                                            name="acquisition", daemon=True)
            self._thread.start()
            return {"ok": True, "mode": self.mode}

    def _cmd_stop(self) -> dict:
        if self.mode not in ("streaming", "replay"):
            return self._state_error("stop")
        self._stop_flag.set()
        if self._thread is not None:
            self._thread.join(timeout=10)
        self._finish_run()
        return {"ok": True, "mode": self.mode}

    def _finish_run(self):
        with self._lock:
            if self.session is not None:
                self.session.close()
                self.session = None
            self.device = None
            self.mode = "idle"

    def _cmd_mark(self, text: str) -> dict:
        if self.mode not in ("streaming", "replay"):
            return self._state_error("mark")
        with self._lock:
            index = self.samples_recorded
            if self.session is not None:
                self.session.add_marker(Marker(index, "user", text))
        self._broadcast(wire.pack_json(wire.KIND_EVENT, self._next_seq(),
                                       {"type": "marker", "sample_index": index,
                                        "text": text}))
        return {"ok": True, "sample_index": index}

    def _cmd_scenario_set(self, message) -> dict:
        dev = self.device
        if self.mode != "streaming" or not isinstance(dev, EmulatedDevice):
            return self._state_error("scenario_set")
        fs = float(dev.config.sample_rate)
        t_now = dev._sample_index / fs
        sc = dev.scenario
        if "eyes_closed" in message:
            if message["eyes_closed"]:
                iv = AlphaInterval(start_s=t_now, end_s=sc.duration_s,
                                   amplitude_uv=float(message.get("amplitude_uv", 50.0)),
                                   freq_hz=float(message.get("freq_hz", 10.0)))
                sc = replace(sc, alpha=sc.alpha + (iv,))
            else:
                kept = tuple(
                    a if a.end_s <= t_now else replace(a, end_s=max(a.start_s + 0.01, t_now))
                    for a in sc.alpha if a.start_s < t_now)
                sc = replace(sc, alpha=kept)
        if message.get("artifact") in ("blink", "chew"):
            ev = ArtifactEventSpec(kind=message["artifact"], time_s=t_now + 0.2)
            sc = replace(sc, artifacts=sc.artifacts + (ev,))
        with self._lock:
            dev.scenario = sc
            self.scenario = sc
        return {"ok": True, "t_s": t_now}

    def _cmd_impedance(self, channels) -> dict:
        with self._lock:
            if self.mode != "idle":
                return self._state_error("impedance")
            if self.scenario is None:
                return {"ok": False, "error": "device",
                        "message": "impedance check needs the emulated device"}
            self.mode = "impedance"
        try:
            readings = self._measure_channels(channels or list(range(8)))
            self.last_impedance = [vars(r).copy() for r in readings]
            self._broadcast(wire.pack_json(wire.KIND_IMPEDANCE, self._next_seq(),
                                           {"readings": self.last_impedance}))
            return {"ok": True, "readings": self.last_impedance}
        finally:
            with self._lock:
                self.mode = "idle"

    def _measure_channels(self, channels, window_s: float = 4.0) -> list[ImpedanceReading]:
        # normal DSP stays paused in impedance mode, so the injected tone
        # cannot contaminate band power; one channel measured at a time
        readings = []
        for ch in channels:
            cfg = self.config.with_leadoff_channels([ch])
            dev = EmulatedDevice(cfg, self.scenario, realtime=False)
            dev.command(DeviceCommand.simple(Opcode.START))
            dev.command(DeviceCommand.simple(Opcode.RDATAC))
            fs = float(cfg.sample_rate)
            n = int(window_s * fs)
            _, raw = protocol.decode_frames_array(dev.read_block(n))
            uv = protocol.raw_to_microvolts(raw[:, ch].astype(np.float64),
                                            cfg.gain, cfg.vref)
            # the 1 Hz-wide extraction filter rings for over a second
            readings.append(measure_impedance(
                uv, ch, fs, cfg.leadoff.current_amps, cfg.leadoff.frequency_hz,
                settle_s=1.5))
        return readings

    def status(self) -> dict:
        with self._lock:
            return {
                "mode": self.mode,
                "uptime_s": time.monotonic() - self._t_start,
                "sample_rate": self.config.sample_rate,
                "gain": self.config.gain,
                "samples_recorded": self.samples_recorded,
                "subscribers": [{"name": s.name, "dropped": s.dropped}
                                for s in self.subscribers],
                "impedance": self.last_impedance,
                "alpha_power_uv2": getattr(self, "latest_alpha_power", []),
                "error": self._error,
            }

    # -- producer -----------------------------------------------------------

    def _acquisition_loop(self):
        fs = float(self.device.config.sample_rate)
        montage = protocol.DEFAULT_MONTAGE
        try:
            while not self._stop_flag.is_set():
                block = self.device.read_block(self.chunk_samples)
                t_ready = time.perf_counter()
                if not block:
                    break
                _, raw = protocol.decode_frames_array(block)
                uv = protocol.raw_to_microvolts(
                    raw.T.astype(np.float64),
                    self.device.config.gain, self.device.config.vref)
                start = self.samples_recorded
                chunk = SignalChunk(uv, start, fs)
                filtered = self._filter.process_array(uv)
                alpha = self._alpha_filter.process_array(uv)
                self._alpha_acc += np.sum(alpha * alpha, axis=1)
                self._alpha_count += alpha.shape[1]
                if self._alpha_count >= fs:
                    self.latest_alpha_power = (self._alpha_acc / self._alpha_count).tolist()
                    self._alpha_acc[:] = 0.0
                    self._alpha_count = 0
                events = self._detector.feed(filtered[self.detect_channel])
                with self._lock:
                    if self.session is not None:
                        self.session.append(chunk)
                    self.samples_recorded += chunk.n_samples
                for ev in events:
                    marker = Marker(ev.onset, ev.kind if ev.kind != "generic" else "blink",
                                    f"artifact peak {ev.peak_uv:.1f} uV")
                    with self._lock:
                        if self.session is not None:
                            self.session.add_marker(marker)
                    self._broadcast(wire.pack_json(
                        wire.KIND_EVENT, self._next_seq(),
                        {"type": "artifact", "kind": marker.kind,
                         "sample_index": ev.onset,
                         "channel": montage[self.detect_channel],
                         "peak_uv": ev.peak_uv}))
                self._broadcast(wire.pack_samples(self._next_seq(), start, filtered.T))
                self.latency_s.append(time.perf_counter() - t_ready)
        except Exception as e:   # device died; report via status, never crash
            self._error = f"{type(e).__name__}: {e}"
        finally:
            if not self._stop_flag.is_set():
                self._finish_run()

    # -- socket front-end ---------------------------------------------------

    def serve(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT):
        """Expose control + data over WebSocket and /status over plain HTTP."""
        from .ws import WebSocketClosed, WebSocketServer

        def on_http(path):
            if path.rstrip("/") in ("", "/status"):
                return "200 OK", json.dumps(self.status()).encode()
            return "404 Not Found", b"{}"

        def on_connect(conn, path):
            sub = self.subscribe(name="ws")

            def sender():
                try:
                    while conn.open:
                        msg = sub.pop(timeout=0.5)
                        if msg is not None:
                            conn.send_binary(msg)
                except WebSocketClosed:
                    pass
                finally:
                    self.unsubscribe(sub)

            threading.Thread(target=sender, daemon=True).start()
            try:
                while True:
                    opcode, payload = conn.recv()
                    if opcode == 0x1:   # text = control
                        resp = self.handle_control(payload.decode())
                        conn.send_text(json.dumps(resp))
            except WebSocketClosed:
                pass
            finally:
                self.unsubscribe(sub)
                conn.close()

        self._ws_server = WebSocketServer(host, port, on_connect, on_http).start()
        return self._ws_server

    def shutdown(self):
        if self.mode in ("streaming", "replay"):
            self._cmd_stop()
        srv = getattr(self, "_ws_server", None)
        if srv is not None:
            srv.stop()
