"""Scriptable virtual acquisition device.

Synthesizes 8-channel EEG-like microvolt signals from a Scenario (noise bed,
alpha intervals, blink/chew artifact events, per-electrode contact impedance)
and serves them through the same command/frame contract a real front-end
would.  Everything is deterministic from the scenario seed, so test runs are
byte-reproducible.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import protocol
from .protocol import (
    DeviceCommand, DeviceConfig, Opcode, ProtocolStateError, RegisterMap,
    SampleFrame, NUM_CHANNELS,
)

# montage order: F7 Fz F8 C3 C4 T5 Pz T6
FRONTAL_CHANNELS = (0, 1, 2)
OCCIPITAL_CHANNELS = (5, 6, 7)

# alpha dominates over the occipital lobe; keep a small frontal leak
ALPHA_WEIGHTS = np.array([0.3, 0.3, 0.3, 0.3, 0.3, 1.0, 1.0, 1.0])
# chewing (EMG) shows up everywhere, strongest over the temporal muscles
CHEW_WEIGHTS = np.array([0.7, 0.7, 0.7, 0.7, 0.7, 1.0, 0.7, 1.0])

# scenario impedance above this sets the lead-off status bit in frames
LEADOFF_STATUS_THRESHOLD_OHMS = 500e3


@dataclass(frozen=True)
class NoiseSpec:
    pink_rms_uv: float = 0.0
    white_rms_uv: float = 0.0
    mains_hz: int = 0          # 0 disables the mains tone
    mains_amplitude_uv: float = 0.0


@dataclass(frozen=True)
class AlphaInterval:
    start_s: float
    end_s: float
    amplitude_uv: float = 50.0
    freq_hz: float = 10.0


@dataclass(frozen=True)
class ArtifactEventSpec:
    kind: str                  # "blink" | "chew"
    time_s: float
    amplitude_uv: float = 0.0  # 0 = template default
    duration_s: float = 0.0    # 0 = template default
    channels: tuple[int, ...] | None = None


@dataclass(frozen=True)
class Scenario:
    duration_s: float
    seed: int = 0
    noise: NoiseSpec = NoiseSpec()
    alpha: tuple[AlphaInterval, ...] = ()
    artifacts: tuple[ArtifactEventSpec, ...] = ()
    impedance_ohms: tuple[float, ...] = (10e3,) * NUM_CHANNELS

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if len(self.impedance_ohms) != NUM_CHANNELS:
            raise ValueError("impedance_ohms needs one entry per channel")
        if any(z < 0 for z in self.impedance_ohms):
            raise ValueError("impedance must be >= 0")
        for a in self.alpha:
            if not (0 <= a.start_s < a.end_s <= self.duration_s):
                raise ValueError(f"alpha interval [{a.start_s}, {a.end_s}] out of bounds")
            if not 8.0 <= a.freq_hz <= 12.0:
                raise ValueError("alpha frequency must lie in 8-12 Hz")
            if a.amplitude_uv < 0:
                raise ValueError("alpha amplitude must be >= 0")
        for ev in self.artifacts:
            if ev.kind not in ("blink", "chew"):
                raise ValueError(f"unknown artifact kind {ev.kind!r}")
            if not 0 <= ev.time_s <= self.duration_s:
                raise ValueError("artifact time outside scenario")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        noise = NoiseSpec(**d.get("noise", {}))
        alpha = tuple(AlphaInterval(**a) for a in d.get("alpha", []))
        artifacts = tuple(
            ArtifactEventSpec(**{**ev, "channels": tuple(ev["channels"]) if ev.get("channels") else None})
            for ev in d.get("artifacts", [])
        )
        return cls(
            duration_s=d["duration_s"],
            seed=d.get("seed", 0),
            noise=noise,
            alpha=alpha,
            artifacts=artifacts,
            impedance_ohms=tuple(d.get("impedance_ohms", (10e3,) * NUM_CHANNELS)),
        )

    @classmethod
    def from_json(cls, path) -> "Scenario":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return {
            "duration_s": self.duration_s,
            "seed": self.seed,
            "noise": vars(self.noise).copy(),
            "alpha": [vars(a).copy() for a in self.alpha],
            "artifacts": [
                {**vars(ev), "channels": list(ev.channels) if ev.channels else None}
                for ev in self.artifacts
            ],
            "impedance_ohms": list(self.impedance_ohms),
        }


# ---------------------------------------------------------------------------
# Signal synthesis

def pink_noise(seed: int, n: int, fs: float, rms_uv: float = 1.0) -> np.ndarray:
    """Zero-mean 1/f-power noise, exactly scaled to the requested RMS.

    Built in the frequency domain: white spectrum shaped by 1/sqrt(f), which
    gives a -1 decade/decade PSD slope across the analysis band.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if rms_uv == 0:
        return np.zeros(n)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9A1C]))
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    shape = np.zeros_like(freqs)
    shape[1:] = 1.0 / np.sqrt(freqs[1:])
    x = np.fft.irfft(spec * shape, n)
    x -= x.mean()
    return x * (rms_uv / np.sqrt(np.mean(x * x)))


def blink_template(fs: float, amplitude_uv: float = 150.0, duration_s: float = 0.4) -> np.ndarray:
    """Biphasic eyelid pulse: positive lobe, then a smaller negative lobe."""
    n = max(int(round(duration_s * fs)), 4)
    n_pos = int(round(n * 0.625))
    t_pos = np.arange(n_pos) / n_pos
    t_neg = np.arange(n - n_pos) / max(n - n_pos, 1)
    pos = amplitude_uv * np.sin(np.pi * t_pos)
    neg = -0.4 * amplitude_uv * np.sin(np.pi * t_neg)
    return np.concatenate([pos, neg])


def chew_template(fs: float, amplitude_uv: float = 300.0, duration_s: float = 1.0) -> np.ndarray:
    """Masseter burst train: ~25 Hz oscillation bursts repeating at 4 Hz."""
    n = max(int(round(duration_s * fs)), 4)
    t = np.arange(n) / fs
    burst_rate = 4.0
    burst_width = 0.08  # seconds, half-width of each Hann burst
    envelope = np.zeros(n)
    n_bursts = int(math.floor(duration_s * burst_rate)) + 1
    for k in range(n_bursts):
        center = k / burst_rate + burst_width
        win = np.clip(1 - np.abs(t - center) / burst_width, 0, None)
        envelope = np.maximum(envelope, np.sin(win * np.pi / 2) ** 2)
    return amplitude_uv * envelope * np.sin(2 * np.pi * 25.0 * t)


def _artifact_channels(ev: ArtifactEventSpec) -> tuple[tuple[int, ...], np.ndarray]:
    if ev.channels is not None:
        return ev.channels, np.ones(NUM_CHANNELS)
    if ev.kind == "blink":
        return FRONTAL_CHANNELS, np.ones(NUM_CHANNELS)
    return tuple(range(NUM_CHANNELS)), CHEW_WEIGHTS


@lru_cache(maxsize=64)
def _channel_signal(scenario: Scenario, channel: int, fs: float) -> np.ndarray:
    """Full-duration microvolt trace for one channel (cached, deterministic)."""
    n = int(round(scenario.duration_s * fs))
    t = np.arange(n) / fs
    x = np.zeros(n)

    ns = scenario.noise
    if ns.pink_rms_uv > 0:
        x += pink_noise(scenario.seed * NUM_CHANNELS + channel, n, fs, ns.pink_rms_uv)
    if ns.white_rms_uv > 0:
        rng = np.random.default_rng(np.random.SeedSequence([scenario.seed, channel, 0x57]))
        x += ns.white_rms_uv * rng.standard_normal(n)
    if ns.mains_hz and ns.mains_amplitude_uv > 0:
        x += ns.mains_amplitude_uv * np.sin(2 * np.pi * ns.mains_hz * t)

    ramp_s = 0.1  # raised-cosine on/offset so intervals don't click
    for a in scenario.alpha:
        i0, i1 = int(round(a.start_s * fs)), int(round(a.end_s * fs))
        seg_t = t[i0:i1]
        env = np.ones(i1 - i0)
        nr = min(int(ramp_s * fs), (i1 - i0) // 2)
        if nr > 0:
            r = 0.5 - 0.5 * np.cos(np.pi * np.arange(nr) / nr)
            env[:nr] = r
            env[-nr:] = r[::-1]
        x[i0:i1] += ALPHA_WEIGHTS[channel] * a.amplitude_uv * env * \
            np.sin(2 * np.pi * a.freq_hz * seg_t)

    for ev in scenario.artifacts:
        chans, weights = _artifact_channels(ev)
        if channel not in chans:
            continue
        if ev.kind == "blink":
            tpl = blink_template(fs, ev.amplitude_uv or 150.0, ev.duration_s or 0.4)
        else:
            tpl = chew_template(fs, ev.amplitude_uv or 300.0, ev.duration_s or 1.0)
        i0 = int(round(ev.time_s * fs))
        i1 = min(i0 + len(tpl), n)
        x[i0:i1] += weights[channel] * tpl[: i1 - i0]

    return x


def synthesize_microvolts(scenario: Scenario, channel: int, sample_index: int, fs: float) -> float:
    """Scenario ground truth for one (channel, sample) point, in microvolts."""
    if not 0 <= channel < NUM_CHANNELS:
        raise ValueError("channel out of range")
    sig = _channel_signal(scenario, channel, fs)
    if sample_index >= len(sig):
        return 0.0
    return float(sig[sample_index])


def scenario_matrix(scenario: Scenario, fs: float) -> np.ndarray:
    """All channels as an (8, n) microvolt matrix."""
    return np.stack([_channel_signal(scenario, c, fs) for c in range(NUM_CHANNELS)])


# ---------------------------------------------------------------------------
# Emulated device

class EmulatedDevice:
    """State machine speaking the byte-level device contract.

    Single-owner: one thread drives commands and reads frames.  ``realtime``
    paces frame delivery at the configured sample rate; leave it off for
    as-fast-as-possible replay in tests and CI.
    """

    def __init__(self, config: DeviceConfig, scenario: Scenario, realtime: bool = False):
        self.scenario = scenario
        self.realtime = realtime
        self.registers = config.to_register_map()
        self._vref = config.vref
        self._started = False
        self._continuous = False
        self._sample_index = 0
        self._t0 = None
        self.byte_log = bytearray()   # every byte in/out, for conformance traces
        self._refresh_config()

    def _refresh_config(self):
        self.config = DeviceConfig.from_register_map(self.registers, vref=self._vref)
        statp = 0
        for ch, z in enumerate(self.scenario.impedance_ohms):
            if z > LEADOFF_STATUS_THRESHOLD_OHMS:
                statp |= 1 << ch
        self.registers.poke(protocol.REG["LOFF_STATP"], statp)
        self._loff_statp = statp

    # -- command plane ------------------------------------------------------

    def command(self, cmd: DeviceCommand) -> bytes:
        """Execute one command; returns register bytes for RREG, else b''."""
        wire = protocol.encode_command(cmd)
        self.byte_log.extend(wire)
        op = cmd.opcode

        if op in (Opcode.RREG, Opcode.WREG, Opcode.RDATA) and self._continuous:
            raise ProtocolStateError(f"{op.name} not allowed in continuous read mode")

        if op == Opcode.RESET:
            self.registers.reset()
            self._started = False
            self._continuous = False
            self._sample_index = 0
            self._refresh_config()
        elif op == Opcode.START:
            self._started = True
            self._t0 = time.monotonic()
        elif op == Opcode.STOP:
            self._started = False
        elif op == Opcode.RDATAC:
            if self._continuous:
                raise ProtocolStateError("already in continuous read mode")
            self._continuous = True
        elif op == Opcode.SDATAC:
            self._continuous = False
        elif op == Opcode.RREG:
            resp = self.registers.read_block(cmd.address, cmd.count)
            self.byte_log.extend(resp)
            return resp
        elif op == Opcode.WREG:
            self.registers.write_block(cmd.address, cmd.data)
            self._refresh_config()
        elif op in (Opcode.WAKEUP, Opcode.STANDBY):
            pass
        elif op == Opcode.RDATA:
            frame = self._make_frame()
            wire_frame = protocol.encode_frame(frame)
            self._sample_index += 1
            self.byte_log.extend(wire_frame)
            return wire_frame
        return b""

    # -- data plane ---------------------------------------------------------

    @property
    def streaming(self) -> bool:
        return self._started and self._continuous

    def _make_frame(self) -> SampleFrame:
        cfg = self.config
        fs = float(cfg.sample_rate)
        k = self._sample_index
        uv = np.array([synthesize_microvolts(self.scenario, c, k, fs)
                       for c in range(NUM_CHANNELS)])
        lo = cfg.leadoff
        if lo.enabled_channels:
            t = k / fs
            for ch in lo.enabled_channels:
                z = self.scenario.impedance_ohms[ch]
                v_pp_uv = z * lo.current_amps * 1e6
                if lo.frequency_hz is None:
                    uv[ch] += v_pp_uv
                else:
                    uv[ch] += 0.5 * v_pp_uv * np.sin(2 * np.pi * lo.frequency_hz * t)
        raw = [int(protocol.microvolts_to_raw(v, cfg.gain, cfg.vref)) if cfg.channels[c].enabled else 0
               for c, v in enumerate(uv)]
        return SampleFrame.make(raw, seq=k, loff_statp=self._loff_statp)

    def read_frame(self) -> bytes | None:
        """Next wire frame, or None when not streaming / scenario exhausted."""
        if not self.streaming:
            return None
        cfg = self.config
        n_total = int(round(self.scenario.duration_s * cfg.sample_rate))
        if self._sample_index >= n_total:
            return None
        if self.realtime:
            due = self._t0 + (self._sample_index + 1) / cfg.sample_rate
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        frame = self._make_frame()
        self._sample_index += 1
        wire = protocol.encode_frame(frame)
        self.byte_log.extend(wire)
        return wire

    def read_frames(self, n: int) -> list[bytes]:
        out = []
        for _ in range(n):
            f = self.read_frame()
            if f is None:
                break
            out.append(f)
        return out

    def read_block(self, n: int) -> bytes:
        """Up to n frames as one concatenated byte string (hot path).

        Same samples as n read_frame calls, produced vectorized; realtime
        mode paces to the end of the block instead of per frame.
        """
        if not self.streaming:
            return b""
        cfg = self.config
        fs = float(cfg.sample_rate)
        n_total = int(round(self.scenario.duration_s * fs))
        k0 = self._sample_index
        n = min(n, n_total - k0)
        if n <= 0:
            return b""
        uv = np.stack([_channel_signal(self.scenario, c, fs)[k0:k0 + n]
                       for c in range(NUM_CHANNELS)]).copy()
        lo = cfg.leadoff
        if lo.enabled_channels:
            t = np.arange(k0, k0 + n) / fs
            for ch in lo.enabled_channels:
                v_pp_uv = self.scenario.impedance_ohms[ch] * lo.current_amps * 1e6
                if lo.frequency_hz is None:
                    uv[ch] += v_pp_uv
                else:
                    uv[ch] += 0.5 * v_pp_uv * np.sin(2 * np.pi * lo.frequency_hz * t)
        for c, chcfg in enumerate(cfg.channels):
            if not chcfg.enabled:
                uv[c] = 0.0
        raw = protocol.microvolts_to_raw(uv.T, cfg.gain, cfg.vref)
        status = (protocol.SYNC_NIBBLE << 20) | ((self._loff_statp & 0xFF) << 12)
        wire = protocol.encode_frames_array(raw, status)
        self._sample_index += n
        if self.realtime:
            due = self._t0 + self._sample_index / fs
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
        return wire


def run_emulated_device(config: DeviceConfig, scenario: Scenario, realtime: bool = False):
    """Convenience generator: full start/stream/stop cycle over a scenario."""
    dev = EmulatedDevice(config, scenario, realtime=realtime)
    dev.command(DeviceCommand.simple(Opcode.RESET))
    for addr, value in _config_writes(config):
        dev.command(DeviceCommand.wreg(addr, bytes([value])))
    dev.command(DeviceCommand.simple(Opcode.START))
    dev.command(DeviceCommand.simple(Opcode.RDATAC))
    try:
        while True:
            wire = dev.read_frame()
            if wire is None:
                break
            yield protocol.decode_frame(wire, seq=dev._sample_index - 1)
    finally:
        dev.command(DeviceCommand.simple(Opcode.SDATAC))
        dev.command(DeviceCommand.simple(Opcode.STOP))


def _config_writes(config: DeviceConfig):
    """Register writes that bring a reset device to the given config."""
    target = config.to_register_map()
    base = RegisterMap()
    for addr in range(0x01, 0x18):
        if target.read(addr) != base.read(addr):
            yield addr, target.read(addr)
