"""ADS1299 byte-level contract: commands, register map, data frames, calibration.

Everything here is pure value manipulation -- no I/O, no device state -- so the
same code backs the emulator, any real SPI transport, and the acquisition loop.
Wire frames are big-endian (that is what the chip shifts out); host-side file
and stream formats elsewhere in the package are little-endian.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

FRAME_SIZE = 27          # 3 status bytes + 8 channels x 3 bytes
NUM_CHANNELS = 8
SYNC_NIBBLE = 0xC        # top 4 bits of every status word
RAW_MIN = -(1 << 23)
RAW_MAX = (1 << 23) - 1

DEFAULT_MONTAGE = ("F7", "Fz", "F8", "C3", "C4", "T5", "Pz", "T6")


class ProtocolError(Exception):
    """Base for byte-level protocol violations."""


class FramingError(ProtocolError):
    """Frame buffer has the wrong length."""


class DesyncError(ProtocolError):
    """Status sync nibble missing; caller should resynchronize."""


class ProtocolStateError(ProtocolError):
    """Command not legal in the device's current state."""


# ---------------------------------------------------------------------------
# Commands

class Opcode(enum.IntEnum):
    WAKEUP = 0x02
    STANDBY = 0x04
    RESET = 0x06
    START = 0x08
    STOP = 0x0A
    RDATAC = 0x10
    SDATAC = 0x11
    RDATA = 0x12
    RREG = 0x20   # OR'd with start address; second byte = count - 1
    WREG = 0x40


@dataclass(frozen=True)
class DeviceCommand:
    opcode: Opcode
    address: int = 0
    count: int = 0
    data: bytes = b""

    @classmethod
    def simple(cls, opcode: Opcode) -> "DeviceCommand":
        return cls(opcode)

    @classmethod
    def rreg(cls, address: int, count: int) -> "DeviceCommand":
        return cls(Opcode.RREG, address, count)

    @classmethod
    def wreg(cls, address: int, data: bytes) -> "DeviceCommand":
        return cls(Opcode.WREG, address, len(data), bytes(data))


def encode_command(cmd: DeviceCommand) -> bytes:
    """Encode a command to its exact opcode bytes.

    RREG/WREG pack the start address into the opcode byte and ``count - 1``
    into the second byte; WREG appends the payload.
    """
    op = cmd.opcode
    if op in (Opcode.RREG, Opcode.WREG):
        if cmd.count < 1:
            raise ValueError("register count must be >= 1")
        if not 0 <= cmd.address <= 0x17:
            raise ValueError("register address out of range 0x00-0x17")
        if cmd.address + cmd.count > 0x18:
            raise ValueError(
                f"register window 0x{cmd.address:02X}+{cmd.count} runs past 0x17"
            )
        head = bytes([op | cmd.address, cmd.count - 1])
        if op == Opcode.WREG:
            if len(cmd.data) != cmd.count:
                raise ValueError("WREG payload length must equal count")
            return head + cmd.data
        return head
    return bytes([op])


# ---------------------------------------------------------------------------
# Register map

@dataclass(frozen=True)
class RegisterDef:
    address: int
    name: str
    reset_value: int
    readonly_mask: int = 0x00   # bits that ignore writes


# Layout per the manufacturer datasheet.  ID, lead-off status registers are
# fully read-only.
_REGISTER_DEFS = (
    RegisterDef(0x00, "ID", 0x3E, 0xFF),
    RegisterDef(0x01, "CONFIG1", 0x96),
    RegisterDef(0x02, "CONFIG2", 0xC0),
    RegisterDef(0x03, "CONFIG3", 0x60),
    RegisterDef(0x04, "LOFF", 0x00),
    RegisterDef(0x05, "CH1SET", 0x61),
    RegisterDef(0x06, "CH2SET", 0x61),
    RegisterDef(0x07, "CH3SET", 0x61),
    RegisterDef(0x08, "CH4SET", 0x61),
    RegisterDef(0x09, "CH5SET", 0x61),
    RegisterDef(0x0A, "CH6SET", 0x61),
    RegisterDef(0x0B, "CH7SET", 0x61),
    RegisterDef(0x0C, "CH8SET", 0x61),
    RegisterDef(0x0D, "BIAS_SENSP", 0x00),
    RegisterDef(0x0E, "BIAS_SENSN", 0x00),
    RegisterDef(0x0F, "LOFF_SENSP", 0x00),
    RegisterDef(0x10, "LOFF_SENSN", 0x00),
    RegisterDef(0x11, "LOFF_FLIP", 0x00),
    RegisterDef(0x12, "LOFF_STATP", 0x00, 0xFF),
    RegisterDef(0x13, "LOFF_STATN", 0x00, 0xFF),
    RegisterDef(0x14, "GPIO", 0x0F),
    RegisterDef(0x15, "MISC1", 0x00),
    RegisterDef(0x16, "MISC2", 0x00),
    RegisterDef(0x17, "CONFIG4", 0x00),
)

REG = {d.name: d.address for d in _REGISTER_DEFS}


class RegisterMap:
    """Mutable model of the 24 device registers (0x00-0x17).

    Writes through :meth:`write` respect each register's read-only mask;
    :meth:`poke` bypasses it (the emulator uses poke to publish lead-off
    status).  Single-owner mutable state: do not share across threads.
    """

    def __init__(self):
        self._defs = {d.address: d for d in _REGISTER_DEFS}
        self._values = {d.address: d.reset_value for d in _REGISTER_DEFS}

    def reset(self) -> None:
        for d in _REGISTER_DEFS:
            self._values[d.address] = d.reset_value

    def _check_addr(self, address: int) -> RegisterDef:
        try:
            return self._defs[address]
        except KeyError:
            raise ValueError(f"no register at address 0x{address:02X}") from None

    def read(self, address: int) -> int:
        self._check_addr(address)
        return self._values[address]

    def write(self, address: int, value: int) -> None:
        d = self._check_addr(address)
        if not 0 <= value <= 0xFF:
            raise ValueError("register value must be one byte")
        keep = self._values[address] & d.readonly_mask
        self._values[address] = keep | (value & ~d.readonly_mask & 0xFF)

    def poke(self, address: int, value: int) -> None:
        self._check_addr(address)
        self._values[address] = value & 0xFF

    def read_block(self, address: int, count: int) -> bytes:
        return bytes(self.read(address + i) for i in range(count))

    def write_block(self, address: int, data: bytes) -> None:
        for i, b in enumerate(data):
            self.write(address + i, b)

    def name_of(self, address: int) -> str:
        return self._check_addr(address).name


# ---------------------------------------------------------------------------
# Device configuration <-> registers

class InputMux(enum.IntEnum):
    """CHnSET MUX[2:0] settings (subset the rig uses)."""
    NORMAL = 0b000
    SHORTED = 0b001
    BIAS_MEAS = 0b010
    MVDD = 0b011
    TEST = 0b101


SAMPLE_RATES = {250: 0b110, 500: 0b101, 1000: 0b100, 2000: 0b011}
GAIN_CODES = {1: 0b000, 2: 0b001, 4: 0b010, 6: 0b011, 8: 0b100, 12: 0b101, 24: 0b110}
LEADOFF_CURRENT_CODES = {6e-9: 0b00, 24e-9: 0b01}
# FLEAD_OFF[1:0]; None means DC excitation
LEADOFF_FREQ_CODES = {None: 0b00, 7.8: 0b01, 31.2: 0b10}

_RATE_FROM_CODE = {v: k for k, v in SAMPLE_RATES.items()}
_GAIN_FROM_CODE = {v: k for k, v in GAIN_CODES.items()}
_CURRENT_FROM_CODE = {v: k for k, v in LEADOFF_CURRENT_CODES.items()}
_FREQ_FROM_CODE = {v: k for k, v in LEADOFF_FREQ_CODES.items()}


@dataclass(frozen=True)
class ChannelConfig:
    enabled: bool = True
    input_mux: InputMux = InputMux.NORMAL


@dataclass(frozen=True)
class LeadOffConfig:
    current_amps: float = 24e-9
    frequency_hz: float | None = 31.2       # None = DC
    enabled_channels: tuple[int, ...] = ()  # channels with injection active


@dataclass(frozen=True)
class DeviceConfig:
    sample_rate: int = 250
    gain: int = 24
    vref: float = 4.5
    channels: tuple[ChannelConfig, ...] = tuple(ChannelConfig() for _ in range(8))
    leadoff: LeadOffConfig = LeadOffConfig()

    def __post_init__(self):
        if self.sample_rate not in SAMPLE_RATES:
            raise ValueError(f"unsupported sample rate {self.sample_rate}")
        if self.gain not in GAIN_CODES:
            raise ValueError(f"unsupported PGA gain {self.gain}")
        if self.vref <= 0:
            raise ValueError("vref must be positive")
        if len(self.channels) != NUM_CHANNELS:
            raise ValueError("exactly 8 channel configs required")
        if self.leadoff.current_amps not in LEADOFF_CURRENT_CODES:
            raise ValueError("lead-off current must be 6 nA or 24 nA")
        if self.leadoff.frequency_hz not in LEADOFF_FREQ_CODES:
            raise ValueError("lead-off frequency must be DC, 7.8 or 31.2 Hz")
        for ch in self.leadoff.enabled_channels:
            if not 0 <= ch < NUM_CHANNELS:
                raise ValueError("lead-off channel index out of range")

    def with_leadoff_channels(self, channels) -> "DeviceConfig":
        lo = replace(self.leadoff, enabled_channels=tuple(sorted(channels)))
        return replace(self, leadoff=lo)

    def to_register_map(self) -> RegisterMap:
        regs = RegisterMap()
        cfg1 = (regs.read(REG["CONFIG1"]) & ~0x07) | SAMPLE_RATES[self.sample_rate]
        regs.write(REG["CONFIG1"], cfg1)
        # internal reference buffer on
        regs.write(REG["CONFIG3"], regs.read(REG["CONFIG3"]) | 0x80)
        gain_code = GAIN_CODES[self.gain]
        for i, ch in enumerate(self.channels):
            val = (0x00 if ch.enabled else 0x80) | (gain_code << 4) | int(ch.input_mux)
            regs.write(REG["CH1SET"] + i, val)
        loff = (LEADOFF_CURRENT_CODES[self.leadoff.current_amps] << 2) | \
            LEADOFF_FREQ_CODES[self.leadoff.frequency_hz]
        regs.write(REG["LOFF"], loff)
        sensp = 0
        for ch in self.leadoff.enabled_channels:
            sensp |= 1 << ch
        regs.write(REG["LOFF_SENSP"], sensp)
        return regs

    @classmethod
    def from_register_map(cls, regs: RegisterMap, vref: float = 4.5) -> "DeviceConfig":
        rate_code = regs.read(REG["CONFIG1"]) & 0x07
        if rate_code not in _RATE_FROM_CODE:
            raise ValueError(f"unsupported DR code {rate_code:#05b}")
        channels = []
        gain = None
        for i in range(NUM_CHANNELS):
            val = regs.read(REG["CH1SET"] + i)
            code = (val >> 4) & 0x07
            if code not in _GAIN_FROM_CODE:
                raise ValueError(f"unsupported gain code on channel {i}")
            ch_gain = _GAIN_FROM_CODE[code]
            gain = ch_gain if gain is None else gain
            if ch_gain != gain:
                raise ValueError("per-channel gains differ; single-gain subset only")
            channels.append(ChannelConfig(
                enabled=not bool(val & 0x80),
                input_mux=InputMux(val & 0x07),
            ))
        loff = regs.read(REG["LOFF"])
        current = _CURRENT_FROM_CODE.get((loff >> 2) & 0x03)
        freq_code = loff & 0x03
        if current is None or freq_code not in _FREQ_FROM_CODE:
            raise ValueError("unsupported lead-off setting")
        sensp = regs.read(REG["LOFF_SENSP"])
        enabled = tuple(i for i in range(NUM_CHANNELS) if sensp & (1 << i))
        return cls(
            sample_rate=_RATE_FROM_CODE[rate_code],
            gain=gain,
            vref=vref,
            channels=tuple(channels),
            leadoff=LeadOffConfig(current, _FREQ_FROM_CODE[freq_code], enabled),
        )


# ---------------------------------------------------------------------------
# Data frames

@dataclass(frozen=True)
class SampleFrame:
    """One conversion result: status word, 8 raw codes, sequence index."""
    status: int
    raw: tuple[int, ...]
    seq: int

    @classmethod
    def make(cls, raw, seq, loff_statp=0, loff_statn=0, gpio=0) -> "SampleFrame":
        status = (SYNC_NIBBLE << 20) | ((loff_statp & 0xFF) << 12) | \
            ((loff_statn & 0xFF) << 4) | (gpio & 0x0F)
        return cls(status, tuple(raw), seq)

    @property
    def loff_statp(self) -> int:
        return (self.status >> 12) & 0xFF

    @property
    def loff_statn(self) -> int:
        return (self.status >> 4) & 0xFF

    @property
    def gpio(self) -> int:
        return self.status & 0x0F


def decode_frame(buf: bytes, seq: int = 0) -> SampleFrame:
    """Decode one 27-byte wire frame.

    Raises FramingError on wrong length, DesyncError if the sync nibble is
    missing (caller should run the resync scan).
    """
    if len(buf) != FRAME_SIZE:
        raise FramingError(f"expected {FRAME_SIZE} bytes, got {len(buf)}")
    status = (buf[0] << 16) | (buf[1] << 8) | buf[2]
    if (status >> 20) != SYNC_NIBBLE:
        raise DesyncError(f"bad sync nibble in status 0x{status:06X}")
    raw = []
    for i in range(NUM_CHANNELS):
        off = 3 + 3 * i
        v = (buf[off] << 16) | (buf[off + 1] << 8) | buf[off + 2]
        if v & 0x800000:
            v -= 1 << 24
        raw.append(v)
    return SampleFrame(status, tuple(raw), seq)


def encode_frame(frame: SampleFrame) -> bytes:
    """Inverse of decode_frame; emulator side."""
    out = bytearray(FRAME_SIZE)
    out[0] = (frame.status >> 16) & 0xFF
    out[1] = (frame.status >> 8) & 0xFF
    out[2] = frame.status & 0xFF
    for i, v in enumerate(frame.raw):
        if not RAW_MIN <= v <= RAW_MAX:
            raise ValueError(f"raw[{i}]={v} outside signed 24-bit range")
        u = v & 0xFFFFFF
        off = 3 + 3 * i
        out[off] = (u >> 16) & 0xFF
        out[off + 1] = (u >> 8) & 0xFF
        out[off + 2] = u & 0xFF
    return bytes(out)


def decode_frames_array(buf: bytes):
    """Vectorized decode of concatenated frames.

    Returns (status (n,) uint32, raw (n, 8) int32).  Used on the hot
    acquisition path; semantics identical to decode_frame per frame.
    """
    import numpy as np
    if len(buf) % FRAME_SIZE:
        raise FramingError(f"buffer length {len(buf)} not a frame multiple")
    b = np.frombuffer(buf, dtype=np.uint8).reshape(-1, FRAME_SIZE)
    status = (b[:, 0].astype(np.uint32) << 16) | (b[:, 1].astype(np.uint32) << 8) | b[:, 2]
    if np.any((status >> 20) != SYNC_NIBBLE):
        raise DesyncError("bad sync nibble in batch")
    ch = b[:, 3:].reshape(-1, NUM_CHANNELS, 3).astype(np.int64)
    raw = (ch[:, :, 0] << 16) | (ch[:, :, 1] << 8) | ch[:, :, 2]
    raw = np.where(raw & 0x800000, raw - (1 << 24), raw)
    return status, raw.astype(np.int32)


def encode_frames_array(raw, status: int) -> bytes:
    """Vectorized inverse of decode_frames_array for a constant status word."""
    import numpy as np
    raw = np.asarray(raw, dtype=np.int64)
    if raw.ndim != 2 or raw.shape[1] != NUM_CHANNELS:
        raise ValueError("raw must be (n_frames, 8)")
    if np.any((raw < RAW_MIN) | (raw > RAW_MAX)):
        raise ValueError("raw code outside signed 24-bit range")
    n = raw.shape[0]
    out = np.empty((n, FRAME_SIZE), dtype=np.uint8)
    out[:, 0] = (status >> 16) & 0xFF
    out[:, 1] = (status >> 8) & 0xFF
    out[:, 2] = status & 0xFF
    u = raw & 0xFFFFFF
    out[:, 3::3] = (u >> 16) & 0xFF
    out[:, 4::3] = (u >> 8) & 0xFF
    out[:, 5::3] = u & 0xFF
    return out.tobytes()


class FrameSync:
    """Streaming framer with resynchronization.

    Feed arbitrary byte chunks; yields decoded frames.  After a desync it
    scans forward one byte at a time until a position looks like a frame
    boundary (sync nibble here and 27 bytes later), counting discarded bytes
    in ``discarded_bytes``.
    """

    def __init__(self):
        self._buf = bytearray()
        self._seq = 0
        self.discarded_bytes = 0

    def _boundary_plausible(self) -> bool:
        if (self._buf[0] >> 4) != SYNC_NIBBLE:
            return False
        # confirm against the next frame's sync when we have it
        if len(self._buf) > FRAME_SIZE:
            return (self._buf[FRAME_SIZE] >> 4) == SYNC_NIBBLE
        return True

    def feed(self, data: bytes):
        self._buf.extend(data)
        while len(self._buf) >= FRAME_SIZE:
            if not self._boundary_plausible():
                del self._buf[0]
                self.discarded_bytes += 1
                continue
            try:
                frame = decode_frame(bytes(self._buf[:FRAME_SIZE]), self._seq)
            except DesyncError:
                del self._buf[0]
                self.discarded_bytes += 1
                continue
            del self._buf[:FRAME_SIZE]
            self._seq += 1
            yield frame


# ---------------------------------------------------------------------------
# Calibration

def lsb_microvolts(gain: float, vref: float) -> float:
    """Size of one raw code in microvolts."""
    if gain <= 0 or vref <= 0:
        raise ValueError("gain and vref must be positive")
    return (vref / gain) / RAW_MAX * 1e6


def raw_to_microvolts(raw, gain: float = 24, vref: float = 4.5):
    """Convert raw 24-bit codes to microvolts; accepts scalars or arrays."""
    return raw * lsb_microvolts(gain, vref)


def microvolts_to_raw(uv, gain: float = 24, vref: float = 4.5):
    """Exact inverse of raw_to_microvolts: round to nearest, clamp to 24 bits."""
    import numpy as np
    scaled = np.round(np.asarray(uv, dtype=np.float64) / lsb_microvolts(gain, vref))
    clipped = np.clip(scaled, RAW_MIN, RAW_MAX).astype(np.int64)
    if clipped.ndim == 0:
        return int(clipped)
    return clipped
