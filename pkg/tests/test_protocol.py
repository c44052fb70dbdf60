import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegrig import protocol
from eegrig.protocol import (
    DesyncError, DeviceCommand, DeviceConfig, FramingError, InputMux,
    LeadOffConfig, Opcode, RegisterMap, SampleFrame, decode_frame,
    decode_frames_array, encode_command, encode_frame, encode_frames_array,
    microvolts_to_raw, raw_to_microvolts, FrameSync, RAW_MAX, RAW_MIN, REG,
)

raw_values = st.integers(min_value=RAW_MIN, max_value=RAW_MAX)
frames = st.builds(
    SampleFrame.make,
    st.lists(raw_values, min_size=8, max_size=8),
    st.integers(min_value=0, max_value=2**31),
    loff_statp=st.integers(0, 255),
    loff_statn=st.integers(0, 255),
    gpio=st.integers(0, 15),
)


class TestCommands:
    def test_single_byte_opcodes(self):
        # verified against the ADC command table
        expected = {Opcode.WAKEUP: 0x02, Opcode.STANDBY: 0x04, Opcode.RESET: 0x06,
                    Opcode.START: 0x08, Opcode.STOP: 0x0A, Opcode.RDATAC: 0x10,
                    Opcode.SDATAC: 0x11, Opcode.RDATA: 0x12}
        for op, byte in expected.items():
            assert encode_command(DeviceCommand.simple(op)) == bytes([byte])

    def test_start_is_0x08(self):
        assert encode_command(DeviceCommand.simple(Opcode.START)) == b"\x08"

    def test_rreg_format(self):
        assert encode_command(DeviceCommand.rreg(0x00, 1)) == b"\x20\x00"
        assert encode_command(DeviceCommand.rreg(0x05, 3)) == b"\x25\x02"

    def test_wreg_format(self):
        cmd = DeviceCommand.wreg(0x01, b"\x96\xC0")
        assert encode_command(cmd) == b"\x41\x01\x96\xC0"

    def test_wreg_zero_count_rejected(self):
        with pytest.raises(ValueError):
            encode_command(DeviceCommand(Opcode.WREG, 0x05, 0, b""))

    def test_window_past_last_register_rejected(self):
        with pytest.raises(ValueError):
            encode_command(DeviceCommand.rreg(0x17, 2))
        # exactly reaching 0x17 is fine
        encode_command(DeviceCommand.rreg(0x10, 8))


class TestRegisterMap:
    def test_reset_values(self):
        regs = RegisterMap()
        assert regs.read(REG["ID"]) == 0x3E
        assert regs.read(REG["CONFIG1"]) == 0x96
        assert regs.read(REG["CH1SET"]) == 0x61
        assert regs.read(REG["GPIO"]) == 0x0F

    def test_write_then_read(self):
        regs = RegisterMap()
        regs.write(REG["CONFIG1"], 0x95)
        assert regs.read(REG["CONFIG1"]) == 0x95

    def test_readonly_bits_keep_reset_value(self):
        regs = RegisterMap()
        regs.write(REG["ID"], 0x00)
        assert regs.read(REG["ID"]) == 0x3E
        regs.write(REG["LOFF_STATP"], 0xFF)
        assert regs.read(REG["LOFF_STATP"]) == 0x00

    def test_reset_restores_after_writes(self):
        regs = RegisterMap()
        for addr in range(0x01, 0x18):
            regs.write(addr, 0xAA)
        regs.reset()
        fresh = RegisterMap()
        for addr in range(0x00, 0x18):
            assert regs.read(addr) == fresh.read(addr)

    def test_unique_addresses_cover_range(self):
        regs = RegisterMap()
        for addr in range(0x18):
            regs.read(addr)
        with pytest.raises(ValueError):
            regs.read(0x18)


class TestDeviceConfig:
    def test_defaults(self):
        cfg = DeviceConfig()
        assert cfg.sample_rate == 250 and cfg.gain == 24 and cfg.vref == 4.5

    @pytest.mark.parametrize("rate", [100, 300, 4000])
    def test_bad_sample_rate_rejected(self, rate):
        with pytest.raises(ValueError):
            DeviceConfig(sample_rate=rate)

    @pytest.mark.parametrize("gain", [3, 16, 48])
    def test_bad_gain_rejected(self, gain):
        with pytest.raises(ValueError):
            DeviceConfig(gain=gain)

    @pytest.mark.parametrize("rate", [250, 500, 1000, 2000])
    @pytest.mark.parametrize("gain", [1, 2, 4, 6, 8, 12, 24])
    def test_register_round_trip(self, rate, gain):
        cfg = DeviceConfig(sample_rate=rate, gain=gain,
                           leadoff=LeadOffConfig(6e-9, 7.8, (2, 5)))
        back = DeviceConfig.from_register_map(cfg.to_register_map(), vref=cfg.vref)
        assert back == cfg

    def test_mux_round_trip(self):
        chans = tuple(
            protocol.ChannelConfig(enabled=(i % 2 == 0), input_mux=InputMux.TEST)
            for i in range(8))
        cfg = DeviceConfig(channels=chans)
        back = DeviceConfig.from_register_map(cfg.to_register_map())
        assert back.channels == chans


class TestFrameCodec:
    def test_all_zero_channels(self):
        buf = bytes([0xC0, 0x00, 0x00] + [0x00] * 24)
        f = decode_frame(buf)
        assert f.status == 0xC00000
        assert f.raw == (0,) * 8

    def test_max_positive(self):
        buf = bytes([0xC0, 0, 0, 0x7F, 0xFF, 0xFF] + [0] * 21)
        assert decode_frame(buf).raw[0] == 8388607

    def test_min_negative(self):
        buf = bytes([0xC0, 0, 0, 0x80, 0x00, 0x00] + [0] * 21)
        assert decode_frame(buf).raw[0] == -8388608

    def test_wrong_length_is_framing_error(self):
        with pytest.raises(FramingError):
            decode_frame(bytes(26))

    def test_bad_sync_is_desync_error(self):
        with pytest.raises(DesyncError):
            decode_frame(bytes([0x00] * 27))

    def test_out_of_range_raw_rejected(self):
        f = SampleFrame(0xC00000, (1 << 23, 0, 0, 0, 0, 0, 0, 0), 0)
        with pytest.raises(ValueError):
            encode_frame(f)

    @given(frames)
    @settings(max_examples=300)
    def test_round_trip_identity(self, frame):
        assert decode_frame(encode_frame(frame), frame.seq) == frame

    def test_status_field_accessors(self):
        f = SampleFrame.make([0] * 8, 0, loff_statp=0xA5, loff_statn=0x3C, gpio=0x9)
        assert f.loff_statp == 0xA5 and f.loff_statn == 0x3C and f.gpio == 0x9
        assert (f.status >> 20) == 0xC

    def test_batch_codec_matches_scalar(self):
        rng = np.random.default_rng(3)
        raw = rng.integers(RAW_MIN, RAW_MAX + 1, size=(50, 8))
        blob = encode_frames_array(raw, 0xC00000)
        per_frame = b"".join(
            encode_frame(SampleFrame(0xC00000, tuple(int(v) for v in row), i))
            for i, row in enumerate(raw))
        assert blob == per_frame
        status, raw_back = decode_frames_array(blob)
        assert np.array_equal(raw_back, raw)
        assert np.all(status == 0xC00000)


class TestFrameSync:
    def _stream(self, n):
        return [SampleFrame.make([i * 1000 + c for c in range(8)], i) for i in range(n)]

    def test_clean_stream(self):
        sync = FrameSync()
        data = b"".join(encode_frame(f) for f in self._stream(5))
        out = list(sync.feed(data))
        assert [f.raw for f in out] == [f.raw for f in self._stream(5)]
        assert sync.discarded_bytes == 0

    def test_recovers_after_garbage_byte(self):
        frames_in = self._stream(6)
        data = b"".join(encode_frame(f) for f in frames_in[:3])
        data += b"\x55"  # inserted garbage
        data += b"".join(encode_frame(f) for f in frames_in[3:])
        sync = FrameSync()
        out = list(sync.feed(data))
        # one frame straddling the garbage is lost; resync costs <= 27+1 bytes
        assert len(out) >= 5
        assert 0 < sync.discarded_bytes <= 28
        assert out[-1].raw == frames_in[-1].raw

    def test_chunked_feed_equals_single_feed(self):
        data = b"".join(encode_frame(f) for f in self._stream(8))
        whole = [f.raw for f in FrameSync().feed(data)]
        sync = FrameSync()
        chunked = []
        for i in range(0, len(data), 13):
            chunked += [f.raw for f in sync.feed(data[i:i + 13])]
        assert chunked == whole


class TestCalibration:
    def test_zero(self):
        assert raw_to_microvolts(0, 24, 4.5) == 0.0

    def test_full_scale_positive(self):
        # oracle: 8388607 * (4.5/24) / 8388607 * 1e6
        assert raw_to_microvolts(8388607, 24, 4.5) == pytest.approx(187500.0, abs=1e-9)

    def test_full_scale_negative(self):
        expected = -8388608 * (4.5 / 24) / 8388607 * 1e6
        assert raw_to_microvolts(-8388608, 24, 4.5) == pytest.approx(expected, rel=1e-15)
        assert raw_to_microvolts(-8388608, 24, 4.5) < -187500.0

    @given(raw_values, st.sampled_from([1, 2, 4, 6, 8, 12, 24]))
    @settings(max_examples=200)
    def test_inverse_identity(self, raw, gain):
        uv = raw_to_microvolts(raw, gain, 4.5)
        assert microvolts_to_raw(uv, gain, 4.5) == raw

    def test_monotonic_in_raw(self):
        codes = np.arange(-1000, 1000)
        uv = raw_to_microvolts(codes, 24, 4.5)
        assert np.all(np.diff(uv) > 0)

    def test_clamps_out_of_range(self):
        assert microvolts_to_raw(1e9, 24, 4.5) == RAW_MAX
        assert microvolts_to_raw(-1e9, 24, 4.5) == RAW_MIN

    def test_invalid_gain_rejected(self):
        with pytest.raises(ValueError):
            raw_to_microvolts(1, 0, 4.5)
