import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eegrig.chunk import SignalChunk
from eegrig.protocol import DeviceConfig
from eegrig.session import (
    Marker, RECORDING_NAME, SessionError, SessionMetadata, SessionWriter,
    export_csv, open_session, read_session, replay,
)

FS = 250


def meta(session_id="t"):
    return SessionMetadata.create(session_id, DeviceConfig())


def write_session(directory, data, markers=(), chunk=125, block_per_chunk=False):
    w = open_session(directory, meta())
    for off in range(0, data.shape[1], chunk):
        w.append(SignalChunk(data[:, off:off + chunk], off, FS))
        if block_per_chunk:
            w.flush()
    for m in markers:
        w.add_marker(m)
    w.close()


class TestMetadata:
    def test_default_montage(self):
        m = meta()
        assert m.montage == ("F7", "Fz", "F8", "C3", "C4", "T5", "Pz", "T6")
        assert m.electrode_type == "dry Ag/AgCl"

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            SessionMetadata("x", 0.0, montage=("F7",) * 8)


class TestRoundTrip:
    def test_empty_recording(self, tmp_path):
        w = open_session(tmp_path / "empty", meta())
        w.close()
        rec = read_session(tmp_path / "empty")
        assert rec.n_samples == 0 and rec.markers == []

    def test_eight_seconds_is_2000_samples(self, tmp_path):
        data = np.random.default_rng(0).standard_normal((8, 8 * FS)).astype(np.float32)
        write_session(tmp_path / "s", data.astype(np.float64))
        assert read_session(tmp_path / "s").n_samples == 8 * FS

    @given(st.integers(0, 2**32 - 1), st.integers(1, 700))
    @settings(max_examples=20, deadline=None)
    def test_values_bit_identical(self, seed, n):
        import tempfile
        rng = np.random.default_rng(seed)
        data = (rng.standard_normal((8, n)) * 100).astype(np.float32)
        with tempfile.TemporaryDirectory() as d:
            write_session(d, data.astype(np.float64), chunk=97)
            rec = read_session(d)
        assert np.array_equal(rec.data, data)

    def test_markers_survive(self, tmp_path):
        data = np.zeros((8, 500))
        marks = [Marker(10, "user", "start"), Marker(499, "blink", "ev")]
        write_session(tmp_path / "m", data, marks)
        rec = read_session(tmp_path / "m")
        assert rec.markers == marks

    def test_non_monotone_append_rejected(self, tmp_path):
        w = open_session(tmp_path / "bad", meta())
        w.append(SignalChunk(np.zeros((8, 10)), 0, FS))
        with pytest.raises(SessionError):
            w.append(SignalChunk(np.zeros((8, 10)), 20, FS))

    def test_record_twice_identical_files(self, tmp_path):
        # record -> read -> record again gives identical sample blocks
        data = np.random.default_rng(1).standard_normal((8, 1000)) * 50
        write_session(tmp_path / "a", data)
        rec = read_session(tmp_path / "a")
        write_session(tmp_path / "b", rec.data.astype(np.float64))
        rec2 = read_session(tmp_path / "b")
        assert np.array_equal(rec.data, rec2.data)


class TestCorruption:
    def make(self, tmp_path, n=1000):
        data = np.random.default_rng(2).standard_normal((8, n)) * 10
        write_session(tmp_path / "c", data, chunk=100, block_per_chunk=True)
        return tmp_path / "c" / RECORDING_NAME

    def test_header_checksum_rejected(self, tmp_path):
        p = self.make(tmp_path)
        blob = bytearray(p.read_bytes())
        blob[12] ^= 0xFF   # flip a metadata byte
        p.write_bytes(bytes(blob))
        with pytest.raises(SessionError):
            read_session(p.parent)

    def test_bad_magic_rejected(self, tmp_path):
        p = self.make(tmp_path)
        blob = bytearray(p.read_bytes())
        blob[0] = 0x00
        p.write_bytes(bytes(blob))
        with pytest.raises(SessionError):
            read_session(p.parent)

    def test_truncated_file_partial_read(self, tmp_path):
        p = self.make(tmp_path)
        blob = p.read_bytes()
        p.write_bytes(blob[:-37])
        rec = read_session(p.parent)
        assert rec.truncated
        assert 0 < rec.n_samples < 1000
        assert rec.n_samples % 100 == 0   # whole blocks only

    def test_corrupt_block_crc_partial_read(self, tmp_path):
        p = self.make(tmp_path)
        blob = bytearray(p.read_bytes())
        blob[-200] ^= 0x01   # flip a bit inside the last block
        p.write_bytes(bytes(blob))
        rec = read_session(p.parent)
        assert rec.truncated and "CRC" in rec.diagnostic


class TestCsvExport:
    def test_row_count_and_values(self, tmp_path):
        data = (np.random.default_rng(3).standard_normal((8, 300)) * 40)
        write_session(tmp_path / "e", data, [Marker(5, "user", "hello")])
        rec = read_session(tmp_path / "e")
        out = tmp_path / "e.csv"
        export_csv(rec, out)
        lines = out.read_text().splitlines()
        header = [l for l in lines if not l.startswith("#")]
        assert header[0].endswith("F7,Fz,F8,C3,C4,T5,Pz,T6,marker")
        rows = header[1:]
        assert len(rows) == 300
        # values parse back to the exact stored float32
        cells = rows[7].split(",")
        parsed = np.array([float(v) for v in cells[2:10]], dtype=np.float32)
        assert np.array_equal(parsed, rec.data[:, 7])
        assert rows[5].endswith("hello")


class TestReplay:
    def record(self, tmp_path, n=1000):
        from eegrig.protocol import microvolts_to_raw, raw_to_microvolts
        data = np.random.default_rng(4).standard_normal((8, n)) * 60
        # snap to ADC codes so replay's uV -> raw -> uV trip is lossless
        data = raw_to_microvolts(microvolts_to_raw(data).astype(np.float64))
        write_session(tmp_path / "r", data, block_per_chunk=True)
        return read_session(tmp_path / "r")

    def test_replay_reproduces_samples(self, tmp_path):
        from eegrig.protocol import decode_frames_array, raw_to_microvolts
        rec = self.record(tmp_path)
        dev = replay(tmp_path / "r", speed=0)
        _, raw = decode_frames_array(dev.read_block(1000))
        uv = raw_to_microvolts(raw.T.astype(np.float64))
        assert np.array_equal(uv.astype(np.float32), rec.data)

    def test_speed_halves_duration(self, tmp_path):
        rec = self.record(tmp_path, n=500)   # 2 s of data
        t0 = time.monotonic()
        dev = replay(rec, speed=2.0)
        while dev.read_block(125):
            pass
        elapsed = time.monotonic() - t0
        assert elapsed == pytest.approx(1.0, rel=0.10)

    def test_truncated_replay_stops_with_diagnostic(self, tmp_path):
        p = tmp_path / "r" / RECORDING_NAME
        self.record(tmp_path)
        blob = p.read_bytes()
        p.write_bytes(blob[:-41])
        rec = read_session(tmp_path / "r")
        assert rec.truncated and rec.diagnostic
        dev = replay(rec, speed=0)
        got = 0
        while True:
            blk = dev.read_block(250)
            if not blk:
                break
            got += len(blk) // 27
        assert got == rec.n_samples < 1000
