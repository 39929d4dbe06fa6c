import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strokekit import daq
from strokekit.errors import (
    BadCrcError,
    BadSyncError,
    CodeOutOfRangeError,
    EmptyStreamError,
    GapTooLargeError,
    MalformedHeaderError,
    TruncatedDataError,
    VersionUnsupportedError,
)
from strokekit.model import ChannelLayout, Recording


def crc16_bitwise(data: bytes, crc: int = 0xFFFF) -> int:
    """Independent bit-at-a-time CRC-16/CCITT-FALSE oracle."""
    for b in data:
        crc ^= b << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


def make_frame(seq=0, fill=None, rng=None):
    if fill is not None:
        codes = np.full((6, 3), fill, dtype=np.uint16)
    else:
        codes = rng.integers(0, 1024, size=(6, 3), dtype=np.uint16)
    return daq.Frame(seq=seq, samples=codes)


class TestCrc:
    def test_known_check_value(self):
        assert daq.crc16(b"123456789") == 0x29B1
        assert crc16_bitwise(b"123456789") == 0x29B1

    @given(st.binary(min_size=0, max_size=64))
    @settings(max_examples=100, deadline=None)
    def test_table_matches_bitwise_oracle(self, data):
        assert daq.crc16(data) == crc16_bitwise(data)


class TestFrameCodec:
    def test_frame_length(self):
        frame = make_frame(seq=7, fill=512)
        assert len(daq.encode_frame(frame)) == daq.FRAME_LEN == 43

    def test_all_zero_frame(self):
        frame = daq.decode_frame(daq.encode_frame(make_frame(seq=0, fill=0)))
        assert frame.seq == 0
        assert (frame.samples == 0).all()

    @given(st.integers(0, 0xFFFF), st.integers(0, 2**63 - 1))
    @settings(max_examples=200, deadline=None)
    def test_roundtrip_is_identity(self, seq, key):
        rng = np.random.default_rng(key)
        frame = make_frame(seq=seq, rng=rng)
        assert daq.decode_frame(daq.encode_frame(frame)) == frame

    def test_bad_sync(self):
        blob = bytearray(daq.encode_frame(make_frame(seq=1, fill=3)))
        blob[0] = 0xAB
        with pytest.raises(BadSyncError):
            daq.decode_frame(bytes(blob))

    def test_wrong_length_is_a_usage_error(self):
        with pytest.raises(ValueError):
            daq.decode_frame(b"\xaa\x55")

    def test_code_out_of_range_with_valid_crc(self):
        # hand-build a frame whose payload says 1024: CRC fine, code not
        body = bytes([daq.FRAME_TYPE_DATA]) + (0).to_bytes(2, "little")
        body += (1024).to_bytes(2, "little") + bytes(34)
        blob = daq.SYNC + body + daq.crc16(body).to_bytes(2, "little")
        with pytest.raises(CodeOutOfRangeError):
            daq.decode_frame(blob)

    def test_every_single_bit_flip_is_flagged(self):
        blob = daq.encode_frame(make_frame(seq=0x1234, rng=np.random.default_rng(5)))
        assert len(blob) * 8 == 344
        for bit in range(344):
            corrupt = bytearray(blob)
            corrupt[bit // 8] ^= 1 << (bit % 8)
            expected = BadSyncError if bit < 16 else BadCrcError
            with pytest.raises(expected):
                daq.decode_frame(bytes(corrupt))


class TestResync:
    def test_garbage_prefix(self):
        blob = b"\x01\x02\x03" + daq.encode_frame(make_frame(seq=0, fill=1))
        assert daq.resync(blob) == 3

    def test_back_to_back_frames(self):
        blob = daq.encode_frame(make_frame(seq=0, fill=1)) + daq.encode_frame(
            make_frame(seq=1, fill=2)
        )
        assert daq.resync(blob) == 0
        assert daq.resync(blob, 1) == 43

    def test_short_garbage_returns_sentinel(self):
        assert daq.resync(b"\xaa\x55" + bytes(20)) is None
        assert daq.resync(b"") is None

    def test_skips_corrupt_frame(self):
        bad = bytearray(daq.encode_frame(make_frame(seq=0, fill=1)))
        bad[10] ^= 0xFF
        good = daq.encode_frame(make_frame(seq=1, fill=2))
        assert daq.resync(bytes(bad) + good) == 43

    def test_stream_reader_recovers_after_corruption(self):
        frames = [make_frame(seq=i, fill=i) for i in range(5)]
        blob = bytearray(b"".join(daq.encode_frame(f) for f in frames))
        blob[43 + 20] ^= 0x01  # corrupt the second frame's payload
        decoded, stats = daq.read_frame_stream(bytes(blob))
        assert [f.seq for f in decoded] == [0, 2, 3, 4]
        assert stats.frames == 4
        assert stats.skipped_bytes == 43
        assert stats.resync_events == 1


class TestConversion:
    def test_full_scale_code(self):
        cal = daq.CalibrationParams()
        # ((1023/1023)*3.3 - 1.65) / 0.300 * 9.80665
        assert cal.accel(1023, 0) == pytest.approx(53.936575, abs=1e-9)
        assert cal.accel(1023, 0) == pytest.approx(53.9366, abs=1e-4)

    def test_zero_code_is_sign_symmetric(self):
        cal = daq.CalibrationParams()
        assert cal.accel(0, 0) == pytest.approx(-53.936575, abs=1e-9)

    def test_midscale_code(self):
        cal = daq.CalibrationParams()
        expected = ((512 / 1023) * 3.3 - 1.65) / 0.300 * 9.80665
        assert cal.accel(512, 0) == pytest.approx(expected, rel=1e-15)
        assert cal.accel(512, 0) == pytest.approx(0.0527, abs=5e-5)

    def test_monotone_in_code(self):
        cal = daq.CalibrationParams()
        accel = cal.accel(np.arange(1024), 2)
        assert (np.diff(accel) > 0).all()

    def test_calibration_bounds(self):
        with pytest.raises(ValueError):
            daq.CalibrationParams(v_ref=0.0)
        with pytest.raises(ValueError):
            daq.CalibrationParams(sensitivity=0.0)
        with pytest.raises(ValueError):
            daq.CalibrationParams(v_zero_g=(1.65, 1.65, 4.0))


class TestFramesToRecording:
    def test_empty_stream(self):
        with pytest.raises(EmptyStreamError):
            daq.frames_to_recording([])

    def test_basic_shape_and_rate(self):
        frames = [make_frame(seq=i, fill=512) for i in range(10)]
        rec = daq.frames_to_recording(frames)
        assert rec.n_channels == 6 and rec.n_samples == 10
        assert rec.sample_rate == 2000.0
        assert rec.meta["gap_events"] == 0

    def test_gap_interpolated_linearly(self):
        cal = daq.CalibrationParams()
        f0 = make_frame(seq=0, fill=100)
        f3 = make_frame(seq=3, fill=400)
        rec = daq.frames_to_recording([f0, f3], cal)
        assert rec.n_samples == 4
        a0, a3 = cal.accel(100, 0), cal.accel(400, 0)
        assert rec.channels[0, 0, 1] == a0 * (2 / 3) + a3 * (1 / 3)
        assert rec.channels[0, 0, 2] == a0 * (1 / 3) + a3 * (2 / 3)
        assert rec.meta["gap_events"] == 1 and rec.meta["gap_samples"] == 2

    def test_wraparound_is_contiguous(self):
        frames = [make_frame(seq=s, fill=1) for s in (65534, 65535, 0, 1)]
        rec = daq.frames_to_recording(frames)
        assert rec.n_samples == 4
        assert rec.meta["gap_samples"] == 0

    def test_sixteen_frame_gap_allowed_seventeen_refused(self):
        ok = [make_frame(seq=0, fill=1), make_frame(seq=17, fill=1)]
        assert daq.frames_to_recording(ok).n_samples == 18
        with pytest.raises(GapTooLargeError):
            daq.frames_to_recording([make_frame(seq=0, fill=1), make_frame(seq=18, fill=1)])


class TestRecordingFile:
    def _recording(self):
        rng = np.random.default_rng(9)
        return Recording(
            channels=rng.normal(size=(6, 3, 40)),
            sample_rate=2000.0,
            layout=ChannelLayout(labels=tuple(f"s{i}" for i in range(6))),
            meta={"participant": "p01", "trial": 3, "calibration": {"v_ref": 3.3}},
        )

    @pytest.mark.parametrize("body", ["csv", "binary"])
    def test_lossless_roundtrip(self, tmp_path, body):
        rec = self._recording()
        path = tmp_path / "trial.htrec"
        daq.write_recording_file(rec, path, body=body)
        back = daq.read_recording_file(path)
        assert np.array_equal(back.channels, rec.channels)  # bit-exact
        assert back.sample_rate == rec.sample_rate
        assert back.layout == rec.layout
        assert back.meta == rec.meta

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.htrec"
        path.write_bytes(b"")
        with pytest.raises(MalformedHeaderError):
            daq.read_recording_file(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v9.htrec"
        path.write_bytes(b"#HTREC v9\n{}\n")
        with pytest.raises(VersionUnsupportedError):
            daq.read_recording_file(path)

    def test_bad_header_json(self, tmp_path):
        path = tmp_path / "bad.htrec"
        path.write_bytes(b"#HTREC v1\nnot json\n")
        with pytest.raises(MalformedHeaderError):
            daq.read_recording_file(path)

    def test_row_with_missing_columns(self, tmp_path):
        header = {
            "body": "csv", "sample_rate": 2000.0, "channels": 6, "samples": 1,
            "positions": list(ChannelLayout().positions), "labels": None,
            "calibration": None, "meta": {},
        }
        row = ",".join(["0.0"] * (1 + 5 * 3))  # 5 channels' worth of columns
        path = tmp_path / "short.htrec"
        path.write_text(f"#HTREC v1\n{json.dumps(header)}\ntime_s,cols\n{row}\n")
        with pytest.raises(TruncatedDataError):
            daq.read_recording_file(path)

    def test_fewer_rows_than_declared(self, tmp_path):
        rec = self._recording()
        path = tmp_path / "cut.htrec"
        daq.write_recording_file(rec, path, body="csv")
        lines = path.read_bytes().splitlines(keepends=True)
        path.write_bytes(b"".join(lines[:-3]))
        with pytest.raises(TruncatedDataError):
            daq.read_recording_file(path)

    def test_truncated_binary_body(self, tmp_path):
        rec = self._recording()
        path = tmp_path / "cut.htrec"
        daq.write_recording_file(rec, path, body="binary")
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(TruncatedDataError):
            daq.read_recording_file(path)
