import numpy as np
import pytest
from hypothesis import given, strategies as st

from paqe.errors import ContractError, MalformedInputError, SampleRangeError
from paqe.frame_io import (Frame420, decode_raw, encode_raw, frame_byte_size, read_raw_frame,
                           read_raw_video, write_raw_video)


def random_frame(rng, w, h, poc=0):
    return Frame420(rng.integers(0, 1024, (h, w)), rng.integers(0, 1024, (h // 2, w // 2)),
                    rng.integers(0, 1024, (h // 2, w // 2)), poc)


def test_zero_bytes_give_zero_frame():
    frames = decode_raw(bytes(frame_byte_size(4, 4)), 4, 4)
    assert len(frames) == 1
    assert all(not p.any() for p in frames[0].planes)


def test_ff03_is_max_sample():
    frames = decode_raw(b"\xff\x03" * (frame_byte_size(4, 4) // 2), 4, 4)
    assert all((p == 1023).all() for p in frames[0].planes)


def test_plane_order_and_endianness():
    # 2x2 luma, 1x1 chroma: Y0..Y3, U, V as little-endian words
    words = [1, 2, 3, 4, 5, 6]
    data = b"".join(w.to_bytes(2, "little") for w in words)
    f = decode_raw(data, 2, 2)[0]
    assert f.y.tolist() == [[1, 2], [3, 4]]
    assert f.u.tolist() == [[5]] and f.v.tolist() == [[6]]


def test_partial_frame_is_malformed():
    with pytest.raises(MalformedInputError):
        decode_raw(bytes(frame_byte_size(4, 4) * 3 // 2), 4, 4)


def test_out_of_range_sample_on_read():
    data = bytearray(frame_byte_size(4, 4))
    data[6:8] = (1024).to_bytes(2, "little")
    with pytest.raises(SampleRangeError):
        decode_raw(bytes(data), 4, 4)


def test_out_of_range_sample_on_construct():
    with pytest.raises(SampleRangeError):
        Frame420(np.full((4, 4), 1024), np.zeros((2, 2)), np.zeros((2, 2)))


def test_empty_sequence_writes_nothing(tmp_path):
    assert write_raw_video([], tmp_path / "e.yuv") == 0
    assert (tmp_path / "e.yuv").read_bytes() == b""


def test_mixed_dimensions_rejected(rng):
    with pytest.raises(ContractError):
        encode_raw([random_frame(rng, 4, 4), random_frame(rng, 8, 4)])


def test_file_round_trip_and_single_frame_read(tmp_path, rng):
    frames = [random_frame(rng, 8, 6, poc=i) for i in range(3)]
    path = tmp_path / "clip.yuv"
    write_raw_video(frames, path)
    back = read_raw_video(path, 8, 6)
    assert back == frames
    assert read_raw_frame(path, 8, 6, 2) == frames[2]
    with pytest.raises(MalformedInputError):
        read_raw_frame(path, 8, 6, 3)


@given(w=st.integers(1, 6), h=st.integers(1, 6), n=st.integers(0, 3), seed=st.integers(0, 2**32 - 1))
def test_bytes_round_trip(w, h, n, seed):
    w, h = 2 * w, 2 * h
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 1024, n * frame_byte_size(w, h) // 2).astype("<u2").tobytes()
    assert encode_raw(decode_raw(data, w, h)) == data
