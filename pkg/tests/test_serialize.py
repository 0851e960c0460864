"""Binary tensor and checkpoint formats: byte layout, round-trips,
and rejection of malformed input."""

import struct

import numpy as np
import pytest

from rfrlkit.errors import ContractError, FormatError
from rfrlkit.serialize import (
    load_checkpoint,
    read_tensor_file,
    save_checkpoint,
    tensor_from_bytes,
    tensor_to_bytes,
    write_tensor_file,
)


class TestTensorBytes:
    def test_header_layout(self):
        arr = np.arange(6, dtype=np.float32).reshape(2, 3)
        buf = tensor_to_bytes(arr)
        assert buf[:4] == b"RFT1"
        rank, h, w = struct.unpack_from("<III", buf, 4)
        assert (rank, h, w) == (2, 2, 3)
        assert buf[16] == 0  # float32 tag
        assert len(buf) == 4 + 4 + 8 + 1 + 6 * 4

    def test_float64_tag(self):
        buf = tensor_to_bytes(np.zeros(3, dtype=np.float64))
        assert buf[12] == 1
        assert len(buf) == 4 + 4 + 4 + 1 + 3 * 8

    def test_round_trip_f32(self):
        arr = np.random.default_rng(0).normal(size=(3, 4, 5)).astype(np.float32)
        out, end = tensor_from_bytes(tensor_to_bytes(arr))
        assert out.dtype == np.float32
        assert end == len(tensor_to_bytes(arr))
        np.testing.assert_array_equal(out, arr)

    def test_round_trip_f64_bit_exact(self):
        arr = np.random.default_rng(1).normal(size=(7,))
        out, _ = tensor_from_bytes(tensor_to_bytes(arr))
        assert out.dtype == np.float64
        assert out.tobytes() == arr.tobytes()

    def test_round_trip_rank0(self):
        arr = np.float64(3.25) * np.ones(())
        out, end = tensor_from_bytes(tensor_to_bytes(arr))
        assert out.shape == ()
        assert float(out) == 3.25
        # rank 0 means no extent words: magic + rank + tag + one value
        assert end == 4 + 4 + 1 + 8

    def test_non_contiguous_input_ok(self):
        base = np.arange(12, dtype=np.float32).reshape(3, 4)
        view = base[:, ::2]
        out, _ = tensor_from_bytes(tensor_to_bytes(view))
        np.testing.assert_array_equal(out, view)

    def test_offset_parsing_chains(self):
        a = np.ones((2,), dtype=np.float32)
        b = np.full((3,), 7.0, dtype=np.float64)
        buf = tensor_to_bytes(a) + tensor_to_bytes(b)
        got_a, off = tensor_from_bytes(buf, 0)
        got_b, end = tensor_from_bytes(buf, off)
        np.testing.assert_array_equal(got_a, a)
        np.testing.assert_array_equal(got_b, b)
        assert end == len(buf)

    def test_integer_input_rejected(self):
        with pytest.raises(ContractError):
            tensor_to_bytes(np.arange(4))

    def test_bad_magic(self):
        buf = b"XXXX" + tensor_to_bytes(np.ones(2, dtype=np.float32))[4:]
        with pytest.raises(FormatError):
            tensor_from_bytes(buf)

    def test_truncated_header(self):
        buf = tensor_to_bytes(np.ones((2, 2), dtype=np.float32))
        with pytest.raises(FormatError):
            tensor_from_bytes(buf[:9])

    def test_truncated_payload(self):
        buf = tensor_to_bytes(np.ones(8, dtype=np.float32))
        with pytest.raises(FormatError):
            tensor_from_bytes(buf[:-2])

    def test_unknown_dtype_tag(self):
        buf = bytearray(tensor_to_bytes(np.ones(2, dtype=np.float32)))
        buf[12] = 9
        with pytest.raises(FormatError):
            tensor_from_bytes(bytes(buf))

    def test_implausible_rank_rejected(self):
        buf = b"RFT1" + struct.pack("<I", 1000) + b"\x00" * 64
        with pytest.raises(FormatError):
            tensor_from_bytes(buf)


class TestTensorFile:
    def test_file_round_trip(self, tmp_path):
        arr = np.linspace(-1, 1, 10, dtype=np.float32).reshape(2, 5)
        path = tmp_path / "t.rft"
        write_tensor_file(path, arr)
        np.testing.assert_array_equal(read_tensor_file(path), arr)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.rft"
        write_tensor_file(path, np.ones(2, dtype=np.float32))
        with open(path, "ab") as fh:
            fh.write(b"\x00")
        with pytest.raises(FormatError):
            read_tensor_file(path)


class TestCheckpoint:
    def _tensors(self):
        rng = np.random.default_rng(7)
        return [
            ("enc.w", rng.normal(size=(4, 2, 3, 3)).astype(np.float32)),
            ("enc.b", np.zeros(4, dtype=np.float32)),
            ("opt.t", np.float64(12.0) * np.ones(())),
        ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "m.ckpt"
        text = "seed=3\nlr=0.0001\n"
        tensors = self._tensors()
        save_checkpoint(path, text, tensors)
        got_text, got = load_checkpoint(path)
        assert got_text == text
        assert list(got.keys()) == [n for n, _ in tensors]
        for name, arr in tensors:
            assert got[name].dtype == arr.dtype
            assert got[name].tobytes() == np.ascontiguousarray(arr).tobytes()

    def test_save_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, "k=v\n", self._tensors())
        save_checkpoint(b, "k=v\n", self._tensors())
        assert a.read_bytes() == b.read_bytes()

    def test_magic_layout(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "x=1\n", [])
        buf = path.read_bytes()
        assert buf[:8] == b"RFRLCKPT"
        (version,) = struct.unpack_from("<H", buf, 8)
        assert version == 1
        (cfg_len,) = struct.unpack_from("<I", buf, 10)
        assert buf[14:14 + cfg_len] == b"x=1\n"

    def test_empty_tensor_list(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "a=b\n", [])
        text, tensors = load_checkpoint(path)
        assert text == "a=b\n"
        assert tensors == {}

    def test_unicode_names_and_config(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "note=snake\n", [("weights/α", np.ones(2, dtype=np.float32))])
        _, tensors = load_checkpoint(path)
        assert "weights/α" in tensors

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"PNG\x00\x00\x00\x00\x00rest")
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "a=1\n", [])
        buf = bytearray(path.read_bytes())
        struct.pack_into("<H", buf, 8, 99)
        path.write_bytes(bytes(buf))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated_checkpoint(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "a=1\n", self._tensors())
        trunc = tmp_path / "trunc.ckpt"
        trunc.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError):
            load_checkpoint(trunc)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, "a=1\n", [])
        with open(path, "ab") as fh:
            fh.write(b"\xff\xff")
        with pytest.raises(FormatError):
            load_checkpoint(path)
