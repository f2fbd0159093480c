"""
检查点格式与存储库的测试
"""
import struct

import numpy as np
import pytest

from tvqe.entity.errors import CheckpointError, ChecksumError, ConfigMismatchError
from tvqe.entity.model import ModelConfig
from tvqe.entity.optim import OptimState
from tvqe.model.params import param_init
from tvqe.repository.checkpoint_repo import (
    DIGEST_SIZE, MAGIC, Checkpoint, FileCheckpointRepo, MemoryCheckpointRepo, checksum, decode_checkpoint,
    encode_checkpoint, load_checkpoint, save_checkpoint,
)


@pytest.fixture
def checkpoint(toy_config, toy_params):
    return Checkpoint(toy_config, toy_params)


def reseal(body: bytes) -> bytes:
    return body + checksum(body)


class TestFormat:

    def test_round_trip_is_exact(self, checkpoint):
        data = encode_checkpoint(checkpoint)
        assert data[:4] == MAGIC
        restored = decode_checkpoint(data, checkpoint.config)
        assert restored.config == checkpoint.config
        assert restored.params.keys() == checkpoint.params.keys()
        for path, tensor in checkpoint.params.items():
            assert restored.params[path].dtype == tensor.dtype
            np.testing.assert_array_equal(restored.params[path].data, tensor.data)
        assert restored.optim is None

    def test_float32_round_trip(self):
        config = ModelConfig.toy(dtype="float32")
        params = param_init(config, seed=4)
        restored = decode_checkpoint(encode_checkpoint(Checkpoint(config, params)))
        path = "caqe.rec.weight"
        assert restored.params[path].dtype == np.float32
        np.testing.assert_array_equal(restored.params[path].data, params[path].data)

    def test_optimizer_state_round_trip(self, checkpoint, rng):
        state = OptimState(checkpoint.params, lr=3e-4)
        state.step = 7
        for path in state.m:
            state.m[path] = rng.standard_normal(state.m[path].shape)
            state.v[path] = rng.uniform(0, 1, state.v[path].shape)
        data = encode_checkpoint(Checkpoint(checkpoint.config, checkpoint.params, state))
        restored = decode_checkpoint(data).optim
        assert restored.step == 7
        assert restored.lr == 3e-4
        assert (restored.beta1, restored.beta2, restored.eps) == (0.9, 0.999, 1e-8)
        for path in state.m:
            np.testing.assert_array_equal(restored.m[path], state.m[path])
            np.testing.assert_array_equal(restored.v[path], state.v[path])

    def test_encoding_is_deterministic(self, checkpoint):
        assert encode_checkpoint(checkpoint) == encode_checkpoint(checkpoint)

    def test_flipped_byte_detected(self, checkpoint):
        data = bytearray(encode_checkpoint(checkpoint))
        data[len(data) // 2] ^= 0x01
        with pytest.raises(ChecksumError):
            decode_checkpoint(bytes(data))

    def test_trailing_bytes_rejected(self, checkpoint):
        body = encode_checkpoint(checkpoint)[:-DIGEST_SIZE]
        with pytest.raises(CheckpointError, match="trailing"):
            decode_checkpoint(reseal(body + b"\x00"))

    def test_truncated_payload(self, checkpoint):
        body = encode_checkpoint(checkpoint)[:-DIGEST_SIZE]
        with pytest.raises(CheckpointError, match="truncated"):
            decode_checkpoint(reseal(body[:-20]))

    def test_bad_magic_and_version(self, checkpoint):
        body = encode_checkpoint(checkpoint)[:-DIGEST_SIZE]
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(reseal(b"XXXX" + body[4:]))
        with pytest.raises(CheckpointError, match="version"):
            decode_checkpoint(reseal(body[:4] + struct.pack("<I", 99) + body[8:]))

    def test_too_short(self):
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"TVQE")

    def test_config_mismatch(self, checkpoint):
        data = encode_checkpoint(checkpoint)
        with pytest.raises(ConfigMismatchError):
            decode_checkpoint(data, ModelConfig.toy(num_restormers=2))


class TestRepos:

    def test_memory_repo(self, checkpoint):
        repo = MemoryCheckpointRepo()
        digest = repo.save("a.tvqe", checkpoint)
        assert len(digest) == DIGEST_SIZE
        assert repo.paths() == ["a.tvqe"]
        assert repo.get_bytes("a.tvqe")[-DIGEST_SIZE:] == digest
        repo.load("a.tvqe", checkpoint.config)
        with pytest.raises(CheckpointError):
            repo.load("missing.tvqe")

    def test_file_repo(self, checkpoint, tmp_path):
        path = str(tmp_path / "sub" / "model.tvqe")
        digest = FileCheckpointRepo().save(path, checkpoint)
        assert not (tmp_path / "sub" / "model.tvqe.tmp").exists()
        with open(path, "rb") as f:
            assert f.read()[-DIGEST_SIZE:] == digest
        loaded = load_checkpoint(path, checkpoint.config)
        assert len(loaded.params) == len(checkpoint.params)

    def test_failed_write_leaves_no_tmp(self, checkpoint, tmp_path):
        target = tmp_path / "model.tvqe"
        target.mkdir()
        (target / "keep").write_bytes(b"x")
        with pytest.raises(CheckpointError):
            FileCheckpointRepo().save(str(target), checkpoint)
        assert not (tmp_path / "model.tvqe.tmp").exists()
        assert (target / "keep").read_bytes() == b"x"

    def test_module_helpers(self, checkpoint, tmp_path):
        path = str(tmp_path / "m.tvqe")
        digest = save_checkpoint(path, checkpoint.config, checkpoint.params)
        assert FileCheckpointRepo().save(str(tmp_path / "n.tvqe"), checkpoint) == digest

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(str(tmp_path / "none.tvqe"))
