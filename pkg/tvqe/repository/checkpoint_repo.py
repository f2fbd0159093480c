"""
检查点的二进制格式（全部小端）::

    "TVQE"                      4 字节魔数
    u32 version
    u32 n, n 字节               ModelConfig 的 JSON 文本
    u32 count                   张量个数
    重复 count 次:
        u16 n, n 字节           参数路径 (UTF-8)
        u8 dtype                0 = f32, 1 = f64
        u8 rank
        u32 × rank              各维长度
        payload                 行优先数据
    u8 has_optim
    (has_optim == 1 时)
        u64 step; f64 lr, beta1, beta2, eps
        按张量表顺序，每个参数的一阶矩 payload 和二阶矩 payload
    8 字节                      之前全部字节的 BLAKE2b-64 摘要
"""
import hashlib
import logging
import os
import struct
from abc import ABC, abstractmethod
from typing import Dict, Optional

import numpy as np
from pydantic import ValidationError

from tvqe.autograd.tensor import Tensor
from tvqe.entity.errors import CheckpointError, ChecksumError, ConfigMismatchError
from tvqe.entity.model import ModelConfig
from tvqe.entity.optim import OptimState
from tvqe.model.params import ModelParams, check_compatible

logger = logging.getLogger(__name__)

MAGIC = b"TVQE"
FORMAT_VERSION = 1
DIGEST_SIZE = 8

_DTYPE_TAGS = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_TAG_DTYPES = {tag: dtype for dtype, tag in _DTYPE_TAGS.items()}


class Checkpoint:
    """模型配置 + 参数 + 可选的优化器状态"""

    def __init__(self, config: ModelConfig, params: ModelParams, optim: Optional[OptimState] = None):
        self.config = config
        self.params = params
        self.optim = optim


def checksum(data: bytes) -> bytes:
    """BLAKE2b-64 摘要"""
    return hashlib.blake2b(data, digest_size=DIGEST_SIZE).digest()


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    """
    把检查点序列化为字节

    Args:
        ckpt: 检查点

    Returns:
        bytes: 包含尾部校验和的完整内容
    """
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    config_text = ckpt.config.model_dump_json().encode("utf-8")
    out += struct.pack("<I", len(config_text)) + config_text

    items = ckpt.params.items()
    out += struct.pack("<I", len(items))
    for path, tensor in items:
        name = path.encode("utf-8")
        data = tensor.data.astype(tensor.dtype.newbyteorder("<"), copy=False)
        out += struct.pack("<H", len(name)) + name
        out += struct.pack("<BB", _DTYPE_TAGS[data.dtype], data.ndim)
        out += struct.pack(f"<{data.ndim}I", *data.shape)
        out += data.tobytes(order="C")

    optim = ckpt.optim
    if optim is None:
        out += struct.pack("<B", 0)
    else:
        out += struct.pack("<B", 1)
        out += struct.pack("<Q4d", optim.step, optim.lr, optim.beta1, optim.beta2, optim.eps)
        for path, tensor in items:
            dtype = tensor.dtype.newbyteorder("<")
            out += optim.m[path].astype(dtype, copy=False).tobytes(order="C")
            out += optim.v[path].astype(dtype, copy=False).tobytes(order="C")

    out += checksum(bytes(out))
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.data):
            raise CheckpointError(f"checkpoint truncated at byte {self.pos}")
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, expected: Optional[ModelConfig] = None) -> Checkpoint:
    """
    从字节恢复检查点

    Args:
        data: 完整内容
        expected: 期望的模型配置；给出时必须与检查点中的配置完全一致

    Returns:
        Checkpoint: 检查点

    Raises:
        ChecksumError: 校验和不一致
        CheckpointError: 魔数或版本不正确、内容被截断
        ConfigMismatchError: 配置不一致或出现未知参数路径
    """
    if len(data) < len(MAGIC) + DIGEST_SIZE:
        raise CheckpointError("checkpoint too short")
    body, digest = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    if checksum(body) != digest:
        raise ChecksumError("checkpoint checksum mismatch")

    reader = _Reader(body)
    if reader.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {FORMAT_VERSION}")

    (n,) = reader.unpack("<I")
    try:
        config = ModelConfig.model_validate_json(reader.take(n).decode("utf-8"))
    except (ValidationError, UnicodeDecodeError) as e:
        raise CheckpointError(f"invalid model config in checkpoint: {e}") from e
    if expected is not None and expected != config:
        raise ConfigMismatchError(
            f"checkpoint config {config.model_dump()} does not match expected {expected.model_dump()}"
        )

    (count,) = reader.unpack("<I")
    tensors: Dict[str, Tensor] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        path = reader.take(name_len).decode("utf-8")
        tag, rank = reader.unpack("<BB")
        if tag not in _TAG_DTYPES:
            raise CheckpointError(f"parameter '{path}' has unknown dtype tag {tag}")
        shape = reader.unpack(f"<{rank}I") if rank else ()
        dtype = _TAG_DTYPES[tag]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        array = np.frombuffer(reader.take(nbytes), dtype=dtype).reshape(shape)
        tensors[path] = Tensor(array.astype(dtype.newbyteorder("="), copy=True), requires_grad=True)
    check_compatible(config, tensors)
    params = ModelParams({path: tensors[path] for path in tensors})

    optim = None
    (has_optim,) = reader.unpack("<B")
    if has_optim:
        step, lr, beta1, beta2, eps = reader.unpack("<Q4d")
        m, v = {}, {}
        for path, tensor in params.items():
            dtype = tensor.dtype.newbyteorder("<")
            nbytes = tensor.size * dtype.itemsize
            m[path] = np.frombuffer(reader.take(nbytes), dtype=dtype).reshape(tensor.shape).astype(tensor.dtype)
            v[path] = np.frombuffer(reader.take(nbytes), dtype=dtype).reshape(tensor.shape).astype(tensor.dtype)
        optim = OptimState.restore(m, v, step, lr, beta1, beta2, eps)
    if reader.pos != len(body):
        raise CheckpointError(f"{len(body) - reader.pos} trailing bytes after checkpoint payload")
    return Checkpoint(config, params, optim)


class CheckpointRepo(ABC):
    """
    检查点存储库接口。
    """

    @abstractmethod
    def save(self, path: str, ckpt: Checkpoint) -> bytes:
        """
        保存检查点

        Args:
            path: 存储路径
            ckpt: 检查点

        Returns:
            bytes: 检查点的校验和
        """
        pass

    @abstractmethod
    def load(self, path: str, expected: Optional[ModelConfig] = None) -> Checkpoint:
        """
        加载检查点

        Args:
            path: 存储路径
            expected: 期望的模型配置

        Returns:
            Checkpoint: 检查点
        """
        pass


class FileCheckpointRepo(CheckpointRepo):
    """文件系统检查点存储库实现，写入先落到临时文件再原子替换"""

    def save(self, path: str, ckpt: Checkpoint) -> bytes:
        data = encode_checkpoint(ckpt)
        tmp_path = f"{path}.tmp"
        try:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(tmp_path, "wb") as f:
                f.write(data)
            os.replace(tmp_path, path)
        except OSError as e:
            if os.path.exists(tmp_path):
                os.remove(tmp_path)
            raise CheckpointError(f"failed to write checkpoint {path}: {e}") from e
        logger.info(f"检查点已保存: {path}（{len(data)} 字节）")
        return data[-DIGEST_SIZE:]

    def load(self, path: str, expected: Optional[ModelConfig] = None) -> Checkpoint:
        try:
            with open(path, "rb") as f:
                data = f.read()
        except OSError as e:
            raise CheckpointError(f"failed to read checkpoint {path}: {e}") from e
        ckpt = decode_checkpoint(data, expected)
        logger.info(f"检查点已加载: {path}（{len(ckpt.params)} 个张量）")
        return ckpt


class MemoryCheckpointRepo(CheckpointRepo):
    """内存检查点存储库实现，主要用于测试"""

    def __init__(self):
        self._blobs: Dict[str, bytes] = {}

    def save(self, path: str, ckpt: Checkpoint) -> bytes:
        data = encode_checkpoint(ckpt)
        self._blobs[path] = data
        return data[-DIGEST_SIZE:]

    def load(self, path: str, expected: Optional[ModelConfig] = None) -> Checkpoint:
        if path not in self._blobs:
            raise CheckpointError(f"checkpoint not found in memory: {path}")
        return decode_checkpoint(self._blobs[path], expected)

    def paths(self):
        """已保存的路径，按保存顺序"""
        return list(self._blobs)

    def get_bytes(self, path: str) -> Optional[bytes]:
        return self._blobs.get(path)


_file_repo = FileCheckpointRepo()


def save_checkpoint(
    path: str,
    config: ModelConfig,
    params: ModelParams,
    optim: Optional[OptimState] = None,
) -> bytes:
    """保存检查点到文件，返回校验和"""
    return _file_repo.save(path, Checkpoint(config, params, optim))


def load_checkpoint(path: str, expected: Optional[ModelConfig] = None) -> Checkpoint:
    """从文件加载检查点"""
    return _file_repo.load(path, expected)
