"""
合成编码失真：分块 DCT-II -> 量化 -> 反量化 -> 逆 DCT。

用来代替真实的 HEVC 编码，保留块效应和振铃等失真形态，并用 Exp-Golomb 码长估计码率。
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.fft import dctn, idctn

from tvqe.entity.sequence import DegradeProfile, YuvSequence
from tvqe.storage.base import SequenceStore

logger = logging.getLogger(__name__)

# 8-bit 电平偏移
LEVEL_SHIFT = 128.0


def make_test_pattern(height: int = 64, width: Optional[int] = None, seed: int = 0) -> np.ndarray:
    """
    标准测试图案：斜坡 + 棋盘格 + 固定种子的纹理，取值 [0, 1]

    Args:
        height: 高
        width: 宽，默认与高相同
        seed: 纹理种子

    Returns:
        np.ndarray: [H, W] float64
    """
    width = height if width is None else width
    y, x = np.mgrid[0:height, 0:width]
    ramp = (x + y) / max(1, height + width - 2)
    checker = ((x // 4 + y // 4) % 2).astype(np.float64)
    texture = np.random.default_rng(seed).uniform(0.0, 1.0, size=(height, width))
    return 0.5 * ramp + 0.25 * checker + 0.25 * texture


def make_test_sequence(frames: int, height: int, width: int, seed: int = 0, motion: Tuple[int, int] = (1, 2)) -> np.ndarray:
    """
    由测试图案平移得到的合成原始序列，相邻帧之间有 (dy, dx) 像素的全局运动

    Args:
        frames: 帧数
        height: 高
        width: 宽
        seed: 纹理种子
        motion: 每帧的 (dy, dx) 位移

    Returns:
        np.ndarray: [T, H, W] uint8
    """
    dy, dx = motion
    canvas = make_test_pattern(height + abs(dy) * frames, width + abs(dx) * frames, seed)
    out = np.empty((frames, height, width), dtype=np.uint8)
    for t in range(frames):
        y0 = abs(dy) * t if dy >= 0 else abs(dy) * (frames - 1 - t)
        x0 = abs(dx) * t if dx >= 0 else abs(dx) * (frames - 1 - t)
        out[t] = np.rint(canvas[y0:y0 + height, x0:x0 + width] * 255.0).astype(np.uint8)
    return out


def step_matrix(profile: DegradeProfile) -> np.ndarray:
    """
    每个 DCT 系数的量化步长（8-bit 单位）

    DC 使用基础步长的 1/8，AC 步长随频率 u+v 线性增长。
    """
    b = profile.block
    u, v = np.mgrid[0:b, 0:b]
    steps = profile.step * (1.0 + (u + v) / b)
    steps[0, 0] = profile.step / 8.0
    return steps


def exp_golomb_bits(levels: np.ndarray) -> int:
    """
    有符号 Exp-Golomb 码长之和

    Args:
        levels: 整数量化电平

    Returns:
        int: 总比特数
    """
    v = levels.astype(np.int64).reshape(-1)
    code = np.where(v > 0, 2 * v - 1, -2 * v)
    return int(np.sum(2 * np.floor(np.log2(code + 1)).astype(np.int64) + 1))


def _to_blocks(x: np.ndarray, b: int) -> np.ndarray:
    h, w = x.shape
    return x.reshape(h // b, b, w // b, b).transpose(0, 2, 1, 3)


def _from_blocks(blocks: np.ndarray) -> np.ndarray:
    nh, nw, b, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(nh * b, nw * b)


def encode_plane(plane: np.ndarray, profile: DegradeProfile) -> Tuple[np.ndarray, int]:
    """
    对一个亮度平面做合成编码

    Args:
        plane: [H, W]，取值 [0, 1]
        profile: 失真参数

    Returns:
        Tuple[np.ndarray, int]: (重建平面 [0, 1], 估计比特数)
    """
    plane = np.asarray(plane, dtype=np.float64)
    height, width = plane.shape
    b = profile.block
    ph, pw = (-height) % b, (-width) % b
    x = plane * 255.0 - LEVEL_SHIFT
    if ph or pw:
        x = np.pad(x, ((0, ph), (0, pw)), mode="reflect")

    coeffs = dctn(_to_blocks(x, b), type=2, axes=(2, 3), norm="ortho")
    if profile.q == 0:
        # 无损：码率按单位步长估计
        bits = exp_golomb_bits(np.rint(coeffs))
        recon = coeffs
    else:
        steps = step_matrix(profile)
        scaled = coeffs / steps
        levels = np.sign(scaled) * np.floor(np.abs(scaled) + profile.deadzone)
        levels[:, :, 0, 0] = np.rint(scaled[:, :, 0, 0])
        bits = exp_golomb_bits(levels)
        recon = levels * steps

    out = _from_blocks(idctn(recon, type=2, axes=(2, 3), norm="ortho"))
    out = (out[:height, :width] + LEVEL_SHIFT) / 255.0
    return np.clip(out, 0.0, 1.0), bits


def synth_degrade(plane: np.ndarray, profile: DegradeProfile) -> np.ndarray:
    """
    确定性的合成编码失真

    Args:
        plane: [H, W]，取值 [0, 1]
        profile: 失真参数，q=0 为无损

    Returns:
        np.ndarray: 失真后的平面
    """
    return encode_plane(plane, profile)[0]


def rate_kbps(bits_per_frame: float, fps: float) -> float:
    """每帧比特数换算为 kbps"""
    return bits_per_frame * fps / 1000.0


def degrade_sequence(
    store: SequenceStore,
    raw: YuvSequence,
    out_path: str,
    profile: DegradeProfile,
) -> Tuple[YuvSequence, float]:
    """
    对整个序列做合成编码并写出，色度原样复制

    Args:
        store: 序列存储
        raw: 原始序列
        out_path: 输出路径
        profile: 失真参数

    Returns:
        Tuple[YuvSequence, float]: (失真序列, 码率 kbps)
    """
    planes, chroma, total_bits = [], [], 0
    for t in range(raw.frame_count):
        degraded, bits = encode_plane(store.read_y_plane(raw, t), profile)
        planes.append(degraded)
        chroma.append(store.read_chroma(raw, t))
        total_bits += bits
    seq = store.write_sequence(out_path, raw.width, raw.height, planes, chroma)
    rate = rate_kbps(total_bits / max(1, raw.frame_count), profile.fps)
    logger.info(f"合成失真完成: q={profile.q}, {raw.frame_count} 帧 -> {out_path}, 码率 {rate:.2f} kbps")
    return seq, rate
