from typing import Dict, Tuple

from pydantic import BaseModel, Field, field_validator

from tvqe.entity.errors import DataIOError, DimensionError

# 常用的五个 QP
QP_PRESETS: Tuple[int, ...] = (22, 27, 32, 37, 42)


class YuvSequence(BaseModel):
    """
    无文件头的 8-bit 平面 YUV 4:2:0 序列描述。
    尺寸由外部提供（命令行 --dims）。
    """
    path: str
    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)
    frame_count: int = Field(..., ge=0)
    bit_depth: int = 8

    class Config:
        """配置元数据"""
        frozen = True

    @field_validator("width", "height")
    @classmethod
    def _check_even(cls, v: int) -> int:
        if v % 2 != 0:
            raise ValueError(f"4:2:0 planes need even dimensions, got {v}")
        return v

    @property
    def luma_bytes(self) -> int:
        return self.width * self.height

    @property
    def chroma_bytes(self) -> int:
        return 2 * (self.width // 2) * (self.height // 2)

    @property
    def frame_bytes(self) -> int:
        """一帧 Y+U+V 的字节数"""
        return self.luma_bytes + self.chroma_bytes

    @property
    def expected_size(self) -> int:
        return self.frame_count * self.frame_bytes

    @classmethod
    def from_size(cls, path: str, width: int, height: int, size: int) -> "YuvSequence":
        """
        根据数据字节数推断帧数并创建序列描述

        Args:
            path: 序列路径（存储中的键）
            width: 宽度
            height: 高度
            size: 数据总字节数

        Returns:
            YuvSequence: 序列描述

        Raises:
            DataIOError: 字节数不是整帧数时抛出
        """
        if width % 2 or height % 2:
            raise DimensionError(f"{path}: 4:2:0 planes need even dimensions, got {width}x{height}")
        frame_bytes = width * height + 2 * (width // 2) * (height // 2)
        if size % frame_bytes != 0:
            raise DataIOError(
                f"{path}: size {size} bytes is not a whole number of {width}x{height} frames "
                f"({frame_bytes} bytes each)"
            )
        return cls(path=path, width=width, height=height, frame_count=size // frame_bytes)


class DegradeProfile(BaseModel):
    """
    合成编码失真的参数（代替 HEVC HM 编码）。
    q 是类似 QP 的量化强度，q=0 为无损。
    """
    q: int = Field(37, ge=0, le=51)
    block: int = Field(8, ge=2)
    deadzone: float = Field(1.0 / 3.0, ge=0.0, le=0.5)
    fps: float = Field(30.0, gt=0)

    class Config:
        """配置元数据"""
        frozen = True
        extra = "forbid"

    @property
    def step(self) -> float:
        """8-bit 单位下的基础量化步长，q 每增加 6 步长翻倍"""
        if self.q == 0:
            return 0.0
        return 2.0 ** ((self.q - 4) / 6.0)


# JCT-VC 测试集 18 个序列：名称 -> (类别, 宽, 高)
JCTVC_SEQUENCES: Dict[str, Tuple[str, int, int]] = {
    "Traffic": ("A", 2560, 1600),
    "PeopleOnStreet": ("A", 2560, 1600),
    "Kimono": ("B", 1920, 1080),
    "ParkScene": ("B", 1920, 1080),
    "Cactus": ("B", 1920, 1080),
    "BQTerrace": ("B", 1920, 1080),
    "BasketballDrive": ("B", 1920, 1080),
    "RaceHorsesC": ("C", 832, 480),
    "BQMall": ("C", 832, 480),
    "PartyScene": ("C", 832, 480),
    "BasketballDrill": ("C", 832, 480),
    "RaceHorses": ("D", 416, 240),
    "BQSquare": ("D", 416, 240),
    "BlowingBubbles": ("D", 416, 240),
    "BasketballPass": ("D", 416, 240),
    "FourPeople": ("E", 1280, 720),
    "Johnny": ("E", 1280, 720),
    "KristenAndSara": ("E", 1280, 720),
}


def desk_extent(name: str, scale: int = 4) -> Tuple[int, int]:
    """
    将 JCT-VC 序列的原始尺寸缩放到桌面规模（保持偶数）

    Args:
        name: 序列名称
        scale: 缩放倍数

    Returns:
        Tuple[int, int]: (宽, 高)，例如 416x240 -> 104x60
    """
    _, width, height = JCTVC_SEQUENCES[name]
    w = (width // scale) // 2 * 2
    h = (height // scale) // 2 * 2
    return w, h


def sequence_class(name: str) -> str:
    """返回序列所属类别，未知序列归为 '-'"""
    entry = JCTVC_SEQUENCES.get(name)
    return entry[0] if entry else "-"
