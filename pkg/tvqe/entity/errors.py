"""
异常类型定义。

每个异常带有 exit_code，run.py 根据它决定进程退出码：
0 成功，1 用法/配置错误，2 I/O 错误，3 数值失败（NaN、梯度检查）。
"""


class TVQEError(Exception):
    """所有项目异常的基类"""
    exit_code = 1


class UsageError(TVQEError):
    """调用方式不正确时抛出"""
    exit_code = 1


class ConfigError(TVQEError):
    """配置非法时抛出（例如注意力头数无法整除通道数）"""
    exit_code = 1


class DimensionError(TVQEError):
    """张量形状不匹配时抛出"""
    exit_code = 1


class DataIOError(TVQEError):
    """读写YUV序列或报告失败时抛出"""
    exit_code = 2


class CheckpointError(TVQEError):
    """检查点无法加载时抛出"""
    exit_code = 2


class ChecksumError(CheckpointError):
    """检查点校验和不一致时抛出"""
    pass


class ConfigMismatchError(CheckpointError):
    """检查点中的模型配置与期望配置不一致时抛出"""
    pass


class NumericError(TVQEError):
    """前向运算产生 NaN/Inf 时抛出，消息中包含算子名称"""
    exit_code = 3

    def __init__(self, op: str, message: str = ""):
        self.op = op
        super().__init__(f"non-finite values produced by op '{op}'" + (f": {message}" if message else ""))


class TrainingDivergedError(NumericError):
    """训练损失出现 NaN/Inf 时抛出"""

    def __init__(self, step: int, lr: float, components: dict):
        self.step = step
        self.lr = lr
        self.components = dict(components)
        detail = ", ".join(f"{k}={v}" for k, v in self.components.items())
        TVQEError.__init__(self, f"loss diverged at step {step} (lr={lr}): {detail}")
        self.op = "loss"


class OracleError(TVQEError):
    """有限差分检查的被测函数不确定时抛出"""
    exit_code = 3


class GradCheckError(TVQEError):
    """梯度检查未通过时抛出"""
    exit_code = 3


class CurveValidationError(TVQEError):
    """率失真曲线不满足单调性等前置条件时抛出"""
    exit_code = 1


class BDRateError(TVQEError):
    """BD-rate 无法计算时抛出（例如 PSNR 区间无重叠）"""
    exit_code = 1


class FrameIndexError(UsageError, IndexError):
    """帧序号超出序列范围时抛出"""
    exit_code = 1
