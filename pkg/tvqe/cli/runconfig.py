"""
实验配置 RunConfig：模型、训练计划、损失、失真参数与 I/O 路径。

来源优先级（后者覆盖前者）：默认值 < Settings 环境变量 < --config JSON 文件 < key=value 覆盖项 < 命令行专用参数。
"""
import json
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, ValidationError

from tvqe.config import Settings
from tvqe.entity.errors import ConfigError, DataIOError, UsageError
from tvqe.entity.model import ModelConfig
from tvqe.entity.sequence import QP_PRESETS, DegradeProfile
from tvqe.entity.training import LossConfig, TrainSchedule

logger = logging.getLogger(__name__)


class IOPaths(BaseModel):
    """输入输出路径与序列尺寸"""
    raw: Optional[str] = None
    compressed: Optional[str] = None
    enhanced: Optional[str] = None
    checkpoint: Optional[str] = None
    output_dir: str = "runs/default"
    width: Optional[int] = Field(None, gt=0)
    height: Optional[int] = Field(None, gt=0)

    class Config:
        """配置元数据"""
        extra = "forbid"

    @property
    def dims(self) -> Optional[Tuple[int, int]]:
        if self.width is None or self.height is None:
            return None
        return self.width, self.height


class RunConfig(BaseModel):
    """
    一次运行的完整配置。未知键一律报错，解析后的结果会回显到输出目录。
    """
    model: ModelConfig = ModelConfig()
    schedule: TrainSchedule = TrainSchedule()
    loss: LossConfig = LossConfig()
    degrade: DegradeProfile = DegradeProfile()
    io: IOPaths = IOPaths()
    seed: int = 0
    q_list: List[int] = Field(default_factory=lambda: list(QP_PRESETS))

    class Config:
        """配置元数据"""
        extra = "forbid"

    def train_schedule(self) -> TrainSchedule:
        """训练计划，Charbonnier 的 ε 取自 loss 段，种子取自 seed"""
        return self.schedule.model_copy(update={"epsilon": self.loss.epsilon, "seed": self.seed})

    def require_dims(self) -> Tuple[int, int]:
        """
        Raises:
            UsageError: 没有给出 --dims 时抛出
        """
        if self.io.dims is None:
            raise UsageError("raw YUV input needs --dims WxH")
        return self.io.dims

    def require_path(self, name: str) -> str:
        """
        Raises:
            UsageError: io 段中对应路径为空时抛出
        """
        value = getattr(self.io, name)
        if not value:
            raise UsageError(f"missing path: io.{name}")
        return value


def parse_dims(text: str) -> Tuple[int, int]:
    """
    解析 "WxH"

    Raises:
        UsageError: 格式错误时抛出
    """
    parts = text.lower().split("x")
    try:
        width, height = (int(p) for p in parts)
    except ValueError:
        raise UsageError(f"--dims must look like WxH, got '{text}'")
    if width <= 0 or height <= 0:
        raise UsageError(f"--dims must be positive, got '{text}'")
    return width, height


def parse_value(text: str) -> Any:
    """覆盖项的值按 JSON 字面量解析，失败时保留为字符串"""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(data: Dict[str, Any], item: str) -> None:
    """
    把 "a.b.c=value" 写入嵌套字典

    Raises:
        UsageError: 缺少 '=' 或键为空时抛出
    """
    if "=" not in item:
        raise UsageError(f"override '{item}' must look like key=value")
    key, value = item.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise UsageError(f"override '{item}' has an empty key")
    node = data
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise UsageError(f"override '{item}': '{part}' is not a section")
        node = child
    node[parts[-1]] = parse_value(value)


def load_config_file(path: str) -> Dict[str, Any]:
    """
    读取 JSON 配置文件

    Raises:
        DataIOError: 文件无法读取时抛出
        ConfigError: 内容不是 JSON 对象时抛出
    """
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise DataIOError(f"cannot read config file {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    return data


def settings_defaults(settings: Settings) -> Dict[str, Any]:
    """由进程级 Settings 提供的默认值"""
    return {
        "seed": settings.DEFAULT_SEED,
        "schedule": {"checkpoint_every": settings.CHECKPOINT_EVERY},
        "io": {"output_dir": f"{settings.OUTPUT_ROOT}/default"},
    }


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def resolve_config(
    config_path: Optional[str] = None,
    overrides: Sequence[str] = (),
    settings: Optional[Settings] = None,
    flags: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    合并各来源得到 RunConfig

    Args:
        config_path: JSON 配置文件
        overrides: key=value 覆盖项
        settings: 进程级配置
        flags: 命令行专用参数（点分键 -> 值，值为 None 的忽略），例如 {"io.width": 64}

    Returns:
        RunConfig: 校验后的配置

    Raises:
        ConfigError: 出现未知键或字段值非法时抛出
    """
    data: Dict[str, Any] = settings_defaults(settings) if settings is not None else {}
    if config_path:
        data = _merge(data, load_config_file(config_path))
    for item in overrides:
        apply_override(data, item)
    for key, value in (flags or {}).items():
        if value is not None:
            apply_override(data, f"{key}={json.dumps(value)}")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    logger.debug(f"解析后的配置: {config.model_dump_json()}")
    return config
