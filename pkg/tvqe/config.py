from pydantic_settings import BaseSettings
from typing import Literal


class Settings(BaseSettings):
    """
    进程级配置设置。
    使用环境变量进行配置，环境变量前缀为TVQE_。
    实验相关的超参数不在这里，见 tvqe.cli.runconfig.RunConfig。
    """
    # 应用设置
    APP_NAME: str = "tvqe"
    VERSION: str = "dev"

    # 日志设置
    LOG_LEVEL: Literal["debug", "info", "warning", "error"] = "info"

    # 输出设置
    OUTPUT_ROOT: str = "runs"

    # 序列存储设置
    SEQUENCE_STORAGE: Literal["filesystem", "memory"] = "filesystem"

    # 训练设置
    DEFAULT_SEED: int = 0
    CHECKPOINT_EVERY: int = 100

    # 梯度检查设置
    GRADCHECK_TOLERANCE: float = 1e-4

    # 推理设置
    ENHANCE_WORKERS: int = 1

    class Config:
        """配置元数据"""
        env_prefix = "TVQE_"
        env_file = ".env"
        case_sensitive = True


# 创建全局配置实例
def get_settings() -> Settings:
    """获取应用配置实例"""
    return Settings()
