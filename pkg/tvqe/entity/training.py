from typing import Optional, Tuple

from pydantic import BaseModel, Field


class LossConfig(BaseModel):
    """组合损失 α·L_charb + β·L_mse 的权重"""
    alpha: float = Field(1.0, ge=0)
    beta: float = Field(0.0, ge=0)
    epsilon: float = Field(1e-6, gt=0)

    class Config:
        """配置元数据"""
        frozen = True
        extra = "forbid"


class TrainSchedule(BaseModel):
    """
    两阶段训练计划。
    第一阶段 α=1、β=0（Charbonnier），第二阶段 α=0、β=1（L2），学习率全程不变。
    """
    stage1_steps: int = Field(2000, ge=0)
    stage2_steps: int = Field(500, ge=0)
    lr: float = Field(1e-4, gt=0)
    batch_size: int = Field(4, ge=1)
    crop: int = Field(32, ge=1)
    num_patches: int = Field(64, ge=1)     # 预先采样的训练块数量
    seed: int = 0
    augment: bool = True
    clip_grad_norm: Optional[float] = Field(None, gt=0)
    log_every: int = Field(10, ge=1)
    checkpoint_every: int = Field(0, ge=0)  # 0 表示只在结束时保存
    epsilon: float = Field(1e-6, gt=0)

    class Config:
        """配置元数据"""
        frozen = True
        extra = "forbid"

    @property
    def total_steps(self) -> int:
        return self.stage1_steps + self.stage2_steps

    def stage_at(self, step: int) -> Tuple[int, LossConfig]:
        """
        返回第 step 步（从 0 开始）所处的阶段和损失权重

        Args:
            step: 全局步数

        Returns:
            Tuple[int, LossConfig]: (阶段号 1 或 2, 损失配置)
        """
        if step < self.stage1_steps:
            return 1, LossConfig(alpha=1.0, beta=0.0, epsilon=self.epsilon)
        return 2, LossConfig(alpha=0.0, beta=1.0, epsilon=self.epsilon)


class LossRecord(BaseModel):
    """每一步训练的损失记录，对应 CSV 的一行"""
    step: int
    stage: int
    alpha: float
    beta: float
    charbonnier: float
    mse: float
    total: float
