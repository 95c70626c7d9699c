"""
配置文件
如果在 .env 文件中配置了相同的变量名, 则以 .env 文件中的配置为准
"""

import os
from pydantic import computed_field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """应用配置类，使用Pydantic V2语法"""

    # 应用信息
    APP_NAME: str = "sgfem-helmholtz-lowrank"

    # 日志配置
    LOG_LEVEL: str = "INFO"
    LOG_ITERATIONS: bool = False  # 逐步输出残差与秩

    # 输出目录（报告、谱、误差衰减表的默认位置）
    DATA_DIR: str = os.path.abspath(os.path.join(os.path.dirname(__file__), "../../data"))

    # 稠密/直接求解路径的规模上限
    DENSE_EIGEN_LIMIT: int = 4000         # spectrum_K0 允许的最大 J
    FULL_ASSEMBLY_LIMIT: int = 2_000_000  # 显式组装 A 允许的最大 J*Q_s
    DIRECT_SOLVE_LIMIT: int = 200_000     # 直接求解允许的最大 J*Q_s
    EXISTENCE_LIMIT: int = 4096           # 分裂误差实验允许的最大 J*Q_s

    # 求解器默认值
    DEFAULT_TOL: float = 1e-4
    DEFAULT_EPS_REL: float = 1e-6
    DEFAULT_MAX_IT: int = 500
    BREAKDOWN_TOL: float = 1e-14
    PRECOND_COND_LIMIT: float = 1e14

    # 问题默认值
    DEFAULT_MEAN: float = 5.0
    DEFAULT_SIGMA: float = 1.0
    DEFAULT_LENGTH: float = 1.0
    DEFAULT_SOURCE: float = 0.0
    DEFAULT_DIRICHLET_VALUE: float = 0.1

    # 批量计算配置
    BENCH_WORKERS: int = 1

    # Celery配置（默认内存代理 + 同步执行，无需外部服务）
    CELERY_BROKER_URL: str = "memory://"
    CELERY_RESULT_BACKEND: str = "cache+memory://"
    CELERY_TASK_ALWAYS_EAGER: bool = True

    # 任务配置
    TASK_TIME_LIMIT: int = 3600  # 任务超时时间（秒）

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
    )

    @computed_field
    @property
    def DEFAULT_REPORT_PATH(self) -> str:
        """获取默认的报告CSV路径"""
        return os.path.join(self.DATA_DIR, "report.csv")

    @computed_field
    @property
    def DEFAULT_SPECTRUM_PATH(self) -> str:
        """获取默认的K_0谱CSV路径"""
        return os.path.join(self.DATA_DIR, "spectrum.csv")

    @computed_field
    @property
    def DEFAULT_DECAY_PATH(self) -> str:
        """获取默认的误差衰减CSV路径"""
        return os.path.join(self.DATA_DIR, "decay.csv")


# 创建全局设置对象
settings = Settings()
