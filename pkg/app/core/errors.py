from typing import Optional


class SGFEMError(Exception):
    """所有求解器错误的基类"""


class ConfigurationError(SGFEMError, ValueError):
    """配置错误（参数、命令行、配置文件）"""


class DimensionMismatchError(SGFEMError, ValueError):
    """低秩因子或算子的维度不匹配"""


class SizeLimitError(SGFEMError):
    """稠密/直接路径超过配置的规模上限"""

    def __init__(self, what: str, size: int, limit: int):
        super().__init__(f"{what}: size {size} exceeds configured limit {limit}")
        self.size = size
        self.limit = limit


class SingularMatrixError(SGFEMError):
    """矩阵奇异或病态"""

    def __init__(self, message: str, condition_estimate: Optional[float] = None):
        if condition_estimate is not None:
            message = f"{message} (condition estimate {condition_estimate:.3e})"
        super().__init__(message)
        self.condition_estimate = condition_estimate


class InadmissibleSpectrumError(SGFEMError):
    """谱不在可积分表示所需的半平面内"""


class CaseExecutionError(SGFEMError):
    """run_case 某个阶段失败，带上阶段名和算例标签"""

    def __init__(self, label: str, stage: str, cause: Exception):
        super().__init__(f"Case {label} failed during {stage}: {cause}")
        self.label = label
        self.stage = stage
