import logging
import sys
from .config import settings


def setup_logging():
    """
    设置日志配置

    应用日志记录器名为 settings.APP_NAME；逐步残差写入其子记录器 "iterations"，
    只有 LOG_ITERATIONS 打开时才输出。scipy/numpy 的警告（病态矩阵、稀疏效率等）
    经 logging.captureWarnings 进入同一输出。
    """
    log_level = getattr(logging, settings.LOG_LEVEL)

    # bench 在 joblib 进程池中运行时需要区分进程
    logging.basicConfig(
        level=log_level,
        format="%(asctime)s - %(processName)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[logging.StreamHandler(sys.stdout)],
    )
    logging.captureWarnings(True)

    for name in ("celery", "joblib", "py.warnings"):
        logging.getLogger(name).setLevel(log_level)

    app_logger = logging.getLogger(settings.APP_NAME)
    app_logger.setLevel(log_level)

    iterations = app_logger.getChild("iterations")
    iterations.setLevel(logging.DEBUG if settings.LOG_ITERATIONS else logging.WARNING)

    return app_logger, iterations


# 应用日志记录器与逐步迭代日志记录器
logger, iteration_logger = setup_logging()
