from typing import Any, Dict
from ..core.celery_app import celery_app
from ..core.logging import logger
from ..schemas.case import ProblemConfig
from ..services.case_service import run_case


@celery_app.task(bind=True)
def run_case_task(self, config: Dict[str, Any]) -> Dict[str, Any]:
    """
    运行一个算例

    Args:
        config: ProblemConfig 的 JSON 形式

    Returns:
        Dict[str, Any]: CaseReport 的 JSON 形式
    """
    cfg = ProblemConfig.model_validate(config)
    logger.info(f"Processing case task {self.request.id} for {cfg.label}")

    try:
        report = run_case(cfg)
    except Exception as e:
        logger.error(f"Error processing case {cfg.label}: {str(e)}")
        raise

    logger.info(f"Case task {self.request.id} completed (converged={report.converged})")
    return report.model_dump(mode="json")
