import pytest
from pydantic import ValidationError

from app.core.celery_app import celery_app
from app.schemas.case import CaseReport, ProblemConfig
from app.worker.tasks import run_case_task


def test_eager_by_default():
    assert celery_app.conf.task_always_eager
    assert celery_app.conf.task_serializer == "json"


def test_case_task_returns_report():
    cfg = ProblemConfig(N=1, Q=2, Np=5, c="1.5pi")
    payload = run_case_task.delay(cfg.model_dump(mode="json")).get()
    report = CaseReport.model_validate(payload)
    assert report.config == cfg
    assert report.converged
    assert report.size_A == report.J * report.Q_s


def test_invalid_config_is_rejected():
    with pytest.raises(ValidationError):
        run_case_task.delay({"N": 0}).get()
