from celery import Celery
from .config import settings

# bench --distributed 使用的 Celery 应用
celery_app = Celery(
    settings.APP_NAME,
    broker=settings.CELERY_BROKER_URL,
    backend=settings.CELERY_RESULT_BACKEND
)

celery_app.conf.update(
    # 算例配置与报告都以 pydantic 模型的 JSON 形式传递
    task_serializer="json",
    accept_content=["json"],
    result_serializer="json",
    enable_utc=True,
    task_track_started=True,
    task_time_limit=settings.TASK_TIME_LIMIT,
    # 默认同步执行；指向真实代理并关闭 CELERY_TASK_ALWAYS_EAGER 后分发到 worker
    task_always_eager=settings.CELERY_TASK_ALWAYS_EAGER,
    task_eager_propagates=True,
    # 一个算例可能占用数 GB 内存并运行数分钟
    worker_prefetch_multiplier=1,
    worker_max_tasks_per_child=50,
    worker_concurrency=settings.BENCH_WORKERS,
    task_acks_late=True,
    task_default_queue=f"{settings.APP_NAME}_cases",
    task_routes={"app.worker.tasks.run_case_task": {"queue": f"{settings.APP_NAME}_cases"}},
)

celery_app.autodiscover_tasks(["app.worker"])
