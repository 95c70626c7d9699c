# Celery 算例任务
