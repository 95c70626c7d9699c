# 配置、日志、错误类型与 Celery 应用
