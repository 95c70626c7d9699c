# 算例配置与求解报告的 pydantic 模型
