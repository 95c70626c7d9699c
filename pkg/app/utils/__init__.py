# 低秩运算、混沌基、随机场、有限元与报告工具
