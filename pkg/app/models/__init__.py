# 枚举：求解器、状态、计时分类与网格节点类型
