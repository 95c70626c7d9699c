# 算例装配、Galerkin 算子、Krylov 求解器与存在性实验
