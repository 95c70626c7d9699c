import numpy as np
import pytest
from scipy import sparse

from app.core.errors import DimensionMismatchError, SingularMatrixError, SizeLimitError
from app.main import build_config
from app.models.solver import MatvecMode, PrecondStorage, SolveStatus, SolverKind, SolverSelection, TimingCategory
from app.schemas.case import ProblemConfig
from app.schemas.solver import SolverConfig
from app.services.case_service import assemble_case, run_bench, run_case
from app.services.galerkin_service import KronOperator, build_full_A, precond_prepare
from app.services.solvers import direct_solve, get_all_solvers, get_solver, p_bicg_full, plr_bicg
from app.services.solvers.base import GalerkinSystem, OperationTimer
from app.services.solvers.direct_solver import DirectSolver
from app.services.solvers.lowrank_bicg import LowRankBiCGSolver
from app.utils.config_file import load_sweep_file
from app.utils.lowrank_utils import LowRankFactor, lr_frob_norm
from tests.conftest import BENCH_DIR, PI_MULTIPLES, random_factor

CFG = SolverConfig(tol=1e-4, eps_rel=1e-6)


def _relative(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _solve_both(case):
    M = precond_prepare(case.op.K[0])
    X, lr_report = plr_bicg(case.op, M, case.B, CFG)
    A = build_full_A(case.op)
    x, full_report = p_bicg_full(A, M, case.B.to_vector(), CFG)
    reference = direct_solve(A, case.B.to_vector())
    return X, lr_report, x, full_report, reference


def _identity_system(rng, J=6, Q_s=4):
    op = KronOperator(G=(sparse.identity(Q_s, format="csr"),), K=(sparse.identity(J, format="csr"),))
    M = precond_prepare(sparse.identity(J, format="csc"))
    return op, M, random_factor(rng, J, Q_s, 1)


def _swap_system():
    # <e_1, A e_1> = 0，第一步即中断
    K = sparse.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    op = KronOperator(G=(sparse.identity(1, format="csr"),), K=(K,))
    M = precond_prepare(sparse.identity(2, format="csc"))
    B = LowRankFactor(np.array([[1.0], [0.0]]), np.array([[1.0]]))
    return op, M, B


class TestLowRankBiCG:
    def test_identity_converges_in_one_step(self, rng):
        op, M, B = _identity_system(rng)
        X, report = plr_bicg(op, M, B, CFG)
        assert report.iterations == 1
        assert report.converged
        assert report.status is SolveStatus.CONVERGED
        np.testing.assert_allclose(X.to_dense(), B.to_dense(), atol=1e-12)

    def test_zero_rhs_returns_immediately(self, small_case):
        M = precond_prepare(small_case.op.K[0])
        X, report = plr_bicg(small_case.op, M, LowRankFactor.zeros(*small_case.op.dims), CFG)
        assert report.iterations == 0
        assert report.converged
        assert X.rank == 0

    def test_matches_direct_solve(self, small_case):
        X, report, _, _, reference = _solve_both(small_case)
        assert report.converged
        assert _relative(X.to_vector(), reference) <= 1e-3

    def test_matches_direct_solve_helmholtz(self, helmholtz_case):
        X, report, _, _, reference = _solve_both(helmholtz_case)
        assert report.converged
        assert _relative(X.to_vector(), reference) <= 1e-3

    def test_report_bookkeeping(self, small_case):
        M = precond_prepare(small_case.op.K[0])
        _, report = plr_bicg(small_case.op, M, small_case.B, CFG)
        assert report.solver is SolverKind.LOWRANK
        assert len(report.residual_history) == report.iterations + 1
        assert len(report.rank_history) == report.iterations
        assert report.avg_rank == pytest.approx(np.mean(report.rank_history))
        instrumented = sum(report.share(c) for c in OperationTimer.INSTRUMENTED)
        assert instrumented <= 1.0 + 1e-9
        assert report.share(TimingCategory.OTHER) == pytest.approx(1.0 - instrumented)
        assert report.nnz_preconditioner == M.nnz
        assert report.storage is PrecondStorage.FACTORIZED

    def test_true_residual_audit(self, helmholtz_case):
        M = precond_prepare(helmholtz_case.op.K[0])
        cfg = CFG.model_copy(update={"audit_true_residual": True})
        _, report = plr_bicg(helmholtz_case.op, M, helmholtz_case.B, cfg)
        assert report.converged
        assert len(report.true_residual_history) == report.iterations
        assert report.true_residual_history[-1] <= 10 * cfg.tol * lr_frob_norm(helmholtz_case.B)

    def test_truncation_drift_is_bounded(self, small_case):
        M = precond_prepare(small_case.op.K[0])
        cfg = CFG.model_copy(update={"audit_true_residual": True})
        _, report = plr_bicg(small_case.op, M, small_case.B, cfg)
        norm_B = lr_frob_norm(small_case.B)
        assert report.converged and report.iterations >= 1
        for k, true_residual in enumerate(report.true_residual_history, start=1):
            drift = abs(true_residual - report.residual_history[k])
            assert drift <= 10 * cfg.eps_rel * norm_B * (k + 1)

    @pytest.mark.parametrize("steps", [1, 2, 3])
    def test_exact_truncation_matches_full_iterates(self, helmholtz_case, steps):
        M = precond_prepare(helmholtz_case.op.K[0])
        cfg = SolverConfig(tol=1e-14, eps_rel=0.0, max_it=steps)
        X, lr_report = plr_bicg(helmholtz_case.op, M, helmholtz_case.B, cfg)
        x, full_report = p_bicg_full(build_full_A(helmholtz_case.op), M, helmholtz_case.B.to_vector(), cfg)
        assert lr_report.iterations == full_report.iterations == steps
        assert _relative(X.to_vector(), x) <= 1e-8
        np.testing.assert_allclose(lr_report.residual_history, full_report.residual_history, rtol=1e-8)
        assert max(lr_report.rank_history) <= min(helmholtz_case.op.dims)

    def test_max_iterations(self, helmholtz_case):
        M = precond_prepare(helmholtz_case.op.K[0])
        cfg = SolverConfig(tol=1e-12, max_it=1)
        _, report = plr_bicg(helmholtz_case.op, M, helmholtz_case.B, cfg)
        assert report.iterations == 1
        assert not report.converged
        assert report.status is SolveStatus.MAX_ITERATIONS

    def test_breakdown(self):
        op, M, B = _swap_system()
        X, report = plr_bicg(op, M, B, CFG)
        assert report.status is SolveStatus.BREAKDOWN
        assert not report.converged
        assert report.iterations == 0
        assert X.rank == 0

    def test_dense_matvec_mode(self, small_case):
        M = precond_prepare(small_case.op.K[0])
        X, report = plr_bicg(small_case.op, M, small_case.B, CFG)
        cfg = CFG.model_copy(update={"matvec_mode": MatvecMode.DENSE})
        Y, dense_report = plr_bicg(small_case.op, M, small_case.B, cfg)
        assert dense_report.converged
        assert abs(dense_report.iterations - report.iterations) <= 1
        assert _relative(Y.to_vector(), X.to_vector()) <= 1e-3

    def test_inverse_storage(self, small_case):
        M = precond_prepare(small_case.op.K[0], PrecondStorage.INVERSE)
        _, report = plr_bicg(small_case.op, M, small_case.B, CFG)
        assert report.converged
        assert report.storage is PrecondStorage.INVERSE

    def test_dimension_mismatch(self, rng, small_case):
        M = precond_prepare(small_case.op.K[0])
        with pytest.raises(DimensionMismatchError):
            plr_bicg(small_case.op, M, random_factor(rng, 3, 2, 1), CFG)


class TestFullBiCG:
    def test_identity(self, rng):
        _, M, B = _identity_system(rng)
        A = sparse.identity(B.U.shape[0] * B.V.shape[0], format="csr")
        x, report = p_bicg_full(A, M, B.to_vector(), CFG)
        assert report.iterations == 1
        np.testing.assert_allclose(x, B.to_vector(), atol=1e-12)

    def test_matches_direct_solve(self, small_case):
        _, _, x, report, reference = _solve_both(small_case)
        assert report.converged
        assert report.solver is SolverKind.FULL
        assert not report.rank_history
        assert _relative(x, reference) <= 1e-3

    def test_breakdown(self):
        op, M, B = _swap_system()
        _, report = p_bicg_full(build_full_A(op), M, B.to_vector(), CFG)
        assert report.status is SolveStatus.BREAKDOWN

    def test_parity_with_lowrank(self, small_case):
        _, lr_report, _, full_report, _ = _solve_both(small_case)
        assert abs(lr_report.iterations - full_report.iterations) <= 1


class TestDirectSolve:
    def test_identity(self, rng):
        b = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        np.testing.assert_allclose(direct_solve(sparse.identity(5, format="csc"), b), b)

    def test_diagonal(self):
        d = np.array([1.0, 2.0, 4.0, -8.0])
        np.testing.assert_allclose(direct_solve(sparse.diags(d), np.ones(4)), 1.0 / d)

    def test_random_spd(self, rng):
        R = rng.standard_normal((100, 100))
        A = sparse.csc_matrix(R @ R.T + 100 * np.eye(100))
        b = rng.standard_normal(100)
        x = direct_solve(A, b)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)

    def test_size_limit(self):
        with pytest.raises(SizeLimitError):
            direct_solve(sparse.identity(5, format="csc"), np.ones(5), limit=3)

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            direct_solve(sparse.csc_matrix((3, 3)), np.ones(3))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            direct_solve(sparse.identity(3, format="csc"), np.ones(4))


class TestRegistry:
    def test_lookup(self):
        assert isinstance(get_solver("lowrank"), LowRankBiCGSolver)
        assert isinstance(get_solver(SolverKind.DIRECT), DirectSolver)
        assert set(get_all_solvers()) == set(SolverKind)

    def test_unknown_solver(self):
        with pytest.raises(ValueError):
            get_solver("gmres")

    def test_selection_expansion(self):
        assert SolverSelection.BOTH.expand() == [SolverKind.LOWRANK, SolverKind.FULL]
        assert SolverSelection.DIRECT.expand() == [SolverKind.DIRECT]

    def test_system_solvers_agree(self, small_case):
        M = precond_prepare(small_case.op.K[0])
        system = GalerkinSystem(small_case.op, M, small_case.B)
        outcomes = {kind: solver.solve(system, CFG) for kind, solver in get_all_solvers().items()}
        reference = outcomes[SolverKind.DIRECT].dense()
        assert reference.shape == small_case.op.dims
        for outcome in outcomes.values():
            assert np.linalg.norm(outcome.dense() - reference) <= 1e-3 * np.linalg.norm(reference)
        assert outcomes[SolverKind.LOWRANK].report.nnz_operator == system.full_matrix.nnz
        assert outcomes[SolverKind.DIRECT].report.converged


class TestOperationTimer:
    def test_shares_fill_other(self):
        timer = OperationTimer()
        timer.elapsed[TimingCategory.MATVEC] = 0.25
        timer.elapsed[TimingCategory.TRUNCATION] = 0.25
        shares = timer.shares(1.0)
        assert shares[TimingCategory.MATVEC] == pytest.approx(0.25)
        assert shares[TimingCategory.OTHER] == pytest.approx(0.5)

    def test_disabled(self):
        timer = OperationTimer(enabled=False)
        with timer.measure(TimingCategory.TRACE):
            pass
        assert timer.shares(1.0) == {}


class TestAcceptanceTrends:
    @pytest.mark.parametrize("N,Q,Np", [(2, 2, 6), (3, 2, 9)])
    def test_parity_across_wavenumbers(self, N, Q, Np):
        for multiple in PI_MULTIPLES:
            report = run_case(ProblemConfig(N=N, Q=Q, Np=Np, c=multiple, c_pi=True, solver="both"))
            lowrank, full = report.reports
            assert lowrank.converged and full.converged
            assert abs(lowrank.iterations - full.iterations) <= 2

    @pytest.mark.slow
    def test_rank_grows_with_wavenumber(self):
        config_path = str(BENCH_DIR / "wavenumber_trend.env")
        configs = [
            build_config(config_path, overrides=overrides)
            for overrides in load_sweep_file(str(BENCH_DIR / "wavenumber_trend.sweep"))
        ]
        assert [cfg.wavenumber for cfg in configs] == pytest.approx([m * np.pi for m in PI_MULTIPLES])
        assert configs[0].sigma == 40.0

        cases = run_bench(configs)
        reports = [case.reports[0] for case in cases]
        ranks = [r.avg_rank for r in reports]
        iterations = [r.iterations for r in reports]
        assert all(r.converged for r in reports)
        assert all(case.positivity_bound > 0 for case in cases)
        assert ranks[0] < ranks[1] < ranks[2]
        assert iterations == sorted(iterations)
        assert all(r <= min(case.J, case.Q_s) for r, case in zip(ranks, cases))

    @pytest.mark.slow
    def test_mesh_robust_iterations(self):
        iterations = [
            run_case(ProblemConfig(N=4, Q=3, Np=Np, c=0.0)).reports[0].iterations
            for Np in (11, 21, 41)
        ]
        assert max(iterations) - min(iterations) <= 1

    @pytest.mark.slow
    def test_preconditioner_cost_structure(self):
        case = assemble_case(ProblemConfig(N=4, Q=3, Np=41, c=0.0))
        M = precond_prepare(case.op.K[0])
        _, lr_report = plr_bicg(case.op, M, case.B, CFG)
        A = build_full_A(case.op)
        _, full_report = p_bicg_full(A, M, case.B.to_vector(), CFG)
        assert lr_report.share(TimingCategory.PRECONDITIONER) < full_report.share(TimingCategory.PRECONDITIONER)
        assert M.nnz < A.nnz
