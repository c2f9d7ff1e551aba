import numpy as np
import pytest
import scipy.sparse as sp

from qmoney.linalg import ContractViolationError, hermitize, kron, realify
from qmoney.sdp_solver import (SdpProblem, SolverOptions,
                               _detect_kron_identity, _realify_sparse,
                               _structured_cmat, _structured_schur, solve,
                               vectorize_constraints)
from qmoney.operators import choi_matrix


def random_channel(rng, d_in, d_out, n_kraus):
    n_kraus = max(n_kraus, -(-d_in // d_out))
    stack = rng.standard_normal((n_kraus * d_out, d_in)) \
        + 1j * rng.standard_normal((n_kraus * d_out, d_in))
    q, _ = np.linalg.qr(stack)
    return [q[k * d_out:(k + 1) * d_out, :] for k in range(n_kraus)]


def eigenvalue_problem(diag, extra_ineq=None):
    c = np.diag(diag).astype(complex)
    ineqs = tuple(extra_ineq) if extra_ineq else ()
    return SdpProblem(objective=c,
                      equalities=((np.eye(len(diag), dtype=complex), 1.0),),
                      inequalities=ineqs, variable_dim=len(diag))


class TestTrivialProblems:
    def test_smallest_eigenvalue_extraction(self):
        sol = solve(eigenvalue_problem([1.0, 2.0]))
        assert sol.status == "optimal"
        assert sol.primal_value == pytest.approx(1.0, abs=1e-6)
        assert abs(sol.x[0, 0] - 1.0) <= 1e-5
        assert abs(sol.x[1, 1]) <= 1e-5

    def test_forced_split(self):
        ineq = ((np.diag([1.0, 0.0]).astype(complex), 0.25, "<="),)
        sol = solve(eigenvalue_problem([1.0, 2.0], ineq))
        assert sol.status == "optimal"
        assert sol.primal_value == pytest.approx(1.75, abs=1e-6)

    def test_maximize(self):
        p = SdpProblem(objective=np.diag([1.0, 2.0]).astype(complex),
                       equalities=((np.eye(2, dtype=complex), 1.0),),
                       variable_dim=2, sense="max")
        sol = solve(p)
        assert sol.primal_value == pytest.approx(2.0, abs=1e-6)

    def test_complex_objective(self):
        pauli_y = np.array([[0, -1j], [1j, 0]])
        sol = solve(SdpProblem(objective=pauli_y,
                               equalities=((np.eye(2, dtype=complex), 1.0),),
                               variable_dim=2))
        assert sol.primal_value == pytest.approx(-1.0, abs=1e-6)

    def test_greater_equal_sense(self):
        ineq = ((np.diag([1.0, 0.0]).astype(complex), 0.75, ">="),)
        sol = solve(eigenvalue_problem([1.0, 2.0], ineq))
        # Forced to put at least 0.75 on the cheap coordinate: optimum stays 1.
        assert sol.primal_value == pytest.approx(1.0, abs=1e-6)


class TestValidation:
    def test_non_hermitian_objective_rejected(self):
        with pytest.raises(ContractViolationError):
            SdpProblem(objective=np.array([[0, 1], [0, 0]], dtype=complex),
                       equalities=((np.eye(2, dtype=complex), 1.0),),
                       variable_dim=2)

    def test_bad_sense(self):
        with pytest.raises(ValueError):
            SdpProblem(objective=np.eye(2, dtype=complex),
                       equalities=((np.eye(2, dtype=complex), 1.0),),
                       variable_dim=2, sense="sideways")

    def test_bad_inequality_sense(self):
        with pytest.raises(ValueError):
            SdpProblem(objective=np.eye(2, dtype=complex),
                       inequalities=((np.eye(2, dtype=complex), 1.0, "=="),),
                       variable_dim=2)

    def test_no_constraints_rejected(self):
        p = SdpProblem(objective=np.eye(2, dtype=complex), variable_dim=2)
        with pytest.raises(ValueError):
            solve(p)


class TestVectorizeConstraints:
    def test_d2_pattern(self):
        cons = vectorize_constraints((3, 2), output_factors=1)
        assert len(cons) == 4
        assert [b for _, b in cons] == [1.0, 0.0, 0.0, 1.0]

    def test_random_channel_choi_satisfies_constraints(self):
        rng = np.random.default_rng(3)
        kraus = random_channel(rng, 3, 4, 2)
        j = choi_matrix(kraus)  # out(4) x in(3)
        for a, b in vectorize_constraints((4, 3), output_factors=1):
            got = np.einsum("ij,ji->", a.toarray(), j).real
            assert abs(got - b) <= 1e-12

    def test_d4_linear_independence(self):
        cons = vectorize_constraints((2, 2, 4), output_factors=2)
        assert len(cons) == 16
        mats = [a.toarray().ravel() for a, _ in cons]
        gram = np.array([[np.vdot(x, y).real for y in mats] for x in mats])
        assert np.linalg.matrix_rank(gram) == 16


class TestStructuredSchur:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        d_out, d_in = 3, 2
        n = 2 * d_out * d_in
        w = rng.standard_normal((n, n))
        w = w @ w.T + n * np.eye(n)
        blocks, trips = [], []
        for a, _ in vectorize_constraints((d_out, d_in), output_factors=1):
            blk = _detect_kron_identity(a, d_out, d_in)
            assert blk is not None
            blocks.append(blk)
            trips.append(_realify_sparse(a))
        cmat = _structured_cmat(blocks, d_in)
        fast = _structured_schur(w, cmat, d_out, d_in)
        m = len(blocks)
        slow = np.zeros((m, m))
        mats = []
        for rr, cc, vv in trips:
            am = np.zeros((n, n))
            np.add.at(am, (rr, cc), vv)
            mats.append(am)
        for i in range(m):
            for j in range(m):
                slow[i, j] = np.trace(mats[i] @ w @ mats[j] @ w)
        assert np.max(np.abs(fast - slow)) <= 1e-10 * max(1, np.abs(slow).max())

    def test_detection_rejects_non_kron(self):
        a = sp.csr_matrix(np.diag([1.0, 2.0, 3.0, 4.0]).astype(complex))
        assert _detect_kron_identity(a, 2, 2) is None

    def test_detection_accepts_kron(self):
        b = np.array([[1.0, 2.0 - 1j], [2.0 + 1j, 0.5]])
        a = sp.csr_matrix(np.kron(np.eye(3), b))
        blk = _detect_kron_identity(a, 3, 2)
        assert blk is not None
        assert np.max(np.abs(blk.toarray() - b)) == 0


def tiny_cloning_problem(output_dim=None):
    """Small trace-preservation-constrained problem used by several tests."""
    rng = np.random.default_rng(11)
    d_out, d_in = 2, 2
    d = d_out * d_in
    c = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    c = hermitize(c @ c.conj().T)
    eqs = tuple(vectorize_constraints((d_out, d_in), output_factors=1))
    g = hermitize(np.diag(rng.standard_normal(d)).astype(complex))
    return SdpProblem(objective=c, equalities=eqs,
                      inequalities=((g, 0.5, "<="),),
                      variable_dim=d, output_dim=output_dim)


class TestSolverProperties:
    def test_structured_and_generic_agree(self):
        sol_s = solve(tiny_cloning_problem(output_dim=2))
        sol_g = solve(tiny_cloning_problem(output_dim=None))
        assert sol_s.status == sol_g.status == "optimal"
        assert sol_s.primal_value == pytest.approx(sol_g.primal_value,
                                                   abs=1e-8)

    def test_weak_duality_on_converged_tail(self):
        records = []
        solve(tiny_cloning_problem(output_dim=2),
              SolverOptions(log=records.append))
        tail = [r for r in records
                if r.primal_residual <= 1e-8 and r.dual_residual <= 1e-8]
        assert tail, "no feasible iterates logged"
        for r in tail:
            assert r.primal_value >= r.dual_value - 1e-9

    def test_constraint_permutation_invariance(self):
        base = tiny_cloning_problem()
        perm = SdpProblem(objective=base.objective,
                          equalities=base.equalities[::-1],
                          inequalities=base.inequalities,
                          variable_dim=base.variable_dim)
        v1 = solve(base).primal_value
        v2 = solve(perm).primal_value
        assert abs(v1 - v2) <= 1e-7

    def test_realified_double_matches(self):
        base = tiny_cloning_problem()
        sol = solve(base)
        d = base.variable_dim
        eqs = tuple((realify(a.toarray() if sp.issparse(a) else a), 2 * b)
                    for a, b in base.equalities)
        ineqs = tuple((realify(g), 2 * h, s)
                      for g, h, s in base.inequalities)
        doubled = SdpProblem(objective=realify(base.objective),
                             equalities=eqs, inequalities=ineqs,
                             variable_dim=2 * d)
        sol2 = solve(doubled)
        assert sol2.primal_value == pytest.approx(2 * sol.primal_value,
                                                  abs=2e-7)

    def test_complementary_slackness(self):
        sol = solve(tiny_cloning_problem(output_dim=2))
        for z, s in zip(sol.dual_inequality, sol.slacks):
            assert abs(z * s) <= 1e-6
            assert z >= -1e-9

    def test_dual_objective_consistency(self):
        base = tiny_cloning_problem(output_dim=2)
        sol = solve(base)
        # Rebuild the dual value from the reported multipliers.
        want = sum(y * b for y, (_, b) in zip(sol.dual_equality,
                                              base.equalities))
        g, h, sense = base.inequalities[0]
        want += sol.dual_inequality[0] * h * (-1 if sense == "<=" else 1)
        assert sol.dual_value == pytest.approx(want, abs=1e-9)

    def test_primal_feasibility_of_solution(self):
        base = tiny_cloning_problem(output_dim=2)
        sol = solve(base)
        for a, b in base.equalities:
            a = a.toarray() if sp.issparse(a) else a
            assert abs(np.einsum("ij,ji->", a, sol.x).real - b) <= 1e-6
        eigs = np.linalg.eigvalsh(sol.x)
        assert eigs[0] >= -1e-8

    def test_iteration_log_stream(self):
        records = []
        solve(eigenvalue_problem([1.0, 2.0]),
              SolverOptions(log=records.append))
        assert len(records) >= 2
        assert records[0].iteration == 0
        assert all(r.gap >= 0 for r in records)

    def test_determinism(self):
        a = solve(tiny_cloning_problem(output_dim=2))
        b = solve(tiny_cloning_problem(output_dim=2))
        assert a.primal_value == b.primal_value
        assert a.iterations == b.iterations
        assert np.array_equal(a.x, b.x)


class TestInfeasible:
    def test_contradictory_trace_pins(self):
        eqs = ((np.eye(2, dtype=complex), 1.0),
               (np.eye(2, dtype=complex), 2.0))
        sol = solve(SdpProblem(objective=np.eye(2, dtype=complex),
                               equalities=eqs, variable_dim=2))
        assert sol.status in ("infeasible", "numerical_failure",
                              "max_iterations")
        assert sol.status != "optimal"
