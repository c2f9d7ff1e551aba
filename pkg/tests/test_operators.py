import itertools

import numpy as np
import pytest

from qmoney.linalg import (CapacityError, ContractViolationError, hermitize,
                           kron, kron_all, min_eigenvalue,
                           permute_subsystems)
from qmoney.operators import (answer_basis, apply_channel, build_n_state_ops,
                              build_trusted_ops, build_untrusted_ops,
                              choi_identity_check, choi_matrix, projector_P,
                              qubit_success_operator)
from qmoney.states import build_states, squashed_basis


def random_channel(rng, d_in, d_out, n_kraus):
    """Random trace-preserving channel via a Stiefel-orthonormal stack."""
    n_kraus = max(n_kraus, -(-d_in // d_out))  # need n_kraus*d_out >= d_in
    stack = rng.standard_normal((n_kraus * d_out, d_in)) \
        + 1j * rng.standard_normal((n_kraus * d_out, d_in))
    q, _ = np.linalg.qr(stack)
    return [q[k * d_out:(k + 1) * d_out, :] for k in range(n_kraus)]


def random_unit(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def constant_clone_choi(output_vec, mint_dim):
    """Choi matrix of the channel that discards input and prepares a fixed
    two-clone product state."""
    rho = np.outer(output_vec, output_vec.conj())
    return kron(kron(rho, rho), np.eye(mint_dim))


class TestTrustedOps:
    def test_trace_bookkeeping(self):
        ops = build_trusted_ops(build_states(0.8))
        assert np.trace(ops.e1).real == pytest.approx(1.5, abs=1e-12)
        assert np.trace(ops.l1).real == pytest.approx(3.0, abs=1e-12)

    def test_swap_relation(self):
        ops = build_trusted_ops(build_states(1.3))
        swapped = permute_subsystems(ops.e1, ops.dims, (1, 0, 2))
        assert np.max(np.abs(swapped - ops.e2)) <= 1e-14
        swapped_l = permute_subsystems(ops.l1, ops.dims, (1, 0, 2))
        assert np.max(np.abs(swapped_l - ops.l2)) <= 1e-14

    @pytest.mark.parametrize("mu", [0.1, 0.5, 1.0])
    @pytest.mark.parametrize("randomized", [False, True])
    def test_all_psd(self, mu, randomized):
        ops = build_trusted_ops(build_states(mu, randomized))
        for m in (ops.e1, ops.e2, ops.l1, ops.l2):
            assert min_eigenvalue(m) >= -1e-10

    def test_constant_clone_normalization(self):
        # The channel that outputs |+>|+> has card-1 error exactly 1/4 and
        # no loss; this pins the operator normalization.
        ops = build_trusted_ops(build_states(0.6))
        sb = squashed_basis()
        j = constant_clone_choi(sb.beta[0], 4)
        assert np.trace(ops.e1 @ j).real == pytest.approx(0.25, abs=1e-12)
        assert np.trace(ops.l1 @ j).real == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("mu", [0.1, 0.5, 1.0])
    def test_swap_symmetric_consistency(self, mu):
        rng = np.random.default_rng(17)
        ops = build_trusted_ops(build_states(mu))
        m = rng.standard_normal((36, 36)) + 1j * rng.standard_normal((36, 36))
        j = hermitize(m @ m.conj().T)
        j_sym = (j + permute_subsystems(j, ops.dims, (1, 0, 2))) / 2
        e1 = np.trace(ops.e1 @ j_sym).real
        e2 = np.trace(ops.e2 @ j_sym).real
        assert e1 == pytest.approx(e2, abs=1e-10 * max(1, abs(e1)))


class TestUntrustedOps:
    def test_trace_bookkeeping(self):
        ops = build_untrusted_ops(build_states(0.8))
        assert np.trace(ops.e1).real == pytest.approx(1.5, abs=1e-12)
        assert np.trace(ops.l1).real == pytest.approx(3.0, abs=1e-12)

    def test_psd(self):
        ops = build_untrusted_ops(build_states(0.4))
        for m in (ops.e1, ops.e2, ops.l1, ops.l2):
            assert min_eigenvalue(m) >= -1e-12

    def test_swap_relation_includes_challenges(self):
        ops = build_untrusted_ops(build_states(0.9))
        swapped = permute_subsystems(ops.e1, ops.dims, (1, 0, 3, 2, 4))
        assert np.max(np.abs(swapped - ops.e2)) <= 1e-14

    def test_answer_table(self):
        ab = answer_basis()
        assert ab.answer_index(0, 0) == 0
        assert ab.answer_index(0, 2) == 1
        assert ab.answer_index(1, 1) == 0
        assert ab.answer_index(1, 3) == 1
        with pytest.raises(ValueError):
            ab.answer_index(0, 1)

    def test_randomized_dimensions(self):
        ops = build_untrusted_ops(build_states(0.5, phase_randomized=True))
        assert ops.dims == (3, 3, 2, 2, 7)
        assert ops.total_dim == 252


class TestChoiIdentity:
    def test_identity_channel(self):
        ket0 = np.array([1, 0], dtype=complex)
        lhs, rhs = choi_identity_check([np.eye(2)], ket0, ket0)
        assert lhs == pytest.approx(1.0, abs=1e-14)
        assert rhs == pytest.approx(1.0, abs=1e-14)

    def test_depolarizing_channel(self):
        rng = np.random.default_rng(23)
        paulis = [np.eye(2), np.array([[0, 1], [1, 0]]),
                  np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
        kraus = [p / 2 for p in paulis]
        psi1 = random_unit(rng, 2)
        psi3 = random_unit(rng, 2)
        lhs, rhs = choi_identity_check(kraus, psi1, psi3)
        assert lhs == pytest.approx(0.5, abs=1e-12)
        assert rhs == pytest.approx(0.5, abs=1e-12)

    def test_random_channels_dual_path(self):
        rng = np.random.default_rng(29)
        for _ in range(50):
            d_in = int(rng.integers(2, 5))
            d_out = int(rng.integers(2, 5))
            kraus = random_channel(rng, d_in, d_out, int(rng.integers(1, 4)))
            lhs, rhs = choi_identity_check(kraus, random_unit(rng, d_in),
                                           random_unit(rng, d_out))
            assert abs(lhs - rhs) <= 1e-12

    def test_non_trace_preserving_rejected(self):
        with pytest.raises(ContractViolationError):
            choi_identity_check([np.eye(2) * 0.5],
                                np.array([1, 0]), np.array([1, 0]))

    def test_non_unit_vector_rejected(self):
        with pytest.raises(ValueError):
            choi_identity_check([np.eye(2)], np.array([1, 1]),
                                np.array([1, 0]))


class TestProjectorP:
    def test_single_element(self):
        q = np.diag([1.0, 0.0]).astype(complex)
        assert np.array_equal(projector_P(1, 1, [q]), q)

    def test_binomial_completeness(self):
        rng = np.random.default_rng(31)
        projs = []
        for _ in range(3):
            v = random_unit(rng, 2)
            projs.append(np.outer(v, v.conj()))
        total = sum(projector_P(3, j, projs) for j in range(4))
        assert np.max(np.abs(total - np.eye(8))) <= 1e-13

    def test_n2_against_string_enumeration(self):
        rng = np.random.default_rng(37)
        c = []
        for _ in range(2):
            v = random_unit(rng, 2)
            c.append(np.outer(v, v.conj()))
        eye = np.eye(2)
        want = {
            0: kron(eye - c[0], eye - c[1]),
            1: kron(c[0], eye - c[1]) + kron(eye - c[0], c[1]),
            2: kron(c[0], c[1]),
        }
        for j, w in want.items():
            assert np.max(np.abs(projector_P(2, j, c) - w)) <= 1e-13

    def test_domain_errors(self):
        q = np.eye(2, dtype=complex)
        with pytest.raises(ValueError):
            projector_P(2, 3, [q, q])
        with pytest.raises(ValueError):
            projector_P(2, -1, [q, q])


class TestNStateOps:
    def test_n1_reduces_to_single_state_builders(self):
        fam = build_states(0.7)
        single = build_trusted_ops(fam)
        reduced = build_n_state_ops(fam, 1, "trusted")
        assert np.max(np.abs(single.e1 - reduced.e1)) <= 1e-14
        assert np.max(np.abs(single.l1 - reduced.l1)) <= 1e-14

    def test_n2_loss_trace_two_ways(self):
        fam = build_states(0.5)
        ops = build_n_state_ops(fam, 2, "trusted")
        got = np.trace(ops.l1).real
        # String-enumeration oracle: sum over strings s with j ones of
        # (j/2) tr(P_s) tr(1_9) tr(mint^(x)2)/16, mint traces are 1.
        sb = squashed_basis()
        vac = np.outer(sb.vacuum, sb.vacuum.conj())
        eye3 = np.eye(3)
        want = 0.0
        for s in itertools.product([0, 1], repeat=2):
            j = sum(s)
            if j == 0:
                continue
            factors = [vac if si else eye3 - vac for si in s]
            want += (j / 2) * np.trace(kron_all(factors)).real * 9.0
        assert got == pytest.approx(want, abs=1e-12)

    def test_n2_psd_and_swap(self):
        fam = build_states(0.5)
        ops = build_n_state_ops(fam, 2, "trusted")
        assert min_eigenvalue(ops.l1) >= -1e-10
        swapped = permute_subsystems(ops.e1, ops.dims, (1, 0, 2))
        assert np.max(np.abs(swapped - ops.e2)) <= 1e-13

    def test_capacity_errors(self):
        fam_rand = build_states(0.5, phase_randomized=True)
        with pytest.raises(CapacityError):
            build_n_state_ops(fam_rand, 2, "trusted")
        fam = build_states(0.5)
        with pytest.raises(CapacityError):
            build_n_state_ops(fam, 2, "untrusted")

    def test_invalid_inputs(self):
        fam = build_states(0.5)
        with pytest.raises(ValueError):
            build_n_state_ops(fam, 0, "trusted")
        with pytest.raises(ValueError):
            build_n_state_ops(fam, 1, "sideways")


class TestQubitSuccessOperator:
    def test_trusted_trace(self):
        ops = qubit_success_operator("trusted")
        # 4 rank-one triple projectors with weight 1/4.
        assert np.trace(ops.e1).real == pytest.approx(1.0, abs=1e-12)

    def test_untrusted_shape(self):
        ops = qubit_success_operator("untrusted")
        assert ops.dims == (2, 2, 2, 2, 2)
        assert min_eigenvalue(ops.e1) >= -1e-12


class TestChoiMatrix:
    def test_trace_preservation_of_random_channel(self):
        rng = np.random.default_rng(41)
        kraus = random_channel(rng, 3, 2, 2)
        j = choi_matrix(kraus)
        from qmoney.linalg import partial_trace
        tp = partial_trace(j, (2, 3), keep=[1])
        assert np.max(np.abs(tp - np.eye(3))) <= 1e-12

    def test_consistent_with_apply(self):
        rng = np.random.default_rng(43)
        kraus = random_channel(rng, 2, 3, 2)
        j = choi_matrix(kraus)
        rho_vec = random_unit(rng, 2)
        rho = np.outer(rho_vec, rho_vec.conj())
        want = apply_channel(kraus, rho)
        # J4[a, i, b, j] = channel(E_ij)[a, b], so contracting the input
        # indices against rho reassembles the channel output by linearity.
        got = np.einsum("aibj,ij->ab", j.reshape(3, 2, 3, 2), rho)
        assert np.max(np.abs(got - want)) <= 1e-12
