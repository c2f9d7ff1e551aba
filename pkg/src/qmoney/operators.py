"""Error and loss operators for the counterfeiting optimizations.

Every scenario reduces to four positive semidefinite operators
``E1, E2, L1, L2`` acting on (card-1 outcome space) x (card-2 outcome space)
x (mint-side spaces), such that for an adversarial cloning map with Choi
operator J the card-1 error probability is ``Tr(E1 J)`` and the card-1
no-detection probability is ``Tr(L1 J)`` (and symmetrically for card 2).

Scenarios
---------
trusted
    Outcome spaces are the 3-dimensional squashed clone spaces
    {|0>, |1>, |no-click>}.  The error operator projects the measured clone
    onto the qubit orthogonal to the expected one (weight 1/2 for the
    terminal's random basis choice), the loss operator onto the no-click
    flag; the mint side carries the conjugated signal state.

untrusted
    Outcome spaces are 3-dimensional classical answer spaces
    {a0, a1, no-click}; the mint side additionally carries the two challenge
    registers handed to the terminals, so the map input is
    (challenge x challenge x mint).

For phase-randomized families the rank-1 conjugated mint projector is
replaced by the conjugated density matrix; by linearity of the Choi
contraction this computes exactly the mixed-state error/loss probabilities.

The n-repetition generalization weights the projector onto j out of n
"bad" outcomes by j/n, which makes the n-fold operators compute per-state
probabilities (a tensor product of single-state Choi optima then reproduces
the single-state objective value exactly).

The unnormalized Choi convention ``J = sum_ij L(|i><j|) (x) |i><j|`` is used
throughout, for which trace preservation reads ``Tr_out(J) = identity``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (CapacityError, ContractViolationError, hermitize, kron,
                     kron_all)
from .states import StateFamily, qubit_states, squashed_basis

#: Default cap on the realified solver dimension implied by an operator set.
MAX_REALIFIED_DIM = 2600


@dataclass(frozen=True)
class OperatorSet:
    """Error/loss operators with their subsystem dimension breakdown.

    ``dims`` lists the tensor factors in the global order; the first
    ``output_factors`` entries are the adversary's output (clone or answer)
    spaces, the rest the mint-side input spaces.
    """

    e1: np.ndarray
    e2: np.ndarray
    l1: np.ndarray
    l2: np.ndarray
    dims: tuple[int, ...]
    scenario: str
    n: int = 1
    output_factors: int = 2

    @property
    def output_dim(self) -> int:
        return int(np.prod(self.dims[:self.output_factors]))

    @property
    def input_dim(self) -> int:
        return int(np.prod(self.dims[self.output_factors:]))

    @property
    def total_dim(self) -> int:
        return self.output_dim * self.input_dim


@dataclass(frozen=True)
class AnswerBasis:
    """Classical answer/challenge vectors for the untrusted scenario.

    ``answers`` holds the orthonormal answer vectors (a0, a1, no-click) as
    rows; ``challenges`` the two challenge basis vectors.  The correct
    answer to challenge i for signal state k (defined when k = i mod 2) is
    a0 for k == i and a1 for k == i + 2; the wrong answer is the other
    member of {a0, a1}, never the no-click flag.
    """

    answers: np.ndarray
    challenges: np.ndarray

    def answer_index(self, challenge: int, state: int) -> int:
        if state % 2 != challenge % 2:
            raise ValueError(
                f"state {state} does not match challenge {challenge}")
        return 0 if state == challenge else 1


def answer_basis() -> AnswerBasis:
    """Computational answer and challenge bases."""
    return AnswerBasis(answers=np.eye(3, dtype=complex),
                       challenges=np.eye(2, dtype=complex))


def _projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def build_trusted_ops(family: StateFamily) -> OperatorSet:
    """Error/loss operators for two trusted terminals.

    Operators act on clone(3) x clone(3) x mint(4 or 7).  The factor 1/4
    is the uniform state choice and 1/2 the terminal's random measurement
    basis choice; loss projects onto the no-click flag for every state.
    """
    basis = squashed_basis()
    d = family.mint_dim
    dims = (3, 3, d)
    eye3 = np.eye(3, dtype=complex)
    vac = _projector(basis.vacuum)
    e_local = np.zeros((9 * d, 9 * d), dtype=complex)
    l_local = np.zeros_like(e_local)
    for k in range(4):
        wrong = _projector(basis.beta_perp[k]) / 2
        mint = family.conjugate_states[k]
        e_local += kron_all([wrong, eye3, mint]) / 4
        l_local += kron_all([vac, eye3, mint]) / 4
    e2 = _swap_cards(e_local, dims, card1_factors=1)
    l2 = _swap_cards(l_local, dims, card1_factors=1)
    return OperatorSet(e1=hermitize(e_local), e2=hermitize(e2),
                       l1=hermitize(l_local), l2=hermitize(l2),
                       dims=dims, scenario="trusted")


def build_untrusted_ops(family: StateFamily) -> OperatorSet:
    """Error/loss operators for two untrusted terminals.

    Operators act on answer(3) x answer(3) x (challenge(2) x challenge(2)
    x mint).  The error operator for card 1 sums only the two states that
    match card 1's challenge basis; the loss operator sums all four.
    """
    ab = answer_basis()
    d = family.mint_dim
    dims = (3, 3, 2, 2, d)
    eye3 = np.eye(3, dtype=complex)
    vac = _projector(ab.answers[2])
    dim = int(np.prod(dims))
    e_local = np.zeros((dim, dim), dtype=complex)
    l_local = np.zeros_like(e_local)
    for i, j in itertools.product(range(2), repeat=2):
        chal = kron(_projector(ab.challenges[i]), _projector(ab.challenges[j]))
        for k in range(4):
            mint = kron(chal, family.conjugate_states[k])
            l_local += kron_all([vac, eye3, mint]) / 16
            if k % 2 == i:
                wrong = _projector(ab.answers[1 - ab.answer_index(i, k)])
                e_local += kron_all([wrong, eye3, mint]) / 16
    e2 = _swap_cards(e_local, dims, card1_factors=1, swap_challenges=True)
    l2 = _swap_cards(l_local, dims, card1_factors=1, swap_challenges=True)
    return OperatorSet(e1=hermitize(e_local), e2=hermitize(e2),
                       l1=hermitize(l_local), l2=hermitize(l2),
                       dims=dims, scenario="untrusted")


def _swap_cards(op: np.ndarray, dims: tuple[int, ...], card1_factors: int,
                swap_challenges: bool = False) -> np.ndarray:
    """Relabel card 1 <-> card 2 (outcome factors and, if present, challenges)."""
    from .linalg import permute_subsystems
    perm = list(range(len(dims)))
    perm[0], perm[card1_factors] = perm[card1_factors], perm[0]
    if swap_challenges:
        perm[2], perm[3] = perm[3], perm[2]
    return permute_subsystems(op, dims, perm)


def projector_P(n: int, j: int, C: Sequence[np.ndarray]) -> np.ndarray:
    """Sum over length-n binary strings with j ones of the tensor factors
    ``s_i C_i + (1 - s_i)(1 - C_i)``.

    For projector-valued C the results over j = 0..n resolve the identity;
    the formula is applied verbatim also to the non-projector collections
    (PSD with C_i <= 1) used by the n-state error operators.
    """
    n = int(n)
    j = int(j)
    if n < 1 or len(C) != n:
        raise ValueError(f"need n >= 1 matrices, got n={n}, len(C)={len(C)}")
    if j < 0 or j > n:
        raise ValueError(f"need 0 <= j <= n, got j={j}, n={n}")
    mats = [np.asarray(c, dtype=complex) for c in C]
    eyes = [np.eye(m.shape[0], dtype=complex) - m for m in mats]
    dim = int(np.prod([m.shape[0] for m in mats]))
    out = np.zeros((dim, dim), dtype=complex)
    for ones in itertools.combinations(range(n), j):
        factors = [mats[i] if i in ones else eyes[i] for i in range(n)]
        out += kron_all(factors)
    return out


def build_n_state_ops(family: StateFamily, n: int, scenario: str = "trusted",
                      max_realified_dim: int = MAX_REALIFIED_DIM) -> OperatorSet:
    """Error/loss operators for a credit card carrying n states.

    For n == 1 this reduces exactly to the single-state builders.  The
    n-fold operators act on clone(3**n) x clone(3**n) x mint(d**n) and
    carry j/n probability weights on the projector onto j bad outcomes.

    Raises :class:`CapacityError` when the realified solver dimension
    2 * 9**n * d**n (plus challenge registers for the untrusted scenario)
    would exceed ``max_realified_dim``.
    """
    if n < 1:
        raise ValueError(f"repetition count must be >= 1, got {n}")
    if scenario not in ("trusted", "untrusted"):
        raise ValueError(f"unknown scenario {scenario!r}")
    if n == 1:
        return (build_trusted_ops(family) if scenario == "trusted"
                else build_untrusted_ops(family))
    d = family.mint_dim
    input_per_copy = d if scenario == "trusted" else 4 * d
    total = 2 * (9 ** n) * (input_per_copy ** n)
    if total > max_realified_dim:
        raise CapacityError(
            f"{scenario} n={n} needs realified dimension {total} "
            f"> budget {max_realified_dim}")
    # Only the trusted scenario fits any sensible budget for n >= 2.
    basis = squashed_basis()
    clone_dim = 3 ** n
    mint_dim = d ** n
    dims = (clone_dim, clone_dim, mint_dim)
    eye_clone = np.eye(clone_dim, dtype=complex)
    vac = _projector(basis.vacuum)
    weighted_vac = sum((jj / n) * projector_P(n, jj, [vac] * n)
                       for jj in range(1, n + 1))
    e_local = np.zeros((clone_dim ** 2 * mint_dim,) * 2, dtype=complex)
    l_local = np.zeros_like(e_local)
    for ks in itertools.product(range(4), repeat=n):
        mint = kron_all([family.conjugate_states[k] for k in ks]) / (4 ** n)
        bad = [_projector(basis.beta_perp[k]) / 2 for k in ks]
        weighted_err = sum((jj / n) * projector_P(n, jj, bad)
                           for jj in range(1, n + 1))
        e_local += kron_all([weighted_err, eye_clone, mint])
        l_local += kron_all([weighted_vac, eye_clone, mint])
    e2 = _swap_cards(e_local, dims, card1_factors=1)
    l2 = _swap_cards(l_local, dims, card1_factors=1)
    return OperatorSet(e1=hermitize(e_local), e2=hermitize(e2),
                       l1=hermitize(l_local), l2=hermitize(l2),
                       dims=dims, scenario=scenario, n=n)


def qubit_success_operator(scenario: str) -> OperatorSet:
    """Loss-free qubit operators whose Choi overlap is the probability that
    both counterfeit cards pass verification.

    The qubit figures of merit from the literature count a round as failed
    when either card is rejected, so the baseline solver maximizes
    ``Tr(Q J)`` and reports 1 minus the optimum.  The operator is stored in
    the ``e1`` slot (with ``e2 = e1`` and zero loss operators).

    trusted: both clones are measured in the state's own basis and must
    reproduce it; untrusted: each terminal receives a challenge and must
    return the correct classical bit whenever its challenge matches the
    state's basis (any answer is accepted otherwise).
    """
    qs = qubit_states()
    if scenario == "trusted":
        dims = (2, 2, 2)
        dim = 8
        q = np.zeros((dim, dim), dtype=complex)
        for k in range(4):
            p = _projector(qs[k])
            q += kron_all([p, p, p.conj()]) / 4
    elif scenario == "untrusted":
        dims = (2, 2, 2, 2, 2)
        dim = 32
        eye2 = np.eye(2, dtype=complex)
        chal = np.eye(2, dtype=complex)
        q = np.zeros((dim, dim), dtype=complex)
        for i, j in itertools.product(range(2), repeat=2):
            cc = kron(_projector(chal[i]), _projector(chal[j]))
            for k in range(4):
                a1 = (_projector(eye2[0 if k == i else 1])
                      if k % 2 == i else eye2)
                a2 = (_projector(eye2[0 if k == j else 1])
                      if k % 2 == j else eye2)
                mint = kron(cc, _projector(qs[k]).conj())
                q += kron_all([a1, a2, mint]) / 16
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    zero = np.zeros_like(q)
    return OperatorSet(e1=hermitize(q), e2=hermitize(q), l1=zero, l2=zero,
                       dims=dims, scenario=scenario)


def choi_matrix(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """Unnormalized Choi operator sum_ij L(|i><j|) (x) |i><j|."""
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    if not ops:
        raise ValueError("need at least one Kraus operator")
    d_in = ops[0].shape[1]
    out = None
    for op in ops:
        w = kron(op, np.eye(d_in)) @ _max_entangled(d_in)
        term = np.outer(w, w.conj())
        out = term if out is None else out + term
    return hermitize(out)


def _max_entangled(d: int) -> np.ndarray:
    """Unnormalized maximally entangled vector sum_i |i i>."""
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1.0
    return v


def apply_channel(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Apply the channel with the given Kraus operators to a state."""
    rho = np.asarray(rho, dtype=complex)
    return sum(k @ rho @ k.conj().T for k in kraus)


def choi_identity_check(kraus: Sequence[np.ndarray], psi1: np.ndarray,
                        psi3: np.ndarray) -> tuple[float, float]:
    """Evaluate both sides of the Choi-contraction identity.

    Returns ``(lhs, rhs)`` where lhs applies the channel directly,
    ``<psi3| L(|psi1><psi1|) |psi3>``, and rhs contracts the unnormalized
    Choi matrix with ``|psi3> (x) |conj(psi1)>``.  The two paths share no
    code beyond the Kraus list.
    """
    ops = [np.asarray(k, dtype=complex) for k in kraus]
    d_in = ops[0].shape[1]
    tp_dev = np.max(np.abs(
        sum(k.conj().T @ k for k in ops) - np.eye(d_in)))
    if tp_dev > 1e-10:
        raise ContractViolationError(
            f"channel is not trace preserving (deviation {tp_dev:.3e})")
    v1 = np.asarray(psi1, dtype=complex).ravel()
    v3 = np.asarray(psi3, dtype=complex).ravel()
    for name, v in (("psi1", v1), ("psi3", v3)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ValueError(f"{name} must be a unit vector")
    lhs = float(np.real(v3.conj() @ apply_channel(ops, np.outer(v1, v1.conj()))
                        @ v3))
    j = choi_matrix(ops)
    w = np.kron(v3, v1.conj())
    rhs = float(np.real(w.conj() @ j @ w))
    return lhs, rhs
