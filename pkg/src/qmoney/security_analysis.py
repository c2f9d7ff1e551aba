"""Security optimizations: adversarial loss/error bounds and derived figures.

Two semidefinite programs drive everything.  With error and loss operators
E1, E2, L1, L2 for a scenario and J the Choi operator of the adversary's
cloning map (trace-preserving, completely positive):

minimal adversarial loss at error budget e
    minimize   Tr(L1 J)
    subject to Tr_out(J) = identity,  Tr(E1 J) = e,
               Tr(E1 J) >= Tr(E2 J),  Tr(L1 J) >= Tr(L2 J),  J >= 0

minimal adversarial error at the honest loss budget
    minimize   Tr(E1 J)
    subject to Tr_out(J) = identity,  Tr(E1 J) >= Tr(E2 J),
               Tr(L1 J) <= f_h,  Tr(L2 J) <= f_h,  J >= 0

The honest no-detection fraction is ``f_h = exp(-mu * eta_d * eta_m(t))``
with memory retrieval efficiency ``eta_m(t) = eta_m(0) exp(-t**2/tau**2)``
(identically 1 without a memory).  The protocol is secure at a working
point when the adversary's minimal loss exceeds the honest loss.

Detector efficiency models an honest imperfection only: it enters the
honest loss budget and never the adversary's operators, which assume ideal
devices.

The loss-minimization dual carries the certificate structure used for the
n-repetition argument: with the ordering constraints kept as inequalities,
the reported multipliers map onto the certificate variables as
``d1 = y_err + z_err``, ``d2 = -z_err``, ``d3 = z_loss`` and the matrix D
is rebuilt from the trace-preservation multipliers on the Hermitian basis.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sparse

from . import operators, sdp_solver, states
from .linalg import hermitian_basis, hermitize, kron, max_eigenvalue, \
    min_eigenvalue, partial_trace, permute_subsystems
from .operators import OperatorSet
from .sdp_solver import SdpProblem, SdpSolution, SolverOptions, \
    vectorize_constraints


@dataclass(frozen=True)
class MemoryModel:
    """Decohering quantum memory: initial retrieval efficiency and
    Gaussian dephasing time in microseconds."""

    eta_m0: float
    tau: float

    def __post_init__(self):
        if not 0 < self.eta_m0 <= 1:
            raise ValueError(f"eta_m0 must be in (0, 1], got {self.eta_m0}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class ScenarioConfig:
    """A working point of the protocol.

    ``error_target`` is the error rate e pinned (loss minimization) or
    reported (error minimization); ``n`` the number of states per card.
    """

    scenario: str = "trusted"
    phase_randomized: bool = False
    mu: float = 0.5
    eta_d: float = 1.0
    error_target: float = 0.0
    n: int = 1
    memory: MemoryModel | None = None

    def __post_init__(self):
        if self.scenario not in ("trusted", "untrusted"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if not 0 <= self.error_target <= 0.5:
            raise ValueError(
                f"error target must be in [0, 0.5], got {self.error_target}")
        if not 0 < self.eta_d <= 1:
            raise ValueError(f"eta_d must be in (0, 1], got {self.eta_d}")
        if self.mu < 0:
            raise ValueError(f"mu must be >= 0, got {self.mu}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")


@dataclass
class SecurityReport:
    """One solved working point."""

    scenario: str
    phase_randomized: bool
    mu: float
    eta_d: float
    error_target: float
    f_h: float
    f_d: float | None = None
    e_star: float | None = None
    secure: bool | None = None
    gap: float = math.nan
    status: str = "optimal"
    t_star: float | None = None
    dual_conditions: "DualCertificate | None" = None
    solution: SdpSolution | None = field(default=None, repr=False)


@dataclass(frozen=True)
class DualCertificate:
    """Certificate record for the loss-minimization dual.

    ``valid`` requires: d1, d2 < 0; d3 = 0.5 within 1e-3; off-diagonal
    entries of D below 1e-6; the trace identity
    ``Tr(D) = f_d - (d1 + d2) e`` within 1e-4; the dual matrix inequality
    satisfied within 1e-8; duality gap at most 1e-6.
    """

    d1: float
    d2: float
    d3: float
    D: np.ndarray
    gap: float
    f_d: float
    error_target: float
    lmi_max_eigenvalue: float
    offdiag_max: float
    trace_identity_error: float
    checks: dict[str, bool]
    valid: bool


@dataclass(frozen=True)
class StrategyBreakdown:
    """Case analysis of the explicit untrusted-qubit strategy."""

    equal_branch: float
    unequal_branch: float
    total: float


@dataclass
class ParallelCheck:
    """Feasibility of the tensor-product point for the 2-repetition primal."""

    f_d_single: float
    objective_tensor: float
    trace_preservation_residual: float
    error_pin_residual: float
    error_order_margin: float
    loss_order_margin: float
    min_eigenvalue: float
    full_optimum: float | None = None

    @property
    def max_residual(self) -> float:
        return max(self.trace_preservation_residual,
                   self.error_pin_residual,
                   max(0.0, -self.error_order_margin),
                   max(0.0, -self.loss_order_margin),
                   max(0.0, -self.min_eigenvalue))


def honest_loss(mu: float, eta_d: float = 1.0, t: float = 0.0,
                memory: MemoryModel | None = None) -> float:
    """Honest no-detection fraction exp(-mu * eta_d * eta_m(t))."""
    if t < 0:
        raise ValueError(f"storage time must be >= 0, got {t}")
    if t > 0 and memory is None:
        raise ValueError("a memory model is required for t > 0")
    eta_m = 1.0
    if memory is not None:
        eta_m = memory.eta_m0 * math.exp(-(t / memory.tau) ** 2)
    return math.exp(-mu * eta_d * eta_m)


def build_operator_set(config: ScenarioConfig) -> OperatorSet:
    """Operators for a configured scenario (n-fold when ``config.n > 1``)."""
    family = states.build_states(config.mu, config.phase_randomized)
    if config.n == 1:
        return (operators.build_trusted_ops(family)
                if config.scenario == "trusted"
                else operators.build_untrusted_ops(family))
    return operators.build_n_state_ops(family, config.n, config.scenario)


def _base_problem(ops: OperatorSet) -> list:
    return vectorize_constraints(ops.dims, ops.output_factors)


def _min_loss_problem(ops: OperatorSet, e: float) -> SdpProblem:
    eqs = tuple(_base_problem(ops)) + ((ops.e1, e),)
    ineqs = ((hermitize(ops.e1 - ops.e2), 0.0, ">="),
             (hermitize(ops.l1 - ops.l2), 0.0, ">="))
    return SdpProblem(objective=ops.l1, equalities=eqs, inequalities=ineqs,
                      variable_dim=ops.total_dim, sense="min",
                      output_dim=ops.output_dim)


def _min_error_problem(ops: OperatorSet, loss_budget: float) -> SdpProblem:
    eqs = tuple(_base_problem(ops))
    ineqs = ((hermitize(ops.e1 - ops.e2), 0.0, ">="),
             (ops.l1, loss_budget, "<="),
             (ops.l2, loss_budget, "<="))
    return SdpProblem(objective=ops.e1, equalities=eqs, inequalities=ineqs,
                      variable_dim=ops.total_dim, sense="min",
                      output_dim=ops.output_dim)


#: Smallest error pin used by the loss minimization.  At exactly zero
#: tolerated error the primal loses its interior (the pinned equality has
#: no strictly feasible point) and the loss curve runs nearly tangent to
#: the honest loss, so zero targets are pinned here instead; the induced
#: shift in the optimum is below plotting resolution.
ERROR_PIN_FLOOR = 1e-6


def min_loss_sdp(config: ScenarioConfig,
                 options: SolverOptions | None = None,
                 keep_solution: bool = True,
                 error_pin_floor: float = ERROR_PIN_FLOOR) -> SecurityReport:
    """Minimal loss the adversary must declare to hit the error target."""
    ops = build_operator_set(config)
    problem = _min_loss_problem(ops, max(config.error_target, error_pin_floor))
    sol = sdp_solver.solve(problem, options)
    f_h = honest_loss(config.mu, config.eta_d, 0.0, config.memory)
    f_d = min(max(sol.primal_value, 0.0), 1.0)
    return SecurityReport(
        scenario=config.scenario, phase_randomized=config.phase_randomized,
        mu=config.mu, eta_d=config.eta_d, error_target=config.error_target,
        f_h=f_h, f_d=f_d, secure=bool(f_d > f_h), gap=sol.gap,
        status=sol.status, solution=sol if keep_solution else None)


def min_error_sdp(config: ScenarioConfig,
                  options: SolverOptions | None = None,
                  keep_solution: bool = True) -> SecurityReport:
    """Minimal error rate achievable within the honest loss budget."""
    ops = build_operator_set(config)
    f_h = honest_loss(config.mu, config.eta_d, 0.0, config.memory)
    problem = _min_error_problem(ops, f_h)
    sol = sdp_solver.solve(problem, options)
    e_star = min(max(sol.primal_value, 0.0), 1.0)
    return SecurityReport(
        scenario=config.scenario, phase_randomized=config.phase_randomized,
        mu=config.mu, eta_d=config.eta_d, error_target=config.error_target,
        f_h=f_h, e_star=e_star, gap=sol.gap, status=sol.status,
        solution=sol if keep_solution else None)


def qubit_baseline(scenario: str,
                   options: SolverOptions | None = None) -> float:
    """Minimal adversarial error for the loss-free qubit protocol.

    Both baselines maximize the probability that both counterfeit cards
    pass verification and return one minus the optimum (a round fails when
    either card is rejected).

    trusted
        Verification measures each clone in the state's own basis; the
        optimum ranges over all cloning channels.

    untrusted
        The terminals answer classical challenges.  Their measurement
        devices are the protocol's basis measurements (the terminal may
        pick either basis and postprocess or fabricate answers freely, but
        cannot measure outside the two bases); the optimum ranges over
        channels that act on the money qubit through one of the two basis
        dephasings.  Without that device restriction an intermediate-basis
        measurement answers both challenges at once and beats the quoted
        bound, so the restriction is what the closed-form strategy's
        optimality statement presumes.
    """
    ops = operators.qubit_success_operator(scenario)
    if scenario == "trusted":
        eqs = tuple(vectorize_constraints(ops.dims, ops.output_factors))
        problem = SdpProblem(objective=ops.e1, equalities=eqs,
                             variable_dim=ops.total_dim, sense="max",
                             output_dim=ops.output_dim)
        sol = sdp_solver.solve(problem, options)
        return 1.0 - sol.primal_value

    # Untrusted: block variable diag(J_x, J_y); J_b carries the part of the
    # strategy that measures the money qubit in basis b.
    dim = ops.total_dim  # 32: answers(2x2) x challenges(2x2) x mint(2)
    objective = np.zeros((2 * dim, 2 * dim), dtype=complex)
    objective[:dim, :dim] = ops.e1
    objective[dim:, dim:] = ops.e1
    # Trace preservation of the block sum: identity(2 blocks x 4 answers)
    # tensor a basis element of the 8-dim input.
    eqs = list(vectorize_constraints((8, 8), output_factors=1))
    qs = states.qubit_states()
    rest = hermitian_basis(16)  # answers x challenges
    for blk, (u, v) in ((0, (qs[0], qs[2])), (1, (qs[1], qs[3]))):
        raw = np.outer(u, v.conj())
        for t in ((raw + raw.conj().T) / np.sqrt(2),
                  (-1j * raw + 1j * raw.conj().T) / np.sqrt(2)):
            for f in rest:
                op = np.zeros((2 * dim, 2 * dim), dtype=complex)
                op[blk * dim:(blk + 1) * dim, blk * dim:(blk + 1) * dim] = \
                    np.kron(f, t)
                eqs.append((sparse.csr_matrix(hermitize(op)), 0.0))
    problem = SdpProblem(objective=hermitize(objective),
                         equalities=tuple(eqs), variable_dim=2 * dim,
                         sense="max", output_dim=8)
    sol = sdp_solver.solve(problem, options)
    return 1.0 - sol.primal_value


def strategy_untrusted_qubit() -> StrategyBreakdown:
    """Success probability of the explicit untrusted-terminal strategy.

    Equal challenges: answer honestly and duplicate (success 1).  Unequal
    challenges: measure in a random basis, answer that challenge honestly
    and the other randomly; the right basis guess succeeds always, the
    wrong one half the time.
    """
    equal = 1.0
    unequal = 0.5 * 1.0 + 0.5 * 0.5
    total = 0.5 * equal + 0.5 * unequal
    return StrategyBreakdown(equal_branch=equal, unequal_branch=unequal,
                             total=total)


def dual_certificate(config: ScenarioConfig,
                     solution: SdpSolution) -> DualCertificate:
    """Extract and check the dual certificate of a loss-minimization solve.

    Never raises on a failed condition; the returned record carries the
    per-condition outcomes and an overall ``valid`` flag.
    """
    ops = build_operator_set(config)
    d_in = ops.input_dim
    n_tp = d_in * d_in
    y_tp = solution.dual_equality[:n_tp]
    y_err = float(solution.dual_equality[n_tp])
    z_err = float(solution.dual_inequality[0])
    z_loss = float(solution.dual_inequality[1])
    d1 = y_err + z_err
    d2 = -z_err
    d3 = z_loss
    basis = hermitian_basis(d_in)
    dmat = sum(float(yi) * b for yi, b in zip(y_tp, basis))
    dmat = hermitize(dmat)

    f_d = solution.primal_value
    e = max(config.error_target, ERROR_PIN_FLOOR)
    offdiag = dmat - np.diag(np.diag(dmat))
    offdiag_max = float(np.max(np.abs(offdiag)))
    trace_err = abs(float(np.trace(dmat).real) - (f_d - (d1 + d2) * e))
    eye_out = np.eye(ops.output_dim, dtype=complex)
    lmi = (d1 * ops.e1 + d2 * ops.e2 + d3 * (ops.l1 - ops.l2)
           + kron(eye_out, dmat) - ops.l1)
    lmi_max = max_eigenvalue(hermitize(lmi))

    checks = {
        "d1_negative": d1 < 0,
        "d2_negative": d2 < 0,
        "d3_half": abs(d3 - 0.5) <= 1e-3,
        "offdiagonal_d": offdiag_max <= 1e-6,
        "trace_identity": trace_err <= 1e-4,
        "lmi": lmi_max <= 1e-8,
        "gap": solution.gap <= 1e-6,
    }
    return DualCertificate(
        d1=d1, d2=d2, d3=d3, D=dmat, gap=solution.gap, f_d=f_d,
        error_target=e, lmi_max_eigenvalue=lmi_max, offdiag_max=offdiag_max,
        trace_identity_error=trace_err, checks=checks,
        valid=all(checks.values()))


def tensor_parallel_check(config: ScenarioConfig,
                          solve_full: bool = False,
                          options: SolverOptions | None = None
                          ) -> ParallelCheck:
    """Check that the tensor square of the 1-state optimum is feasible for
    the 2-repetition primal with the same objective value.

    With ``solve_full`` the 2-repetition problem is solved outright and its
    optimum compared; that path takes minutes.
    """
    if config.n != 2:
        raise ValueError("the parallel-repetition check is defined for n=2")
    if config.phase_randomized or config.scenario != "trusted":
        raise ValueError("the n=2 check runs on the trusted pure scenario")
    single = replace(config, n=1)
    rep = min_loss_sdp(single, options)
    j1 = rep.solution.x
    d = 4
    dims1 = (3, 3, d)
    # Interleave the two copies: (c1 c2 m) x (c1' c2' m') -> (c1 c1' c2 c2' m m')
    j2 = permute_subsystems(kron(j1, j1), dims1 + dims1, (0, 3, 1, 4, 2, 5))
    family = states.build_states(config.mu, False)
    ops2 = operators.build_n_state_ops(family, 2, "trusted")
    tp = partial_trace(j2, (ops2.output_dim, ops2.input_dim), keep=[1])
    tp_res = float(np.max(np.abs(tp - np.eye(ops2.input_dim))))
    e_pin = max(config.error_target, ERROR_PIN_FLOOR)
    e_val = float(np.einsum("ij,ji->", ops2.e1, j2).real)
    e2_val = float(np.einsum("ij,ji->", ops2.e2, j2).real)
    l_val = float(np.einsum("ij,ji->", ops2.l1, j2).real)
    l2_val = float(np.einsum("ij,ji->", ops2.l2, j2).real)
    check = ParallelCheck(
        f_d_single=rep.f_d,
        objective_tensor=l_val,
        trace_preservation_residual=tp_res,
        error_pin_residual=abs(e_val - e_pin),
        error_order_margin=e_val - e2_val,
        loss_order_margin=l_val - l2_val,
        min_eigenvalue=min_eigenvalue(hermitize(j2)),
    )
    if solve_full:
        problem = _min_loss_problem(ops2, e_pin)
        sol = sdp_solver.solve(problem, options)
        check.full_optimum = sol.primal_value
    return check


def secure_lifetime(config: ScenarioConfig,
                    options: SolverOptions | None = None,
                    resolution: float = 1e-3) -> float:
    """Largest storage time (microseconds) with f_h(t) still below f_d.

    The adversary attacks at t = 0 (transferring into an ideal memory), so
    f_d is time independent; the honest loss grows monotonically to 1 as
    the memory dephases, which makes bisection exact.  Returns 0.0 when the
    working point is already insecure at t = 0.
    """
    if config.memory is None:
        raise ValueError("secure_lifetime needs a memory model")
    rep = min_loss_sdp(config, options, keep_solution=False)
    f_d = rep.f_d
    if honest_loss(config.mu, config.eta_d, 0.0, config.memory) >= f_d:
        return 0.0
    lo, hi = 0.0, config.memory.tau
    while (honest_loss(config.mu, config.eta_d, hi, config.memory) < f_d
           and hi < 1e6):
        lo, hi = hi, hi * 2
    while hi - lo > resolution:
        mid = (lo + hi) / 2
        if honest_loss(config.mu, config.eta_d, mid, config.memory) < f_d:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _sweep_point(args) -> SecurityReport:
    config, compute_error, options = args
    try:
        if compute_error:
            return min_error_sdp(config, options, keep_solution=False)
        return min_loss_sdp(config, options, keep_solution=False)
    except Exception as exc:  # per-point failures must not kill the sweep
        return SecurityReport(
            scenario=config.scenario,
            phase_randomized=config.phase_randomized, mu=config.mu,
            eta_d=config.eta_d, error_target=config.error_target,
            f_h=honest_loss(config.mu, config.eta_d, 0.0, config.memory),
            status=f"failed: {exc}")


def sweep(mus, errors, eta_ds, scenarios,
          compute_error: bool = False, workers: int = 1,
          options: SolverOptions | None = None) -> list[SecurityReport]:
    """Solve a grid of working points; one report per point, in grid order.

    ``scenarios`` is an iterable of (scenario, phase_randomized) pairs.
    Points are independent; failures are recorded in the report status and
    the sweep continues.
    """
    configs = [
        (ScenarioConfig(scenario=sc, phase_randomized=pr, mu=float(mu),
                        eta_d=float(eta), error_target=float(e)),
         compute_error, options)
        for sc, pr in scenarios
        for mu in mus for e in errors for eta in eta_ds
    ]
    if workers > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, configs))
    return [_sweep_point(c) for c in configs]


#: Table layout of the error-minimization survey: phase randomization,
#: detector efficiency, and the five mean photon numbers per block.
TABLE3_BLOCKS = (
    (False, 1.0, (0.05, 0.10, 0.15, 0.25, 0.55)),
    (True, 1.0, (0.50, 0.75, 1.00, 1.25, 1.50)),
    (True, 0.8, (0.40, 0.60, 0.80, 1.00, 1.20)),
)


@dataclass(frozen=True)
class Table3Row:
    """One survey row: minimal error for both scenarios at a working point."""

    phase_randomized: bool
    eta_d: float
    mu: float
    e_trusted: float
    e_untrusted: float
    f_h: float
    gap_trusted: float
    gap_untrusted: float


def table3_row(phase_randomized: bool, eta_d: float, mu: float,
               options: SolverOptions | None = None) -> Table3Row:
    reports = {}
    for scenario in ("trusted", "untrusted"):
        cfg = ScenarioConfig(scenario=scenario,
                             phase_randomized=phase_randomized,
                             mu=mu, eta_d=eta_d)
        reports[scenario] = min_error_sdp(cfg, options, keep_solution=False)
    return Table3Row(
        phase_randomized=phase_randomized, eta_d=eta_d, mu=mu,
        e_trusted=reports["trusted"].e_star,
        e_untrusted=reports["untrusted"].e_star,
        f_h=honest_loss(mu, eta_d),
        gap_trusted=reports["trusted"].gap,
        gap_untrusted=reports["untrusted"].gap)


def table3_rows(options: SolverOptions | None = None,
                workers: int = 1) -> list[Table3Row]:
    """All fifteen survey rows, in table order."""
    points = [(pr, eta, mu) for pr, eta, mus in TABLE3_BLOCKS for mu in mus]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_table3_point, [(p, options) for p in points]))
    return [table3_row(*p, options=options) for p in points]


def _table3_point(args) -> Table3Row:
    (pr, eta, mu), options = args
    return table3_row(pr, eta, mu, options)
