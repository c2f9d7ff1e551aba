"""Security numerics for coherent-state quantum money with classical
verification: state families, error/loss operators, a dense interior-point
SDP solver, secure-region and lifetime analyses, and an honest-protocol
Monte Carlo."""

from .linalg import (CapacityError, ContractViolationError, DimensionError,
                     kron, min_eigenvalue, partial_trace, realify)
from .operators import (AnswerBasis, OperatorSet, build_n_state_ops,
                        build_trusted_ops, build_untrusted_ops,
                        choi_identity_check, projector_P)
from .protocol_sim import (CardInstance, ChallengeTranscript, bank_verify,
                           issue_card, measure_honest)
from .sdp_solver import (SdpProblem, SdpSolution, SolverOptions, solve,
                         vectorize_constraints)
from .security_analysis import (DualCertificate, MemoryModel, ScenarioConfig,
                                SecurityReport, dual_certificate,
                                honest_loss, min_error_sdp, min_loss_sdp,
                                qubit_baseline, secure_lifetime,
                                strategy_untrusted_qubit, sweep, table3_rows,
                                tensor_parallel_check)
from .states import (SquashedBasis, StateFamily, basis_coefficients,
                     build_states, coherent_overlap, conjugate_family,
                     squashed_basis)

__version__ = "0.1.0"
