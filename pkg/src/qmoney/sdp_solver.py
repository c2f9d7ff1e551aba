"""Self-contained dense primal-dual interior-point solver for small SDPs.

Solves problems with one PSD matrix variable, trace equality constraints
and scalar trace inequalities::

    min/max  Tr(C X)
    s.t.     Tr(A_i X)  = b_i
             Tr(G_j X) <=/>= h_j
             X >= 0  (complex Hermitian)

Method
------
Complex Hermitian data is realified into real symmetric form (doubling the
dimension; objective and constraint values double and are corrected on
report).  Inequalities become equalities with nonnegative scalar slacks
appended as extra diagonal entries of the cone variable.  The core is an
infeasible-start primal-dual path-following iteration with Nesterov-Todd
scaling and a Mehrotra predictor-corrector step, step lengths capped at a
fixed fraction (default 0.98) of the distance to the cone boundary.

At every iteration the scaling point is computed from a Cholesky factor of
X and an eigendecomposition of ``L^T S L``; both primal and dual variables
map to the same positive diagonal in the scaled frame, where the corrector
equation is a diagonal Lyapunov solve.  The Newton system is reduced to a
dense Schur complement in the constraint multipliers.

Constraint families of the form ``identity (x) B`` (the trace-preservation
family emitted by :func:`vectorize_constraints`) are detected and their
Schur block is assembled through a tensor contraction that never forms the
constraint matrices densely; this is what keeps the larger scenario solves
(a few hundred constraints on matrices of dimension several hundred) fast.

The primal optimum of the realified problem is averaged with its symplectic
conjugate before mapping back to a complex Hermitian matrix; the averaging
preserves objective and feasibility and restores the realified block
structure.

Each solve is single-threaded, deterministic given identical inputs, and
shares no mutable state, so independent solves may run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import linalg
from .linalg import (ContractViolationError, DimensionError, hermitian_basis,
                     realify, symplectic_average, complex_from_real)


@dataclass(frozen=True)
class SdpProblem:
    """Standard-form conic problem over one Hermitian PSD variable.

    Attributes
    ----------
    objective : ndarray
        Hermitian cost matrix C.
    equalities : sequence of (matrix, float)
        Trace equalities ``Tr(A_i X) = b_i``; matrices may be dense arrays
        or scipy sparse.
    inequalities : sequence of (matrix, float, str)
        Trace inequalities with sense ``"<="`` or ``">="``.
    variable_dim : int
        Dimension of X.
    sense : str
        ``"min"`` or ``"max"``.
    output_dim : int or None
        Optional structure hint: when X acts on output (x) input and the
        equality list contains the trace-preservation family
        ``identity(output) (x) B``, pass the output dimension so the solver
        can route those rows through the fast Schur path.
    """

    objective: np.ndarray
    equalities: tuple = ()
    inequalities: tuple = ()
    variable_dim: int = 0
    sense: str = "min"
    output_dim: int | None = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        d = int(self.variable_dim)
        if d < 1:
            raise DimensionError(f"variable_dim must be >= 1, got {d}")
        c = linalg.require_hermitian(self.objective, "objective")
        if c.shape[0] != d:
            raise DimensionError(
                f"objective has dimension {c.shape[0]}, expected {d}")
        for a, _ in self.equalities:
            _check_constraint(a, d, "equality")
        for g, _, sense in self.inequalities:
            if sense not in ("<=", ">="):
                raise ValueError(f"inequality sense must be '<=' or '>=', "
                                 f"got {sense!r}")
            _check_constraint(g, d, "inequality")
        if self.output_dim is not None and d % int(self.output_dim):
            raise DimensionError(
                f"output_dim {self.output_dim} does not divide {d}")


def _check_constraint(a, d: int, kind: str) -> None:
    if sp.issparse(a):
        if a.shape != (d, d):
            raise DimensionError(f"{kind} matrix has shape {a.shape}, "
                                 f"expected {(d, d)}")
        dev = abs(a - a.conj().T)
        if dev.nnz and dev.max() > linalg.HERMITIAN_ATOL:
            raise ContractViolationError(f"{kind} matrix is not Hermitian")
    else:
        m = linalg.require_hermitian(a, f"{kind} matrix")
        if m.shape[0] != d:
            raise DimensionError(f"{kind} matrix has dimension {m.shape[0]}, "
                                 f"expected {d}")


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and limits for :func:`solve`."""

    gap_tol: float = 1e-7
    feas_tol: float = 1e-8
    max_iterations: int = 200
    step_fraction: float = 0.98
    log: Callable[["IterationRecord"], None] | None = None


@dataclass(frozen=True)
class IterationRecord:
    """One line of the optional iteration-log stream."""

    iteration: int
    primal_value: float
    dual_value: float
    gap: float
    primal_residual: float
    dual_residual: float
    mu: float
    step_primal: float
    step_dual: float


@dataclass
class SdpSolution:
    """Primal/dual answer with gap diagnostics.

    ``status`` is one of ``optimal``, ``max_iterations``, ``infeasible``,
    ``numerical_failure``.  ``gap`` is the relative primal-dual objective
    gap ``|p - d| / (1 + |p| + |d|)``.
    """

    x: np.ndarray
    dual_equality: np.ndarray
    dual_inequality: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    status: str
    iterations: int
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    slacks: np.ndarray = field(default_factory=lambda: np.zeros(0))


def vectorize_constraints(dims: Sequence[int], output_factors: int = 2
                          ) -> list[tuple[sp.csr_matrix, float]]:
    """Equality family encoding ``Tr_out(X) = identity`` on the input factors.

    Returns one sparse Hermitian constraint ``identity(d_out) (x) B`` per
    element B of the orthonormal Hermitian basis of the input space, with
    right-hand side ``Tr(B)``; ``d_in ** 2`` real constraints in total.
    """
    dims = tuple(int(d) for d in dims)
    if not 0 < output_factors < len(dims):
        raise DimensionError(
            f"output_factors must split {dims} into two nonempty groups")
    d_out = int(np.prod(dims[:output_factors]))
    d_in = int(np.prod(dims[output_factors:]))
    eye = sp.identity(d_out, dtype=complex, format="csr")
    out = []
    for b in hermitian_basis(d_in):
        a = sp.kron(eye, sp.csr_matrix(b), format="csr")
        out.append((a, float(np.trace(b).real)))
    return out


# ---------------------------------------------------------------------------
# internal realified representation


class _Rows:
    """Realified constraint rows of the internal standard-form problem."""

    def __init__(self, n_total: int):
        self.n = n_total
        self.count = 0
        # triplets of all sparse rows, concatenated, with reduceat offsets
        self.sp_rows: list[np.ndarray] = []
        self.sp_cols: list[np.ndarray] = []
        self.sp_vals: list[np.ndarray] = []
        self.sp_index: list[int] = []
        self.dense: list[tuple[int, np.ndarray]] = []
        self.structured: list[tuple[int, sp.coo_matrix]] = []
        self.rhs: list[float] = []

    def add_sparse(self, rows, cols, vals, b: float,
                   structured_b: sp.coo_matrix | None = None) -> None:
        idx = self.count
        self.sp_rows.append(np.asarray(rows, dtype=np.intp))
        self.sp_cols.append(np.asarray(cols, dtype=np.intp))
        self.sp_vals.append(np.asarray(vals, dtype=float))
        self.sp_index.append(idx)
        if structured_b is not None:
            self.structured.append((idx, structured_b))
        self.rhs.append(b)
        self.count += 1

    def add_dense(self, mat: np.ndarray, b: float) -> None:
        self.dense.append((self.count, mat))
        self.rhs.append(b)
        self.count += 1

    def finalize(self):
        self.b = np.asarray(self.rhs, dtype=float)
        if self.sp_rows:
            counts = [len(r) for r in self.sp_rows]
            self.flat_rows = np.concatenate(self.sp_rows)
            self.flat_cols = np.concatenate(self.sp_cols)
            self.flat_vals = np.concatenate(self.sp_vals)
            self.offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
            self.counts = np.asarray(counts, dtype=np.intp)
            self.sp_idx = np.asarray(self.sp_index, dtype=np.intp)
        else:
            self.flat_rows = np.zeros(0, dtype=np.intp)
            self.flat_cols = np.zeros(0, dtype=np.intp)
            self.flat_vals = np.zeros(0, dtype=float)
            self.offsets = np.zeros(0, dtype=np.intp)
            self.counts = np.zeros(0, dtype=np.intp)
            self.sp_idx = np.zeros(0, dtype=np.intp)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Vector of Tr(A_i x) for every row."""
        out = np.zeros(self.count)
        if self.sp_idx.size:
            prod = self.flat_vals * x[self.flat_rows, self.flat_cols]
            out[self.sp_idx] = np.add.reduceat(prod, self.offsets)
        for idx, mat in self.dense:
            out[idx] = float(np.einsum("ij,ij->", mat, x))
        return out

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Matrix sum_i y_i A_i."""
        out = np.zeros((self.n, self.n))
        if self.sp_idx.size:
            weights = np.repeat(y[self.sp_idx], self.counts)
            np.add.at(out, (self.flat_rows, self.flat_cols),
                      weights * self.flat_vals)
        for idx, mat in self.dense:
            out += y[idx] * mat
        return out


def _realify_sparse(a: sp.spmatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Triplets of [[Re a, -Im a], [Im a, Re a]] with zeros dropped."""
    coo = sp.coo_matrix(a)
    d = coo.shape[0]
    rows, cols, vals = [], [], []
    re, im = coo.data.real, coo.data.imag
    mask_re = re != 0
    if mask_re.any():
        r, c, v = coo.row[mask_re], coo.col[mask_re], re[mask_re]
        rows += [r, r + d]
        cols += [c, c + d]
        vals += [v, v]
    mask_im = im != 0
    if mask_im.any():
        r, c, v = coo.row[mask_im], coo.col[mask_im], im[mask_im]
        rows += [r, r + d]
        cols += [c + d, c]
        vals += [-v, v]
    if rows:
        return (np.concatenate(rows), np.concatenate(cols),
                np.concatenate(vals))
    return (np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp),
            np.zeros(0))


def _detect_kron_identity(a: sp.spmatrix, d_out: int, d_in: int
                          ) -> sp.coo_matrix | None:
    """Return B when ``a == identity(d_out) (x) B``, else None."""
    coo = sp.coo_matrix(a)
    coo.sum_duplicates()
    if coo.nnz == 0 or coo.nnz % d_out:
        return None
    br, bc = coo.row // d_in, coo.col // d_in
    if np.any(br != bc):
        return None
    wr, wc = coo.row % d_in, coo.col % d_in
    order = np.lexsort((br, wc, wr))
    wr, wc, br, vals = wr[order], wc[order], br[order], coo.data[order]
    per = coo.nnz // d_out
    wr = wr.reshape(per, d_out)
    wc = wc.reshape(per, d_out)
    br = br.reshape(per, d_out)
    vals = vals.reshape(per, d_out)
    scale = max(1.0, float(np.abs(vals).max()))
    if (np.any(wr != wr[:, :1]) or np.any(wc != wc[:, :1])
            or np.any(br != np.arange(d_out))
            or np.any(np.abs(vals - vals[:, :1]) > 1e-13 * scale)):
        return None
    return sp.coo_matrix((vals[:, 0], (wr[:, 0], wc[:, 0])),
                         shape=(d_in, d_in))


def _structured_cmat(blocks: list[sp.coo_matrix], d_in: int) -> sp.csr_matrix:
    """Stack vec(realify(B_i)) as rows of a sparse matrix."""
    td = 2 * d_in
    data, rows, cols = [], [], []
    for i, b in enumerate(blocks):
        r, c, v = _realify_sparse(b)
        rows.append(np.full(r.size, i, dtype=np.intp))
        cols.append(r * td + c)
        data.append(v)
    return sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(blocks), td * td))


def _structured_schur(w_main: np.ndarray, cmat: sp.csr_matrix, d_out: int,
                      d_in: int) -> np.ndarray:
    """Schur block Tr(A_i W A_j W) for rows A = identity(d_out) (x) B.

    Contracts the output-space indices of W once, leaving a
    (2 d_in)**2 x (2 d_in)**2 kernel that is then sampled by the sparse
    realified B vectors.
    """
    td = 2 * d_in
    w8 = w_main.reshape(2, d_out, d_in, 2, d_out, d_in)
    v1 = np.ascontiguousarray(w8.transpose(0, 2, 3, 5, 1, 4)
                              ).reshape(td * td, d_out * d_out)
    v2 = np.ascontiguousarray(w8.transpose(4, 1, 0, 2, 3, 5)
                              ).reshape(d_out * d_out, td * td)
    kernel = v1 @ v2  # indexed [(uy, uz), (uw, ux)]
    kernel = np.ascontiguousarray(
        kernel.reshape(td, td, td, td).transpose(3, 0, 1, 2)
    ).reshape(td * td, td * td)
    m = cmat @ kernel @ cmat.T
    m = np.asarray(m)
    return (m + m.T) / 2


def _max_step(scaled_dir: np.ndarray, lam: np.ndarray) -> float:
    """Largest step keeping diag(lam) + alpha * scaled_dir PSD."""
    inv_sqrt = 1.0 / np.sqrt(lam)
    q = scaled_dir * np.outer(inv_sqrt, inv_sqrt)
    lo = float(np.linalg.eigvalsh((q + q.T) / 2)[0])
    if lo >= -1e-16:
        return np.inf
    return 1.0 / (-lo)


def solve(problem: SdpProblem, options: SolverOptions | None = None
          ) -> SdpSolution:
    """Solve an :class:`SdpProblem`; see the module docstring for the method."""
    opts = options or SolverOptions()
    d = problem.variable_dim
    n_ineq = len(problem.inequalities)
    n_eq = len(problem.equalities)
    if n_eq + n_ineq == 0:
        raise ValueError("a well-posed problem needs at least one constraint")
    n = 2 * d + n_ineq

    sign = 1.0 if problem.sense == "min" else -1.0
    c_complex = linalg.hermitize(np.asarray(problem.objective, dtype=complex))
    # Normalize badly scaled objectives; values are rescaled on report.
    c_scale = 1.0
    if float(np.linalg.norm(c_complex)) > 1e3:
        c_scale = float(np.linalg.norm(c_complex, 2))
    cmat = np.zeros((n, n))
    cmat[:2 * d, :2 * d] = realify(sign * c_complex / c_scale)

    d_out = problem.output_dim
    d_in = d // d_out if d_out else 0

    rows = _Rows(n)
    structured_blocks: list[sp.coo_matrix] = []
    b_complex = []
    for a, b in problem.equalities:
        b_complex.append(b)
        a_sp = a if sp.issparse(a) else sp.csr_matrix(np.asarray(a, dtype=complex))
        block = (_detect_kron_identity(a_sp, d_out, d_in)
                 if d_out and d_out > 1 else None)
        rr, cc, vv = _realify_sparse(a_sp)
        if block is not None:
            structured_blocks.append(block)
            rows.add_sparse(rr, cc, vv, 2 * b, structured_b=block)
        elif rr.size <= max(64, 4 * d):
            rows.add_sparse(rr, cc, vv, 2 * b)
        else:
            mat = np.zeros((n, n))
            mat[:2 * d, :2 * d] = realify(a_sp.toarray())
            rows.add_dense(mat, 2 * b)
    for j, (g, h, sense_j) in enumerate(problem.inequalities):
        b_complex.append(h)
        g_arr = g.toarray() if sp.issparse(g) else np.asarray(g, dtype=complex)
        mat = np.zeros((n, n))
        mat[:2 * d, :2 * d] = realify(g_arr)
        mat[2 * d + j, 2 * d + j] = 2.0 if sense_j == "<=" else -2.0
        rows.add_dense(mat, 2 * h)
    rows.finalize()
    m = rows.count

    structured_idx = np.asarray([i for i, _ in rows.structured], dtype=np.intp)
    cvecs = (_structured_cmat([b for _, b in rows.structured], d_in)
             if structured_idx.size else None)

    tau = max(1.0, max((abs(v) for v in b_complex), default=1.0))
    x = np.eye(n) * tau
    s = np.eye(n) * tau
    y = np.zeros(m)

    b_norm = 1.0 + float(np.linalg.norm(rows.b))
    c_norm = 1.0 + float(np.linalg.norm(cmat))

    def values(xm, ym):
        p = sign * float(np.einsum("ij,ij->", cmat, xm)) * c_scale / 2
        dv = sign * float(rows.b @ ym) * c_scale / 2
        return p, dv

    best = None
    best_merit = np.inf
    status = "max_iterations"
    it = 0
    stall = 0
    alpha_p = alpha_d = 0.0

    for it in range(1, opts.max_iterations + 1):
        rp = rows.b - rows.apply(x)
        rd = cmat - s - rows.apply_adjoint(y)
        pres = float(np.linalg.norm(rp)) / b_norm
        dres = float(np.linalg.norm(rd)) / c_norm
        comp = float(np.einsum("ij,ij->", x, s))
        mu = comp / n
        pval, dval = values(x, y)
        denom = 1.0 + abs(pval) + abs(dval)
        gap = abs(pval - dval) / denom
        rel_comp = comp * (c_scale / 2) / denom

        if opts.log is not None:
            opts.log(IterationRecord(
                iteration=it - 1, primal_value=pval, dual_value=dval,
                gap=gap, primal_residual=pres, dual_residual=dres, mu=mu,
                step_primal=alpha_p, step_dual=alpha_d))

        merit = max(gap, rel_comp, pres, dres)
        if merit < best_merit:
            best_merit = merit
            best = (x.copy(), y.copy(), s.copy(), pval, dval, gap, pres, dres)

        if (max(gap, rel_comp) <= opts.gap_tol and pres <= opts.feas_tol
                and dres <= opts.feas_tol):
            status = "optimal"
            break
        if abs(dval) > 1e12 * max(1.0, abs(pval)) and dres < 1e-6:
            status = "infeasible"
            break

        # Nesterov-Todd scaling: R maps both X and S to the same diagonal.
        try:
            lx = np.linalg.cholesky(x)
        except np.linalg.LinAlgError:
            status = "numerical_failure"
            break
        g = lx.T @ s @ lx
        try:
            gamma, u = np.linalg.eigh((g + g.T) / 2)
        except np.linalg.LinAlgError:
            status = "numerical_failure"
            break
        if gamma[0] <= 0:
            status = "numerical_failure"
            break
        r_mat = lx @ (u * gamma ** -0.25)
        r_inv = (u * gamma ** 0.25).T @ sla.solve_triangular(
            lx, np.eye(n), lower=True)
        lam = np.sqrt(gamma)
        w_full = r_mat @ r_mat.T

        schur = np.zeros((m, m))
        if structured_idx.size:
            w_main = w_full[:2 * d, :2 * d]
            block = _structured_schur(w_main, cvecs, d_out, d_in)
            schur[np.ix_(structured_idx, structured_idx)] = block
        structured_set = {int(i) for i in structured_idx}
        for k, i in enumerate(rows.sp_idx):
            if int(i) in structured_set:
                continue
            sl = slice(rows.offsets[k], rows.offsets[k] + rows.counts[k])
            ai = np.zeros((n, n))
            np.add.at(ai, (rows.flat_rows[sl], rows.flat_cols[sl]),
                      rows.flat_vals[sl])
            yi = w_full @ ai @ w_full
            row_i = rows.apply(yi)
            schur[i, :] = row_i
            schur[:, i] = row_i
        for idx, mat in rows.dense:
            yg = w_full @ mat @ w_full
            row_g = rows.apply(yg)
            schur[idx, :] = row_g
            schur[:, idx] = row_g
        schur = (schur + schur.T) / 2

        factor = None
        ridge = 0.0
        for attempt in range(4):
            try:
                factor = sla.cho_factor(
                    schur + ridge * np.eye(m), lower=True)
                break
            except np.linalg.LinAlgError:
                ridge = max(ridge * 100, 1e-13 * max(1.0, schur.diagonal().max()))
        if factor is None:
            status = "numerical_failure"
            break

        def newton(rc_scaled):
            """Direction from the scaled complementarity residual."""
            denom_l = lam[:, None] + lam[None, :]
            rc_mat = r_mat @ (2 * rc_scaled / denom_l) @ r_mat.T
            rhs_mat = rc_mat - w_full @ rd @ w_full
            rhs = rp - rows.apply(rhs_mat)
            dy = sla.cho_solve(factor, rhs)
            dy += sla.cho_solve(factor, rhs - schur @ dy)
            ds = rd - rows.apply_adjoint(dy)
            dx = rc_mat - w_full @ ds @ w_full
            dx = (dx + dx.T) / 2
            ds = (ds + ds.T) / 2
            return dx, dy, ds

        # Predictor (affine scaling) step.
        dx_a, dy_a, ds_a = newton(-np.diag(lam ** 2))
        dxh_a = r_inv @ dx_a @ r_inv.T
        dsh_a = r_mat.T @ ds_a @ r_mat
        ap_a = min(1.0, _max_step(dxh_a, lam))
        ad_a = min(1.0, _max_step(dsh_a, lam))
        comp_aff = float(np.einsum("ij,ij->", x + ap_a * dx_a,
                                   s + ad_a * ds_a))
        sigma = min(1.0, max((comp_aff / comp) ** 3, 1e-10)) if comp > 0 else 0.1

        # Corrector: recenter and subtract the second-order term.
        cross = dxh_a @ dsh_a
        rc = sigma * mu * np.eye(n) - np.diag(lam ** 2) - (cross + cross.T) / 2
        dx, dy, ds = newton(rc)

        dxh = r_inv @ dx @ r_inv.T
        dsh = r_mat.T @ ds @ r_mat
        alpha_p = min(1.0, opts.step_fraction * _max_step(dxh, lam))
        alpha_d = min(1.0, opts.step_fraction * _max_step(dsh, lam))

        if min(alpha_p, alpha_d) < 1e-8:
            stall += 1
            if stall >= 3:
                status = "numerical_failure"
                break
        else:
            stall = 0

        x = x + alpha_p * dx
        s = s + alpha_d * ds
        y = y + alpha_d * dy
        x = (x + x.T) / 2
        s = (s + s.T) / 2

    if best is None:
        best = (x, y, s, *values(x, y), 1.0, 1.0, 1.0)
    x_best, y_best, _, pval, dval, gap, pres, dres = best

    main = symplectic_average(x_best[:2 * d, :2 * d])
    x_complex = complex_from_real(main)
    slacks = x_best.diagonal()[2 * d:].copy()

    # The internal rhs doubling makes the internal duals coincide with the
    # complex-problem duals up to the sign/scale folded into the objective.
    y_scaled = y_best * sign * c_scale
    dual_eq = y_scaled[:n_eq].copy()
    dual_ineq = np.zeros(n_ineq)
    for j, (_, _, sense_j) in enumerate(problem.inequalities):
        mult = y_scaled[n_eq + j]
        dual_ineq[j] = -mult if sense_j == "<=" else mult

    return SdpSolution(
        x=x_complex, dual_equality=dual_eq, dual_inequality=dual_ineq,
        primal_value=pval, dual_value=dval, gap=gap, status=status,
        iterations=it, primal_residual=pres, dual_residual=dres,
        slacks=slacks)
