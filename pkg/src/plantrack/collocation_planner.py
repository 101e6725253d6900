"""Trajectory design by trapezoid direct collocation, reduced to a box QP.

The altitude channel is a double integrator, so transcribing the
error-augmented design problem

    min  integral(a^2 + mu * e^2)
    s.t. y' = v, v' = a, boundary data, y within box bounds

on a uniform knot grid gives a convex quadratic program in the stacked
decision vector z = (y_k, v_k, a_k).  The predicted error enters the
objective through the linear lag-response map e = L v, so the whole
problem stays quadratic and the KKT system is linear.

The solver factorizes the KKT matrix directly (sparse LU) and wraps it
in a primal active-set loop for the y bounds: starting from a point
that satisfies the equality rows and the box, it steps toward the
working-set optimum, stopping at the first blocking bound, and at a
working-set optimum releases the single row whose multiplier has the
worst wrong sign.  Working-set changes are one at a time because the
Hessian is only semidefinite (the y block is zero), so multiplier signs
are trustworthy only at converged subproblems; a cycling limit guards
the degenerate cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .error_estimator import (
    ErrorSeries,
    VelocityProfile,
    error_integral_form,
    lag_response_matrix,
    trapezoid_quadrature,
    trapezoid_weights,
)
from .model import ModelParams

KKT_TOLERANCE = 1e-8
_ACTIVE_SET_LIMIT = 40
_REFINE_PASSES = 3


class InfeasibleProblemError(ValueError):
    """Boundary data contradicts the box bounds."""


class PlannerNumericalError(RuntimeError):
    """KKT factorization failed or the active-set loop did not settle."""


@dataclass(frozen=True)
class PlanProblem:
    """One trajectory design instance.

    dominant_lambda is the decay rate of the controller that will track
    the result; it parameterizes the predicted-error map and is fixed
    before planning.  mu = 0 recovers the plain minimum-acceleration
    problem.
    """

    horizon: float = 1.0
    segments: int = 60
    y0: float = 0.0
    v0: float = 0.0
    yf: float = 5.0
    y_bounds: tuple[float, float] = (0.0, 5.0)
    mu: float = 0.0
    dominant_lambda: float = 20.0
    params: ModelParams = field(default_factory=ModelParams)
    enforce_initial_accel_zero: bool = False

    def __post_init__(self):
        if self.segments < 2:
            raise ValueError("need at least 2 segments")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.dominant_lambda <= 0:
            raise ValueError("dominant_lambda must be a positive decay rate")
        if self.y_bounds[0] >= self.y_bounds[1]:
            raise ValueError("y_bounds must satisfy lo < hi")


@dataclass(frozen=True)
class PlannedTrajectory:
    """Knot-point solution of one design problem.

    u is the total thrust that realizes the planned acceleration,
    u = M (a + g).  kkt_residual is the max-norm optimality residual of
    the returned solution (None for trajectories read back from disk).
    """

    times: np.ndarray
    y: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray
    predicted_error: ErrorSeries
    designed_cost: float
    predicted_error_integral: float
    mu: float | None
    kkt_residual: float | None = None

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def knot_spacing(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class QuadraticProgram:
    """Transcribed QP: min 1/2 z' H z  s.t.  A z = b, box bounds on y.

    The decision vector stacks (y, v, a) blocks of n knots each; the
    bound indices select the y block.
    """

    times: np.ndarray
    hessian: sp.csc_matrix
    eq_matrix: sp.csc_matrix
    eq_rhs: np.ndarray
    bound_indices: np.ndarray
    lower: float
    upper: float


def transcribe(problem: PlanProblem) -> QuadraticProgram:
    """Build the QP for a design problem.

    Equality rows are the two trapezoid chains linking y to v and v to
    a, plus the boundary data; the objective is the trapezoid quadrature
    of a^2 + mu e^2 with e = L v.
    """
    lo, hi = problem.y_bounds
    if not (lo <= problem.y0 <= hi and lo <= problem.yf <= hi):
        raise InfeasibleProblemError(
            f"boundary altitudes y0={problem.y0}, yf={problem.yf} "
            f"must lie within the bounds [{lo}, {hi}]"
        )
    n = problem.segments + 1
    dt = problem.horizon / problem.segments
    times = np.linspace(0.0, problem.horizon, n)
    quad = trapezoid_weights(n) * dt

    # Hessian of 1/2 z' H z: factor 2 because the objective is quadratic
    # with no linear term.
    blocks = [sp.csc_matrix((n, n)), None, sp.diags(2.0 * quad)]
    if problem.mu > 0:
        L = lag_response_matrix(times, problem.dominant_lambda)
        blocks[1] = sp.csc_matrix(2.0 * problem.mu * (L.T * quad) @ L)
    else:
        blocks[1] = sp.csc_matrix((n, n))
    hessian = sp.block_diag(blocks, format="csc")

    rows, cols, vals = [], [], []
    rhs = []

    def add_row(entries, value):
        r = len(rhs)
        for c, v in entries:
            rows.append(r)
            cols.append(c)
            vals.append(v)
        rhs.append(value)

    half = 0.5 * dt
    for k in range(1, n):
        add_row(
            [(k, 1.0), (k - 1, -1.0), (n + k, -half), (n + k - 1, -half)], 0.0
        )
    for k in range(1, n):
        add_row(
            [(n + k, 1.0), (n + k - 1, -1.0), (2 * n + k, -half), (2 * n + k - 1, -half)],
            0.0,
        )
    add_row([(0, 1.0)], problem.y0)
    add_row([(n, 1.0)], problem.v0)
    add_row([(n - 1, 1.0)], problem.yf)
    if problem.enforce_initial_accel_zero:
        add_row([(2 * n, 1.0)], 0.0)

    eq_matrix = sp.csc_matrix(
        (vals, (rows, cols)), shape=(len(rhs), 3 * n)
    )
    return QuadraticProgram(
        times=times,
        hessian=hessian,
        eq_matrix=eq_matrix,
        eq_rhs=np.array(rhs),
        bound_indices=np.arange(n),
        lower=lo,
        upper=hi,
    )


def _solve_equality_kkt(hessian, eq_matrix, stationarity_rhs, eq_rhs):
    """Solve the equality-constrained KKT system with iterative refinement."""
    nv = hessian.shape[0]
    m = eq_matrix.shape[0]
    kkt = sp.bmat(
        [[hessian, eq_matrix.T], [eq_matrix, None]], format="csc"
    )
    rhs = np.concatenate([stationarity_rhs, eq_rhs])
    try:
        lu = spla.splu(kkt)
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise PlannerNumericalError(f"KKT factorization failed: {exc}") from exc
    for _ in range(_REFINE_PASSES):
        resid = rhs - kkt @ sol
        if np.max(np.abs(resid)) < 1e-12:
            break
        sol += lu.solve(resid)
    if not np.all(np.isfinite(sol)):
        raise PlannerNumericalError(
            "KKT solve produced non-finite values; the system is singular "
            f"(size {nv + m}, equality rows {m})"
        )
    return sol[:nv], sol[nv:]


def _feasible_start(qp: QuadraticProgram) -> np.ndarray:
    """A point satisfying the equality rows with y inside the box.

    Only y carries bounds, so any in-box altitude profile through the
    boundary rows works: take the straight line between y0 and yf (the
    segment between two in-box points stays in the box) and back out v
    and a from the trapezoid chains, which are exactly invertible knot
    by knot.
    """
    n = qp.times.size
    dt = qp.times[1] - qp.times[0]
    m_dyn = 2 * (n - 1)
    y0, v0, yf = qp.eq_rhs[m_dyn : m_dyn + 3]
    y = np.linspace(y0, yf, n)
    v = np.empty(n)
    a = np.empty(n)
    v[0] = v0
    a[0] = 0.0
    for k in range(1, n):
        v[k] = 2.0 * (y[k] - y[k - 1]) / dt - v[k - 1]
        a[k] = 2.0 * (v[k] - v[k - 1]) / dt - a[k - 1]
    return np.concatenate([y, v, a])


def _solve_box_qp(qp: QuadraticProgram) -> tuple[np.ndarray, float]:
    """Minimize the transcribed QP, returning (z, kkt_residual).

    Multiplier convention: with stationarity H z + A' nu = 0, an active
    lower bound carries nu <= 0 and an active upper bound nu >= 0; at a
    working-set optimum the row with the worst wrong-signed multiplier
    is released.
    """
    idx = qp.bound_indices
    n_bound = idx.size
    nv = qp.hessian.shape[0]
    m_base = qp.eq_matrix.shape[0]
    n = qp.times.size

    z = _feasible_start(qp)
    lo_active = np.zeros(n_bound, dtype=bool)
    hi_active = np.zeros(n_bound, dtype=bool)
    # The endpoint knots are pinned by equality rows; bounding them too
    # would duplicate rows and make the KKT matrix singular.
    blockable = np.ones(n_bound, dtype=bool)
    blockable[0] = blockable[n - 1] = False

    limit = max(_ACTIVE_SET_LIMIT, 4 * n_bound)
    for _ in range(limit):
        lo_idx = idx[lo_active]
        hi_idx = idx[hi_active]
        pinned = np.concatenate([lo_idx, hi_idx])
        if pinned.size:
            bound_rows = sp.csc_matrix(
                (np.ones(pinned.size), (np.arange(pinned.size), pinned)),
                shape=(pinned.size, nv),
            )
            eq = sp.vstack([qp.eq_matrix, bound_rows], format="csc")
        else:
            eq = qp.eq_matrix
        step, mult = _solve_equality_kkt(
            qp.hessian, eq, -(qp.hessian @ z), np.zeros(eq.shape[0])
        )

        scale = max(1.0, float(np.max(np.abs(z))))
        if np.max(np.abs(step)) <= 1e-10 * scale:
            # Working-set optimum; release the worst wrong-sign row.
            bound_mult = mult[m_base:]
            lo_mult = bound_mult[: lo_idx.size]
            hi_mult = bound_mult[lo_idx.size :]
            worst = KKT_TOLERANCE / 10.0
            release = None
            if lo_mult.size and np.max(lo_mult, initial=-np.inf) > worst:
                worst = float(np.max(lo_mult))
                release = ("lo", lo_idx[int(np.argmax(lo_mult))])
            if hi_mult.size and float(np.max(-hi_mult, initial=-np.inf)) > worst:
                release = ("hi", hi_idx[int(np.argmax(-hi_mult))])
            if release is None:
                residual = _kkt_residual(qp, z, mult, lo_idx, hi_idx)
                if residual >= KKT_TOLERANCE:
                    raise PlannerNumericalError(
                        f"optimality residual {residual:.3e} exceeds "
                        f"{KKT_TOLERANCE:.0e}"
                    )
                return z, residual
            which, knot = release
            (lo_active if which == "lo" else hi_active)[knot] = False
            continue

        # Longest feasible step toward the working-set optimum.
        y = z[idx]
        direction = step[idx]
        tol_dir = 1e-12 * float(np.max(np.abs(step)))
        free = blockable & ~lo_active & ~hi_active
        alpha = 1.0
        block = None
        down = free & (direction < -tol_dir)
        for i in np.flatnonzero(down):
            ratio = max((qp.lower - y[i]) / direction[i], 0.0)
            if ratio < alpha:
                alpha, block = ratio, ("lo", i)
        up = free & (direction > tol_dir)
        for i in np.flatnonzero(up):
            ratio = max((qp.upper - y[i]) / direction[i], 0.0)
            if ratio < alpha:
                alpha, block = ratio, ("hi", i)

        z = z + alpha * step
        if block is not None:
            which, knot = block
            (lo_active if which == "lo" else hi_active)[knot] = True
        # Pin working-set knots exactly to kill step-length drift.
        z[idx[lo_active]] = qp.lower
        z[idx[hi_active]] = qp.upper

    raise PlannerNumericalError(
        f"active-set loop exceeded {limit} iterations (cycling)"
    )


def _kkt_residual(qp, z, mult, lo_idx, hi_idx) -> float:
    """Max-norm KKT residual: stationarity, feasibility, complementarity."""
    m_base = qp.eq_matrix.shape[0]
    grad = qp.hessian @ z + qp.eq_matrix.T @ mult[:m_base]
    bound_mult = mult[m_base:]
    lo_mult = bound_mult[: lo_idx.size]
    hi_mult = bound_mult[lo_idx.size :]
    for which, sub in ((lo_idx, lo_mult), (hi_idx, hi_mult)):
        if which.size:
            grad[which] += sub
    stationarity = np.max(np.abs(grad))

    primal = np.max(np.abs(qp.eq_matrix @ z - qp.eq_rhs))
    y = z[qp.bound_indices]
    primal = max(
        primal,
        float(np.max(np.maximum(qp.lower - y, 0.0), initial=0.0)),
        float(np.max(np.maximum(y - qp.upper, 0.0), initial=0.0)),
    )

    # Inactive bounds carry no multiplier by construction, so the
    # complementarity block reduces to sign and pinning checks on the
    # working set.
    dual = 0.0
    comp = 0.0
    if lo_idx.size:
        dual = max(dual, float(np.max(lo_mult, initial=0.0)))
        comp = max(comp, float(np.max(np.abs((z[lo_idx] - qp.lower) * lo_mult))))
    if hi_idx.size:
        dual = max(dual, float(np.max(-hi_mult, initial=0.0)))
        comp = max(comp, float(np.max(np.abs((z[hi_idx] - qp.upper) * hi_mult))))
    return max(stationarity, primal, dual, comp)


def solve(problem: PlanProblem) -> PlannedTrajectory:
    """Solve a design problem to global optimality.

    The transcribed QP is convex with affine constraints, so the KKT
    point found here is the global optimum; the residual certificate is
    attached to the returned trajectory.
    """
    qp = transcribe(problem)
    z, residual = _solve_box_qp(qp)
    n = qp.times.size
    y = z[:n]
    v = z[n : 2 * n]
    a = z[2 * n :]
    predicted = error_integral_form(
        VelocityProfile(qp.times, v), problem.dominant_lambda
    )
    params = problem.params
    return PlannedTrajectory(
        times=qp.times,
        y=y,
        v=v,
        a=a,
        u=params.mass * (a + params.gravity),
        predicted_error=predicted,
        designed_cost=trapezoid_quadrature(qp.times, a**2),
        predicted_error_integral=trapezoid_quadrature(
            qp.times, predicted.values**2
        ),
        mu=problem.mu,
        kkt_residual=residual,
    )


def designed_cost(traj: PlannedTrajectory) -> float:
    """Trapezoid quadrature of the squared planned acceleration."""
    return trapezoid_quadrature(traj.times, traj.a**2)


TRAJECTORY_COLUMNS = ("t", "y", "v", "a", "u", "e_pred")


class TrajectorySchemaError(ValueError):
    """Trajectory CSV does not match the expected column layout."""


def write_trajectory_csv(traj: PlannedTrajectory, path) -> None:
    """Write the knot grid as CSV, full double precision."""
    columns = np.column_stack(
        [traj.times, traj.y, traj.v, traj.a, traj.u, traj.predicted_error.values]
    )
    with open(path, "w", newline="") as handle:
        handle.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for row in columns:
            handle.write(",".join(f"{value:.17g}" for value in row) + "\n")


def read_trajectory_csv(path) -> PlannedTrajectory:
    """Read a trajectory CSV back into a PlannedTrajectory.

    The design weight is not part of the on-disk schema, so mu comes
    back as None; cost and error integrals are recomputed from the
    columns.
    """
    with open(path, newline="") as handle:
        header = handle.readline().strip()
        names = tuple(part.strip() for part in header.split(","))
        if names != TRAJECTORY_COLUMNS:
            for position, expected in enumerate(TRAJECTORY_COLUMNS):
                found = names[position] if position < len(names) else "nothing"
                if found != expected:
                    raise TrajectorySchemaError(
                        f"column {position}: expected {expected!r}, found {found!r}"
                    )
            raise TrajectorySchemaError(
                f"unexpected extra columns {names[len(TRAJECTORY_COLUMNS):]!r}"
            )
        data = np.loadtxt(handle, delimiter=",", ndmin=2)
    if data.shape[1] != len(TRAJECTORY_COLUMNS):
        raise TrajectorySchemaError(
            f"expected {len(TRAJECTORY_COLUMNS)} columns, found {data.shape[1]}"
        )
    times, y, v, a, u, e_pred = data.T
    return PlannedTrajectory(
        times=times,
        y=y,
        v=v,
        a=a,
        u=u,
        predicted_error=ErrorSeries(times=times, values=e_pred),
        designed_cost=trapezoid_quadrature(times, a**2),
        predicted_error_integral=trapezoid_quadrature(times, e_pred**2),
        mu=None,
        kkt_residual=None,
    )
