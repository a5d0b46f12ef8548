"""Quadratic energy assembly and per-channel least-squares solve.

The objective per channel is a plain sum of squared sparse residuals:
boundary rows (weight 1), line rows (weight alpha), and the grid
regularizer (Laplacian rows weight lambda, cross rows lambda*beta).
It is solved by preconditioned conjugate gradients on the normal
equations, which decreases the objective monotonically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .constraints import (CH_U, CH_V, ConfigurationError, ConstraintSet,
                          ResidualBlock, assemble_boundary_block,
                          assemble_line_block)
from .core import GridField


class UnderDeterminedError(ConfigurationError):
    """Channel lacks absolute boundary targets; solution is gauge-free."""


class NonConvergenceError(RuntimeError):
    def __init__(self, message, best, residual):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class SolverParams:
    n: int = 128
    alpha: float = 10.0  # line-constraint weight
    lam: float = 2.0  # regularizer weight
    beta: float = 20.0  # mixed-derivative weight inside the regularizer
    tol: float = 1e-8  # relative normal-equation residual
    max_iters: int = 20000

    def __post_init__(self):
        if min(self.n, self.alpha, self.lam, self.beta, self.tol,
               self.max_iters) <= 0 or self.tol >= 1:
            raise ConfigurationError("invalid solver parameters")


@dataclass
class QuadraticProblem:
    blocks: list  # of ResidualBlock
    n: int
    channel: int

    @property
    def n_unknowns(self) -> int:
        return self.n * self.n

    def energy(self, phi_flat: np.ndarray) -> float:
        return sum(b.energy(phi_flat) for b in self.blocks)

    def gradient(self, phi_flat: np.ndarray) -> np.ndarray:
        g = np.zeros_like(phi_flat)
        for b in self.blocks:
            r = b.rows @ phi_flat - b.rhs
            g += 2.0 * b.weight * (b.rows.T @ r)
        return g

    def stacked(self):
        """Single (A, b) with sqrt(weight) folded into the rows."""
        mats, rhs = [], []
        for b in self.blocks:
            s = np.sqrt(b.weight)
            mats.append(b.rows * s)
            rhs.append(b.rhs * s)
        return sparse.vstack(mats, format="csr"), np.concatenate(rhs)


def regularizer_blocks(n: int, beta: float):
    """Laplacian rows on interior nodes and cross rows on cells.

    Stencils act in index space (no grid-spacing normalization). The
    Laplacian block carries weight 1 and the cross block weight beta;
    the caller scales both by lambda.
    """
    if n < 3:
        raise ConfigurationError("grid must be at least 3x3")
    n2 = n * n

    def flat(i, j):
        return j * n + i

    data, ri, ci = [], [], []
    r = 0
    for j in range(1, n - 1):
        for i in range(1, n - 1):
            for (ii, jj, c) in ((i + 1, j, 1.0), (i - 1, j, 1.0),
                                (i, j + 1, 1.0), (i, j - 1, 1.0),
                                (i, j, -4.0)):
                ri.append(r)
                ci.append(flat(ii, jj))
                data.append(c)
            r += 1
    lap = sparse.csr_matrix((data, (ri, ci)), shape=(r, n2))
    lap_block = ResidualBlock(lap, np.zeros(r), 1.0, name="laplacian")

    data, ri, ci = [], [], []
    r = 0
    for j in range(n - 1):
        for i in range(n - 1):
            for (ii, jj, c) in ((i + 1, j + 1, 1.0), (i + 1, j, -1.0),
                                (i, j + 1, -1.0), (i, j, 1.0)):
                ri.append(r)
                ci.append(flat(ii, jj))
                data.append(c)
            r += 1
    cross = sparse.csr_matrix((data, (ri, ci)), shape=(r, n2))
    cross_block = ResidualBlock(cross, np.zeros(r), beta, name="cross")
    return lap_block, cross_block


def build_problem(cset: ConstraintSet, params: SolverParams,
                  channel) -> QuadraticProblem:
    """Stack boundary, line, and regularizer blocks for one channel."""
    boundary = assemble_boundary_block(cset, channel)
    if boundary.rows.shape[0] == 0:
        raise UnderDeterminedError(
            f"channel {'UV'[channel]} has no boundary constraints")
    targets = set(np.round(boundary.rhs, 12))
    if len(targets) < 2:
        raise UnderDeterminedError(
            f"channel {'UV'[channel]} boundary pins only one side")
    lines = assemble_line_block(cset, channel, weight=params.alpha)
    lap, cross = regularizer_blocks(params.n, params.beta)
    lap = ResidualBlock(lap.rows, lap.rhs, params.lam, name="laplacian")
    cross = ResidualBlock(cross.rows, cross.rhs, params.lam * params.beta,
                          name="cross")
    blocks = [boundary, lines, lap, cross]
    return QuadraticProblem(blocks, params.n, channel)


def _initial_guess(problem: QuadraticProblem) -> np.ndarray:
    t = np.linspace(0.0, 1.0, problem.n)
    if problem.channel == CH_U:
        grid = np.tile(t, (problem.n, 1))
    else:
        grid = np.tile(t[:, None], (1, problem.n))
    return grid.ravel()


def solve(problem: QuadraticProblem, params: SolverParams,
          track_objective: bool = False):
    """Minimize the stacked least squares via preconditioned CG.

    Returns (phi, diagnostics). phi is the flat n^2 channel field.
    Diagnostics report iterations, the final relative residual of the
    normal equations, and per-block energies; with track_objective the
    per-iteration objective values are recorded as well.
    """
    A, b = problem.stacked()
    N = (A.T @ A).tocsc()
    rhs = A.T @ b
    x = _initial_guess(problem)

    # complete sparse LU of the normal matrix as preconditioner; cheap at
    # n^2 unknowns, so CG only polishes to the requested tolerance
    try:
        lu = spla.splu(N)
        precond = lu.solve
    except RuntimeError:
        d = N.diagonal()
        d[d == 0] = 1.0
        precond = lambda r: r / d

    r = rhs - N @ x
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        rhs_norm = 1.0
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    iters = 0
    rel = float(np.linalg.norm(r)) / rhs_norm
    history = [problem.energy(x)] if track_objective else None
    while rel > params.tol and iters < params.max_iters:
        Np = N @ p
        denom = float(p @ Np)
        if denom <= 0:
            break
        step = rz / denom
        x = x + step * p
        r = r - step * Np
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        iters += 1
        rel = float(np.linalg.norm(r)) / rhs_norm
        if track_objective:
            history.append(problem.energy(x))
    if rel > params.tol:
        raise NonConvergenceError(
            f"no convergence after {iters} iterations (rel={rel:.3e})",
            best=x, residual=rel)

    diagnostics = {
        "iterations": iters,
        "relative_residual": rel,
        "objective": problem.energy(x),
        "block_energies": {b.name: b.energy(x) for b in problem.blocks},
    }
    if track_objective:
        diagnostics["objective_history"] = history
    return x, diagnostics


def solve_field(cset: ConstraintSet, params: SolverParams):
    """Solve both channels and combine into a GridField."""
    pu = build_problem(cset, params, CH_U)
    pv = build_problem(cset, params, CH_V)
    u, du = solve(pu, params)
    v, dv = solve(pv, params)
    values = np.stack([u.reshape(params.n, params.n),
                       v.reshape(params.n, params.n)], axis=-1)
    return GridField(params.n, values), {"u": du, "v": dv}


def energy_report(field: GridField, problems) -> dict:
    """Per-term energies of a field under a (U, V) problem pair."""
    report = {"total": 0.0, "terms": {}}
    for tag, problem in zip("uv", problems):
        phi = field.values[:, :, 0 if problem.channel == CH_U else 1].ravel()
        for b in problem.blocks:
            e = b.energy(phi)
            report["terms"][f"{tag}.{b.name}"] = e
            report["total"] += e
    return report
