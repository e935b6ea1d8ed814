"""
Displacement-controlled Newton-Raphson solution of the adhesive contact problem.

Unknowns are nodal displacements. The bottom face is clamped; every indenter
face node is prescribed (normal component = u_bar, tangential = 0). The
remaining DOFs are solved for by elimination: the constrained system
K_ff du_f = -R_f is factorized with a sparse LU.

Residuals are internal forces: R = K_bulk u + f_interface(u). At
equilibrium R vanishes on the free DOFs and equals the reaction on the
prescribed ones. P = sum of the indenter normal reactions; P > 0 is
attraction.
"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.sparse as sp
import structlog
from scipy.sparse.linalg import splu

from mpjr.core.exceptions import GeometryError, NewtonFailure, SingularSystemError, StepFailure
from mpjr.schemas.run import FailureRecord, LoadPath, RunHistory, Snapshot, SolverSection, StepRecord
from mpjr.services.bulk_fem import Mesh, assemble_bulk_stiffness
from mpjr.services.mpjr_element import GapState, InterfaceLayer, layer_energy, layer_gap, layer_residual_tangent

logger = structlog.get_logger()

ABS_TOL_FACTOR = 1e-12
ENERGY_TOL = 1e-16


@dataclass
class ContactSystem:
    """
    Mesh with its interface layer attached, the bulk stiffness and the
    constraint partition. reference_modulus (E*) scales tolerances and
    normalized tractions.
    """

    mesh: Mesh
    reference_modulus: float
    K_bulk: sp.csr_matrix = field(init=False, repr=False)
    prescribed: np.ndarray = field(init=False, repr=False)
    free: np.ndarray = field(init=False, repr=False)
    loading: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mesh.interface is None:
            raise GeometryError("mesh has no interface layer attached")
        self.K_bulk = assemble_bulk_stiffness(self.mesh)
        self.prescribed = np.union1d(self.mesh.fixed_dofs, self.mesh.indenter_dofs)
        self.free = np.setdiff1d(np.arange(self.mesh.n_dofs), self.prescribed)
        self.loading = self.mesh.loading_dofs

    @property
    def layer(self) -> InterfaceLayer:
        return self.mesh.interface

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_dofs

    def default_tol_abs(self) -> float:
        """Force scale E * L^(dim-1) times 1e-12."""
        return ABS_TOL_FACTOR * self.reference_modulus * self.mesh.length ** (self.mesh.dim - 1)

    def apply_load(self, u: np.ndarray, u_bar: float) -> np.ndarray:
        """Copy of `u` with all prescribed values set for far-field displacement u_bar."""
        u = u.copy()
        u[self.prescribed] = 0.0
        u[self.loading] = u_bar
        return u


def _interface_matrix(system: ContactSystem, tangents: np.ndarray) -> sp.csr_matrix:
    dofs = system.layer.dofs
    n = dofs.shape[1]
    rows = np.broadcast_to(dofs[:, :, None], (len(dofs), n, n))
    cols = np.broadcast_to(dofs[:, None, :], (len(dofs), n, n))
    return sp.coo_matrix(
        (tangents.ravel(), (rows.ravel(), cols.ravel())),
        shape=(system.n_dofs, system.n_dofs)
    ).tocsr()


def assemble(system: ContactSystem, u: np.ndarray) -> Tuple[np.ndarray, sp.csr_matrix]:
    """Global internal-force residual and tangent (bulk + interface), unconstrained."""
    forces, tangents, _ = layer_residual_tangent(system.layer, u)
    R = system.K_bulk @ u + np.bincount(system.layer.dofs.ravel(), weights=forces.ravel(), minlength=system.n_dofs)
    K = system.K_bulk + _interface_matrix(system, tangents)
    return R, K


def condense(system: ContactSystem, R: np.ndarray, K: sp.csr_matrix) -> Tuple[np.ndarray, sp.csc_matrix]:
    """Free-DOF residual and stiffness; prescribed values already sit in R."""
    free = system.free
    return R[free], K[free][:, free].tocsc()


def factorize(K_ff: sp.csc_matrix):
    try:
        return splu(K_ff)
    except RuntimeError as e:
        raise SingularSystemError(str(e))


def _linear_solve(K_ff: sp.csc_matrix, rhs: np.ndarray) -> np.ndarray:
    x = factorize(K_ff).solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("non-finite solution of the constrained system")
    return x


def newton(
    system: ContactSystem,
    u: np.ndarray,
    u_bar: float,
    options: SolverSection
) -> Tuple[np.ndarray, int, float]:
    """
    Full Newton from the predictor `u` with the load set to u_bar.

    Returns (u, linear solves, final residual norm). At least one
    correction is always computed.
    """
    tol_abs = options.tol_abs if options.tol_abs is not None else system.default_tol_abs()
    u = system.apply_load(u, u_bar)
    R, K = assemble(system, u)
    R_f, K_ff = condense(system, R, K)
    norm0 = float(np.linalg.norm(R_f))
    tolerance = tol_abs + options.tol_rel * norm0
    energy0 = None
    norm = norm0

    for iteration in range(1, options.max_iterations + 1):
        du = _linear_solve(K_ff, -R_f)
        energy = abs(float(du @ R_f))
        energy0 = energy if energy0 is None else energy0
        u[system.free] += du

        R, K = assemble(system, u)
        R_f, K_ff = condense(system, R, K)
        norm = float(np.linalg.norm(R_f))
        if not np.isfinite(norm):
            raise NewtonFailure(norm, iteration)

        logger.debug("newton_iteration", u_bar=u_bar, iteration=iteration, residual=norm)
        if norm <= tolerance or energy <= ENERGY_TOL * energy0:
            return u, iteration, norm

    raise NewtonFailure(norm, options.max_iterations)


@dataclass(frozen=True)
class StepResult:
    u: np.ndarray
    u_bar: float
    iterations: int
    depth: int
    residual_norm: float


def solve_step(
    system: ContactSystem,
    u: np.ndarray,
    u_bar_start: float,
    u_bar_target: float,
    options: SolverSection,
    depth: int = 0
) -> StepResult:
    """
    Advance from a converged state at u_bar_start to u_bar_target.

    A failed increment is bisected recursively; past `max_depth` the step
    fails with the last residual norm.
    """
    try:
        u_new, iterations, norm = newton(system, u, u_bar_target, options)
        return StepResult(u_new, u_bar_target, iterations, depth, norm)
    except NewtonFailure as e:
        if depth >= options.max_depth:
            raise StepFailure(u_bar_target, e.residual_norm, depth)
        logger.info("substep_bisected", u_bar=u_bar_target, depth=depth + 1, residual=e.residual_norm)

    middle = 0.5 * (u_bar_start + u_bar_target)
    first = solve_step(system, u, u_bar_start, middle, options, depth + 1)
    second = solve_step(system, first.u, middle, u_bar_target, options, depth + 1)
    return StepResult(
        second.u,
        u_bar_target,
        first.iterations + second.iterations,
        max(first.depth, second.depth),
        second.residual_norm
    )


def reaction_force(system: ContactSystem, u: np.ndarray) -> float:
    """Total normal reaction P on the indenter face."""
    R, _ = assemble(system, u)
    return float(R[system.loading].sum())


def condensed_stiffness(system: ContactSystem, u: np.ndarray) -> float:
    """dP/du_bar at state u with all free DOFs in equilibrium."""
    _, K = assemble(system, u)
    column = np.asarray(K[:, system.loading].sum(axis=1)).ravel()
    _, K_ff = condense(system, column, K)
    c_f = column[system.free]
    return float(column[system.loading].sum() - c_f @ _linear_solve(K_ff, c_f))


def interface_state(system: ContactSystem, u: np.ndarray) -> GapState:
    return layer_gap(system.layer, u)


def stored_energy(system: ContactSystem, u: np.ndarray) -> float:
    """Elastic bulk energy plus interface energy (phi integrated over the layer)."""
    return float(0.5 * u @ (system.K_bulk @ u)) + layer_energy(system.layer, u)


def detect_snap_back(history: RunHistory, jump_tol: float) -> list:
    """
    Steps after the pull-off peak whose force change departs from the
    tangent prediction by more than jump_tol * max|P|.
    """
    peak = history.peak_index
    if peak is None:
        return []
    P = history.reaction_force
    scale = float(np.max(np.abs(P)))
    jumps = []
    for k in range(peak + 1, len(history.steps)):
        previous, current = history.steps[k - 1], history.steps[k]
        predicted = previous.stiffness * (current.u_bar - previous.u_bar)
        if abs(current.reaction_force - previous.reaction_force - predicted) > jump_tol * scale:
            jumps.append(current.step)
    return jumps


def run(
    system: ContactSystem,
    path: LoadPath,
    options: SolverSection,
    snapshot_every: int = 0,
    h_rms: float = 0.0
) -> RunHistory:
    """
    Execute the load path ramp by ramp, recording every converged increment.

    With `continue_on_snap` a failed increment is recorded and the next one
    starts from the last converged state; otherwise the StepFailure carries
    the history so far.
    """
    history = RunHistory(h_rms=h_rms)
    u = np.zeros(system.n_dofs)
    u_bar = 0.0

    for increment in path.increments():
        try:
            result = solve_step(system, u, u_bar, increment.u_bar, options)
        except StepFailure as e:
            history.failures.append(FailureRecord(
                pseudo_time=increment.pseudo_time,
                u_bar=increment.u_bar,
                residual_norm=e.residual_norm,
                depth=e.depth
            ))
            logger.warning("step_failed", u_bar=increment.u_bar, residual=e.residual_norm, depth=e.depth)
            if not options.continue_on_snap:
                history.jumps = detect_snap_back(history, options.jump_tol)
                e.history = history
                raise
            continue

        u, u_bar = result.u, result.u_bar
        step = len(history.steps)
        P = reaction_force(system, u)
        history.record(StepRecord(
            step=step,
            ramp=increment.ramp,
            pseudo_time=increment.pseudo_time,
            u_bar=u_bar,
            reaction_force=P,
            stiffness=condensed_stiffness(system, u),
            iterations=result.iterations,
            depth=result.depth
        ))
        history.final = Snapshot(step=step, u=u.copy(), p_n=interface_state(system, u).p_n)
        if snapshot_every and step % snapshot_every == 0:
            history.snapshots.append(history.final)
        logger.info(
            "step_converged",
            step=step,
            u_bar=u_bar,
            reaction_force=P,
            iterations=result.iterations,
            depth=result.depth
        )

    history.jumps = detect_snap_back(history, options.jump_tol)
    logger.info(
        "run_completed",
        steps=len(history.steps),
        failures=len(history.failures),
        jumps=len(history.jumps),
        instability=history.has_instability
    )
    return history
