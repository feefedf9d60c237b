"""Nonlinear continuation solvers: NR, FAL and the unified arc-length method.

The unified solver treats the external force on the prescribed DOFs, the
free displacements, the nonlocal strain and the load fraction as
simultaneous unknowns tied together by the constraint

    g = |dx|^2 + beta^2 |df_ext|^2 - dl^2 = 0.

Sign convention: ``f_ext`` is the physical external force, so the
residual on the prescribed DOFs is ``r_p = f_int_p - f_ext`` and its
derivative with respect to ``f_ext`` is ``-I``.  The partitioned
correctors below are the exact block elimination of that linearized
system; the test suite checks them against dense monolithic solves.

Two corrector schemes are provided: the consistent one (PC) computes the
load-fraction correction from the linearized constraint row in closed
form; the non-consistent one (PNC) enforces the quadratic constraint
exactly and picks the root by maximum cosine with the current increment
direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import AnalysisContext, assemble, constraint_residual
from .mesh import NONLOCAL, BCSpec, build_dof_map
from .state import (
    FULL_PATH,
    PARTIAL_PATH,
    AnalysisResult,
    ControlParams,
    Increment,
    IncrementRecord,
    SystemState,
)

NR = "nr"
FAL = "fal"
UAL_PC = "ual_pc"
UAL_PNC = "ual_pnc"
SOLVERS = (NR, FAL, UAL_PC, UAL_PNC)

_DIVERGENCE_NORM = 1e12
_MAX_CONSECUTIVE_FAILURES = 60
_STALL_FRACTION = 1e-12


class SolveError(RuntimeError):
    """Singular or numerically rank-deficient linear system."""


class StepCut(RuntimeError):
    """The current increment cannot proceed; the driver should cut the step."""


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------

def factorize(matrix):
    """Sparse LU factorization returning a solve closure.

    The closure verifies ``|A x - b| <= 1e-10 (|A| |x| + |b|)`` and raises
    :class:`SolveError` when the factorization is singular or the bound
    fails (rank-deficient system).
    """
    A = sp.csc_matrix(matrix) if not sp.issparse(matrix) else matrix.tocsc()
    if A.shape[0] != A.shape[1]:
        raise SolveError(f"matrix is not square: {A.shape}")
    if A.shape[0] == 0:
        return lambda b: np.zeros_like(np.asarray(b, dtype=float))
    try:
        # FEM tangents are structurally symmetric; the AT+A ordering cuts
        # the factorization cost well below the default column ordering.
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolveError(f"singular factorization: {exc}") from exc
    norm_a = spla.norm(A, ord=np.inf) if A.nnz else 0.0

    def solve(b):
        b = np.asarray(b, dtype=float)
        x = lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise SolveError("non-finite solution from factorization")
        resid = np.linalg.norm(A @ x - b, ord=np.inf)
        bound = 1e-10 * (norm_a * np.linalg.norm(x, ord=np.inf) + np.linalg.norm(b, ord=np.inf))
        if resid > max(bound, 1e-300):
            raise SolveError(f"rank-deficient solve: residual {resid:.3e} exceeds {bound:.3e}")
        return x

    return solve


def solve_linear(matrix, rhs):
    """Direct sparse solve of ``A x = b`` (non-symmetric supported)."""
    return factorize(matrix)(rhs)


def update_arc_length(dl: float, iterations: int, controls: ControlParams) -> float:
    """Log-scale arc-length adaptation from the converged iteration count."""
    if iterations < controls.i_min:
        return min(controls.dl_max, 10.0 ** (math.log10(dl) + 0.2))
    if iterations > controls.i_max:
        return max(controls.dl_min, 10.0 ** (math.log10(dl) - 0.2))
    return dl


def _stable_roots(a: float, b: float, c: float):
    """Both real roots of a x^2 + b x + c = 0, numerically stable."""
    if a == 0.0:
        if b == 0.0:
            raise StepCut("degenerate constraint quadratic")
        return (-c / b, -c / b)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise StepCut(f"negative discriminant {disc:.3e}")
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b if b != 0.0 else 1.0))
    if q == 0.0:
        return (0.0, 0.0)
    return (q / a, c / q)


# ---------------------------------------------------------------------------
# Step outcome plumbing
# ---------------------------------------------------------------------------

@dataclass
class StepOutcome:
    """Result of attempting one increment."""

    converged: bool
    iterations: int
    residual_norm: float
    g: float = 0.0
    increment: Increment | None = None
    trial: dict | None = None
    reason: str = ""


@dataclass
class FALState:
    """Force-controlled arc-length bookkeeping.

    ``q`` is the fixed reference load pattern over all displacement DOFs,
    scaled so the unit load factor matches the elastic reaction at full
    prescribed displacement.  ``lam`` accumulates the load factor.
    """

    q: np.ndarray
    loaded: np.ndarray = None
    control: np.ndarray = None
    lam: float = 0.0
    d_u: np.ndarray | None = None
    d_eb: np.ndarray | None = None
    d_lam: float = 0.0
    prev_dir: tuple | None = None


def _apply_increment(ctx: AnalysisContext, state: SystemState, inc: Increment):
    u = state.u.copy()
    u[ctx.F] += inc.d_uf
    u[ctx.P] = (state.m_bar + inc.d_m) * ctx.up_p
    f = state.f_ext + inc.d_f
    eb = None if inc.d_eb is None else state.eps_bar + inc.d_eb
    return u, f, eb


def _trial_payload(ctx, state, inc, res, u, f, eb):
    control_pos = np.searchsorted(ctx.P, ctx.control_dofs)
    return {
        "u": u,
        "f_ext": f,
        "eps_bar": eb,
        "m_bar": state.m_bar + inc.d_m,
        "gp_damage": res.gp_damage,
        "gp_eq": res.gp_eq_strain,
        "reaction": float(f[control_pos].sum()),
    }


# ---------------------------------------------------------------------------
# Unified arc-length: predictors
# ---------------------------------------------------------------------------

def ual_pc_local_predictor(ctx: AnalysisContext, state: SystemState, alpha: float, n: int,
                           blocks=None) -> Increment:
    """Increment predictor for the local law.

    At the first increment the load fraction is set to ``alpha`` and the
    remaining predictors follow from the first two linearized rows; later
    increments reuse the last converged increment unchanged.
    """
    if n > 1:
        if state.last_increment is None:
            raise ValueError("no converged increment to copy the predictor from")
        return state.last_increment.copy()
    solve = factorize(blocks.J_ff)
    du_b = solve(-(blocks.J_fp @ ctx.up_p))
    d_f = (blocks.J_pp @ ctx.up_p + blocks.J_pf @ du_b) * alpha
    return Increment(d_m=alpha, d_uf=du_b * alpha, d_f=d_f)


def ual_pc_nonlocal_predictor(ctx: AnalysisContext, state: SystemState, alpha: float, n: int,
                              blocks=None) -> Increment:
    """Increment predictor for the gradient law (coupled first solve)."""
    if n > 1:
        if state.last_increment is None:
            raise ValueError("no converged increment to copy the predictor from")
        return state.last_increment.copy()
    nf = len(ctx.F)
    S = sp.bmat([[blocks.J_ff, blocks.J_ue_f], [blocks.J_eu_f, blocks.J_ee]], format="csc")
    solve = factorize(S)
    rhs = np.concatenate([-(blocks.J_fp @ ctx.up_p), -(blocks.J_eu_p @ ctx.up_p)])
    sol = solve(rhs)
    du_b, deb_b = sol[:nf], sol[nf:]
    d_f = (blocks.J_pp @ ctx.up_p + blocks.J_pf @ du_b + blocks.J_ue_p @ deb_b) * alpha
    return Increment(d_m=alpha, d_uf=du_b * alpha, d_f=d_f, d_eb=deb_b * alpha)


# ---------------------------------------------------------------------------
# Unified arc-length: correctors
# ---------------------------------------------------------------------------

def _pc_local_parts(ctx, bundle, blocks):
    solve = factorize(blocks.J_ff)
    du_a = solve(-bundle.r_f)
    du_b = solve(-(blocks.J_fp @ ctx.up_p))
    f_a = bundle.r_p + blocks.J_pf @ du_a
    f_b = blocks.J_pp @ ctx.up_p + blocks.J_pf @ du_b
    return du_a, du_b, f_a, f_b


def ual_pc_local_corrector(ctx: AnalysisContext, bundle, blocks, inc: Increment,
                           beta: float) -> Increment:
    """Closed-form consistent correction (local law).

    Returns the correction triple as an :class:`Increment`; raises
    :class:`StepCut` on a singular tangent or a vanishing constraint-row
    denominator.
    """
    du_a, du_b, f_a, f_b = _pc_local_parts(ctx, bundle, blocks)
    b2 = beta * beta
    up2 = float(ctx.up_p @ ctx.up_p)
    num = -(bundle.g + 2.0 * float(inc.d_uf @ du_a) + 2.0 * b2 * float(inc.d_f @ f_a))
    den = 2.0 * inc.d_m * up2 + 2.0 * float(inc.d_uf @ du_b) + 2.0 * b2 * float(inc.d_f @ f_b)
    if den == 0.0 or not math.isfinite(den):
        raise StepCut("vanishing constraint denominator")
    dm = num / den
    if not math.isfinite(dm):
        raise StepCut("non-finite load-fraction correction")
    return Increment(d_m=dm, d_uf=du_a + dm * du_b, d_f=f_a + dm * f_b)


def ual_pc_nonlocal_corrector(ctx: AnalysisContext, bundle, blocks, inc: Increment,
                              beta: float) -> Increment:
    """Closed-form consistent correction (gradient law).

    The inner inverses of the coefficient formulas are realized as one
    factorized solve of the coupled (free-displacement, nonlocal-strain)
    block with two right-hand sides.
    """
    nf = len(ctx.F)
    S = sp.bmat([[blocks.J_ff, blocks.J_ue_f], [blocks.J_eu_f, blocks.J_ee]], format="csc")
    solve = factorize(S)
    sol_r = solve(np.concatenate([-bundle.r_f, -bundle.r_eps]))
    sol_u = solve(np.concatenate([-(blocks.J_fp @ ctx.up_p), -(blocks.J_eu_p @ ctx.up_p)]))
    cu, ca = sol_r[:nf], sol_r[nf:]
    du, db = sol_u[:nf], sol_u[nf:]
    f_e = bundle.r_p + blocks.J_pf @ cu + blocks.J_ue_p @ ca
    f_f = blocks.J_pp @ ctx.up_p + blocks.J_pf @ du + blocks.J_ue_p @ db
    b2 = beta * beta
    up2 = float(ctx.up_p @ ctx.up_p)
    num = -(
        bundle.g
        + 2.0 * float(inc.d_uf @ cu)
        + 2.0 * float(inc.d_eb @ ca)
        + 2.0 * b2 * float(inc.d_f @ f_e)
    )
    den = (
        2.0 * inc.d_m * up2
        + 2.0 * float(inc.d_uf @ du)
        + 2.0 * float(inc.d_eb @ db)
        + 2.0 * b2 * float(inc.d_f @ f_f)
    )
    if den == 0.0 or not math.isfinite(den):
        raise StepCut("vanishing constraint denominator")
    dm = num / den
    if not math.isfinite(dm):
        raise StepCut("non-finite load-fraction correction")
    return Increment(d_m=dm, d_uf=cu + dm * du, d_f=f_e + dm * f_f, d_eb=ca + dm * db)


def _cosine(ctx, inc_new: Increment, inc_ref: Increment, beta: float) -> float:
    b2 = beta * beta
    up2 = float(ctx.up_p @ ctx.up_p)

    def dot(a, b):
        s = a.d_m * b.d_m * up2 + float(a.d_uf @ b.d_uf) + b2 * float(a.d_f @ b.d_f)
        if a.d_eb is not None and b.d_eb is not None:
            s += float(a.d_eb @ b.d_eb)
        return s

    denom = math.sqrt(max(dot(inc_new, inc_new), 0.0) * max(dot(inc_ref, inc_ref), 0.0))
    if denom == 0.0:
        return 0.0
    return dot(inc_new, inc_ref) / denom


def ual_pnc_corrector(ctx: AnalysisContext, bundle, blocks, inc: Increment, dl: float,
                      beta: float, literal_c: bool = False) -> Increment:
    """Quadratic-constraint correction with cosine-rule root selection.

    The quadratic closes the updated increment on the arc-length sphere;
    ``literal_c`` drops the ``-dl^2`` closure term from its constant
    coefficient (compatibility path, constraint then not re-enforced).
    Raises :class:`StepCut` on a negative discriminant or when both roots
    backtrack.
    """
    du_a, du_b, f_a, f_b = _pc_local_parts(ctx, bundle, blocks)
    b2 = beta * beta
    up2 = float(ctx.up_p @ ctx.up_p)
    uf_base = inc.d_uf + du_a
    f_base = inc.d_f + f_a
    a = up2 + float(du_b @ du_b) + b2 * float(f_b @ f_b)
    b = 2.0 * (inc.d_m * up2 + float(uf_base @ du_b) + b2 * float(f_base @ f_b))
    c = (
        inc.d_m * inc.d_m * up2
        + float(uf_base @ uf_base)
        + b2 * float(f_base @ f_base)
    )
    if not literal_c:
        c -= dl * dl
    roots = _stable_roots(a, b, c)
    candidates = []
    for dm in roots:
        cand = Increment(d_m=dm, d_uf=du_a + dm * du_b, d_f=f_a + dm * f_b)
        updated = Increment(
            d_m=inc.d_m + dm, d_uf=inc.d_uf + cand.d_uf, d_f=inc.d_f + cand.d_f
        )
        candidates.append((cand, _cosine(ctx, updated, inc, beta)))
    candidates.sort(key=lambda t: t[1], reverse=True)
    best, best_cos = candidates[0]
    if best_cos <= 0.0:
        raise StepCut("both constraint roots backtrack")
    return best


# ---------------------------------------------------------------------------
# Increment drivers
# ---------------------------------------------------------------------------

def ual_increment(ctx: AnalysisContext, state: SystemState, dl: float, scheme: str,
                  n: int, literal_c: bool = False) -> StepOutcome:
    """Run one unified arc-length increment to convergence or failure.

    Iteration 1 applies the predictor; each later iteration applies one
    corrector.  An increment is accepted only after at least one
    corrector pass so the committed increment satisfies the linearized
    constraint.
    """
    controls = ctx.controls
    nonlocal_law = ctx.law == NONLOCAL
    if scheme == UAL_PNC and nonlocal_law:
        raise ValueError("the non-consistent scheme is defined for the local law only")
    try:
        if n == 1:
            base = assemble(ctx, state.u, state.f_ext, state.gp_damage,
                            state.gp_eq_strain, state.eps_bar)
            if nonlocal_law:
                inc = ual_pc_nonlocal_predictor(ctx, state, controls.alpha, 1, base.blocks)
            else:
                inc = ual_pc_local_predictor(ctx, state, controls.alpha, 1, base.blocks)
        elif nonlocal_law:
            inc = ual_pc_nonlocal_predictor(ctx, state, controls.alpha, n)
        else:
            inc = ual_pc_local_predictor(ctx, state, controls.alpha, n)
    except SolveError as exc:
        return StepOutcome(False, 0, math.inf, reason=str(exc))

    rnorm = math.inf
    g = 0.0
    for i in range(1, controls.i_total + 1):
        u, f, eb = _apply_increment(ctx, state, inc)
        res = assemble(ctx, u, f, state.gp_damage, state.gp_eq_strain, eb)
        rnorm = res.bundle.force_norm()
        g = constraint_residual(ctx, inc, dl, controls.beta)
        res.bundle.g = g
        if not math.isfinite(rnorm) or rnorm > _DIVERGENCE_NORM:
            return StepOutcome(False, i, rnorm, g, reason="diverged")
        # The constraint bound guards against the corrector drifting along
        # an equilibrium ray: such states have a tiny force residual but a
        # badly violated arc length and must not be accepted.
        if i >= 2 and rnorm <= controls.tol and abs(g) <= 10.0 * controls.tol:
            trial = _trial_payload(ctx, state, inc, res, u, f, eb)
            return StepOutcome(True, i, rnorm, g, inc, trial)
        if i == controls.i_total:
            break
        try:
            if scheme == UAL_PNC:
                delta = ual_pnc_corrector(ctx, res.bundle, res.blocks, inc, dl,
                                          controls.beta, literal_c)
            elif nonlocal_law:
                delta = ual_pc_nonlocal_corrector(ctx, res.bundle, res.blocks, inc,
                                                  controls.beta)
            else:
                delta = ual_pc_local_corrector(ctx, res.bundle, res.blocks, inc,
                                               controls.beta)
        except (SolveError, StepCut) as exc:
            return StepOutcome(False, i, rnorm, g, reason=str(exc))
        inc.d_m += delta.d_m
        inc.d_uf += delta.d_uf
        inc.d_f += delta.d_f
        if inc.d_eb is not None:
            inc.d_eb += delta.d_eb
    return StepOutcome(False, controls.i_total, rnorm, g, reason="iteration budget")


def nr_increment(ctx: AnalysisContext, state: SystemState, delta_lambda: float) -> StepOutcome:
    """Displacement-driven Newton increment (prescribed DOFs advance
    by ``delta_lambda`` times the load pattern)."""
    controls = ctx.controls
    nonlocal_law = ctx.law == NONLOCAL
    m_target = state.m_bar + delta_lambda
    u = state.u.copy()
    u[ctx.P] = m_target * ctx.up_p
    eb = state.eps_bar.copy() if nonlocal_law else None
    loaded_pos = np.searchsorted(ctx.P, ctx.loaded)
    zeros_p = np.zeros(len(ctx.P))
    nf = len(ctx.F)
    rnorm = math.inf
    solves = 0
    for _ in range(controls.i_total):
        res = assemble(ctx, u, zeros_p, state.gp_damage, state.gp_eq_strain, eb)
        parts = [res.bundle.r_f] + ([res.bundle.r_eps] if nonlocal_law else [])
        rnorm = float(np.sqrt(sum(float(p @ p) for p in parts)))
        if not math.isfinite(rnorm) or rnorm > _DIVERGENCE_NORM:
            return StepOutcome(False, solves, rnorm, reason="diverged")
        if rnorm <= controls.tol:
            f_ext = res.f_int[ctx.P]
            inc = Increment(
                d_m=delta_lambda,
                d_uf=u[ctx.F] - state.u[ctx.F],
                d_f=f_ext - state.f_ext,
                d_eb=None if eb is None else eb - state.eps_bar,
            )
            trial = {
                "u": u,
                "f_ext": f_ext,
                "eps_bar": eb,
                "m_bar": m_target,
                "gp_damage": res.gp_damage,
                "gp_eq": res.gp_eq_strain,
                "reaction": float(res.f_int[ctx.control_dofs].sum()),
            }
            return StepOutcome(True, max(solves, 1), rnorm, 0.0, inc, trial)
        try:
            if nonlocal_law:
                S = sp.bmat(
                    [[res.blocks.J_ff, res.blocks.J_ue_f],
                     [res.blocks.J_eu_f, res.blocks.J_ee]],
                    format="csc",
                )
                sol = factorize(S)(np.concatenate([-res.bundle.r_f, -res.bundle.r_eps]))
                u[ctx.F] += sol[:nf]
                eb = eb + sol[nf:]
            else:
                u[ctx.F] += factorize(res.blocks.J_ff)(-res.bundle.r_f)
        except SolveError as exc:
            return StepOutcome(False, solves, rnorm, reason=str(exc))
        solves += 1
    return StepOutcome(False, solves, rnorm, reason="iteration budget")


def fal_increment(ctx: AnalysisContext, state: SystemState, fal: FALState,
                  dl: float) -> StepOutcome:
    """Force-controlled arc-length increment (cylindrical Crisfield).

    ``ctx`` must be the FAL context, where only the zero-valued supports
    are prescribed and the loaded DOFs carry the fixed pattern ``q``
    scaled by the unknown load factor.  The constraint acts on the
    updated increment totals; the quadratic root is selected by maximum
    cosine with the previous increment direction.
    """
    controls = ctx.controls
    nonlocal_law = ctx.law == NONLOCAL
    b2 = controls.beta ** 2
    qf = fal.q[ctx.F]
    qq = float(fal.q @ fal.q)
    nf = len(ctx.F)
    zeros_p = np.zeros(len(ctx.P))

    def coupled_solve(blocks):
        if nonlocal_law:
            S = sp.bmat([[blocks.J_ff, blocks.J_ue_f], [blocks.J_eu_f, blocks.J_ee]],
                        format="csc")
            return factorize(S)
        return factorize(blocks.J_ff)

    def two_solves(blocks, r_free, r_eps):
        solve = coupled_solve(blocks)
        if nonlocal_law:
            sol_a = solve(np.concatenate([-r_free, -r_eps]))
            sol_b = solve(np.concatenate([qf, np.zeros(ctx.dofmap.n_nl)]))
        else:
            sol_a = solve(-r_free)
            sol_b = solve(qf)
        return (sol_a[:nf], sol_a[nf:] if nonlocal_law else None,
                sol_b[:nf], sol_b[nf:] if nonlocal_law else None)

    def metric(x1, x2):
        du1, deb1, dl1 = x1
        du2, deb2, dl2 = x2
        s = float(du1 @ du2) + b2 * qq * dl1 * dl2
        if nonlocal_law:
            s += float(deb1 @ deb2)
        return s

    if fal.d_u is not None:
        # Increment-copy predictor: reuse the last converged increment.
        # A pure tangent predictor overshoots the sharp snap-back bend and
        # lands the continuation on a spurious branch.
        d_u = fal.d_u.copy()
        d_eb = fal.d_eb.copy() if nonlocal_law else None
        d_lam = fal.d_lam
    else:
        # First increment: tangent direction scaled onto the sphere.
        res0 = assemble(ctx, state.u, zeros_p, state.gp_damage,
                        state.gp_eq_strain, state.eps_bar)
        try:
            _, _, du_b, deb_b = two_solves(res0.blocks, np.zeros(nf),
                                           np.zeros(ctx.dofmap.n_nl))
        except SolveError as exc:
            return StepOutcome(False, 0, math.inf, reason=str(exc))
        norm2 = metric((du_b, deb_b, 1.0), (du_b, deb_b, 1.0))
        d_lam = dl / math.sqrt(norm2) if norm2 > 0.0 else dl
        d_u = du_b * d_lam
        d_eb = deb_b * d_lam if nonlocal_law else None

    rnorm = math.inf
    g = 0.0
    for i in range(1, controls.i_total + 1):
        u = state.u.copy()
        u[ctx.F] += d_u
        eb = state.eps_bar + d_eb if nonlocal_law else None
        lam_t = fal.lam + d_lam
        res = assemble(ctx, u, zeros_p, state.gp_damage, state.gp_eq_strain, eb)
        r_free = res.bundle.r_f - lam_t * qf
        parts = [r_free] + ([res.bundle.r_eps] if nonlocal_law else [])
        rnorm = float(np.sqrt(sum(float(p @ p) for p in parts)))
        g = metric((d_u, d_eb, d_lam), (d_u, d_eb, d_lam)) - dl * dl
        if not math.isfinite(rnorm) or rnorm > _DIVERGENCE_NORM:
            return StepOutcome(False, i, rnorm, g, reason="diverged")
        if i >= 2 and rnorm <= controls.tol and abs(g) <= 10.0 * controls.tol:
            inc = Increment(d_m=d_lam, d_uf=d_u, d_f=np.zeros(len(ctx.P)), d_eb=d_eb)
            trial = {
                "u": u,
                "f_ext": res.f_int[ctx.P],
                "eps_bar": eb,
                "m_bar": lam_t,
                "gp_damage": res.gp_damage,
                "gp_eq": res.gp_eq_strain,
                "reaction": float(res.f_int[fal.control].sum()),
            }
            return StepOutcome(True, i, rnorm, g, inc, trial)
        if i == controls.i_total:
            break
        try:
            du_a, deb_a, du_b, deb_b = two_solves(res.blocks, r_free, res.bundle.r_eps)
        except SolveError as exc:
            return StepOutcome(False, i, rnorm, g, reason=str(exc))
        u_base = d_u + du_a
        eb_base = d_eb + deb_a if nonlocal_law else None
        a = metric((du_b, deb_b, 1.0), (du_b, deb_b, 1.0))
        bq = 2.0 * metric((u_base, eb_base, d_lam), (du_b, deb_b, 1.0))
        cq = metric((u_base, eb_base, d_lam), (u_base, eb_base, d_lam)) - dl * dl
        try:
            roots = _stable_roots(a, bq, cq)
        except StepCut as exc:
            return StepOutcome(False, i, rnorm, g, reason=str(exc))
        ref = fal.prev_dir if fal.prev_dir is not None else (d_u, d_eb, d_lam)
        best, best_cos = None, -math.inf
        for dlam_c in roots:
            cand = (
                u_base + dlam_c * du_b,
                eb_base + dlam_c * deb_b if nonlocal_law else None,
                d_lam + dlam_c,
            )
            n1 = metric(cand, cand)
            n2 = metric(ref, ref)
            cos = metric(cand, ref) / math.sqrt(n1 * n2) if n1 > 0.0 and n2 > 0.0 else 0.0
            if cos > best_cos:
                best, best_cos = cand, cos
        if best_cos <= 0.0:
            return StepOutcome(False, i, rnorm, g, reason="both constraint roots backtrack")
        d_u, d_eb, d_lam = best
    return StepOutcome(False, controls.i_total, rnorm, g, reason="iteration budget")


# ---------------------------------------------------------------------------
# Analysis driver
# ---------------------------------------------------------------------------

def make_fal_setup(ctx: AnalysisContext) -> tuple[AnalysisContext, FALState]:
    """Derive the force-controlled context and reference load from ``ctx``.

    Only zero-valued constraints stay prescribed; the loaded DOFs become
    free and carry a uniform force pattern scaled so a unit load factor
    matches the total elastic reaction at the full prescribed
    displacement.
    """
    supports = BCSpec(tuple(c for c in ctx.bc_spec.constraints if c[2] == 0.0))
    dm_fal = build_dof_map(ctx.mesh, supports, ctx.law)
    ctx_fal = replace(ctx, bc_spec=supports, dofmap=dm_fal, elem=ctx.elem, C=ctx.C)

    # Elastic reference reaction under the full prescribed displacement.
    gp_zero = np.zeros((ctx.mesh.n_elements, ctx.n_gp))
    eb_zero = np.zeros(ctx.dofmap.n_nl) if ctx.law == NONLOCAL else None
    base = assemble(ctx, np.zeros(ctx.dofmap.n_disp_dofs), np.zeros(len(ctx.P)),
                    gp_zero, gp_zero, eb_zero)
    duf = factorize(base.blocks.J_ff)(-(base.blocks.J_fp @ ctx.up_p))
    u_el = ctx.up.copy()
    u_el[ctx.F] += duf
    f_int = base.blocks.K_uu @ u_el
    loaded = ctx.loaded
    total = float(f_int[loaded].sum())
    q = np.zeros(ctx.dofmap.n_disp_dofs)
    q[loaded] = total / len(loaded)
    return ctx_fal, FALState(q=q, loaded=loaded, control=ctx.control_dofs)


def _commit(state: SystemState, outcome: StepOutcome) -> None:
    t = outcome.trial
    state.u = t["u"]
    state.f_ext = t["f_ext"]
    state.m_bar = t["m_bar"]
    state.eps_bar = t["eps_bar"]
    state.gp_damage = t["gp_damage"]
    state.gp_eq_strain = t["gp_eq"]
    state.last_increment = outcome.increment


def run_analysis(ctx: AnalysisContext, solver: str, recorder=None,
                 max_increments: int = 200_000, literal_c: bool = False) -> AnalysisResult:
    """Trace the equilibrium path with the requested solver.

    Increments run until the cumulative load fraction reaches 1 (for FAL,
    until the control-point displacement reaches its target), the arc
    length collapses at the stall floor, or the increment budget runs
    out.  Converged increments are appended to the history; failed ones
    shrink the arc length and retry from the last converged state.  The
    final increment of a completed displacement-driven path is re-solved
    at exactly full load.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    controls = ctx.controls
    target_disp = _control_target(ctx)

    run_ctx = ctx
    fal = None
    if solver == FAL:
        run_ctx, fal = make_fal_setup(ctx)

    state = SystemState.initial(run_ctx.dofmap, run_ctx.mesh.n_elements,
                                run_ctx.n_gp, run_ctx.law == NONLOCAL)
    history: list[IncrementRecord] = []
    diagnostics = {"abs_g": [], "irreversibility_min": 0.0, "reasons": []}
    dl = controls.dl0
    stall_floor = max(controls.dl_min, controls.dl_max * _STALL_FRACTION)
    failures = 0
    status = PARTIAL_PATH
    n = 1
    while n <= max_increments:
        if solver == NR:
            dlam = min(dl, 1.0 - state.m_bar)
            outcome = nr_increment(run_ctx, state, dlam)
        elif solver == FAL:
            outcome = fal_increment(run_ctx, state, fal, dl)
        else:
            outcome = ual_increment(run_ctx, state, dl, solver, n, literal_c)

        reversed_path = (
            outcome.converged
            and solver != NR
            and _reverses_path(run_ctx, outcome.increment, state.last_increment,
                               controls.beta)
        )
        if reversed_path:
            outcome = StepOutcome(False, outcome.iterations, outcome.residual_norm,
                                  outcome.g, reason="converged onto the reversed branch")
        if outcome.converged:
            failures = 0
            if solver in (UAL_PC, UAL_PNC) and outcome.trial["m_bar"] > 1.0:
                # Re-solve the final increment at exactly full load.
                clamped = nr_increment(run_ctx, state, 1.0 - state.m_bar)
                clamped.g = 0.0
                outcome = clamped
                if not outcome.converged:
                    outcome.reason = "full-load clamp failed: " + outcome.reason
            _finish_increment(run_ctx, ctx, solver, state, outcome, fal, n, dl,
                              history, diagnostics, recorder, target_disp)
            n += 1
            if _is_complete(solver, state, history, target_disp):
                status = FULL_PATH
                break
            if history[-1].m_bar <= 0.0:
                # The continuation left the loading program (fully unloaded
                # along a residual branch); there is no path back to full
                # load from here.
                diagnostics["reasons"].append((n, "path left the loading range"))
                break
            dl = update_arc_length(dl, outcome.iterations, controls)
        else:
            failures += 1
            diagnostics["reasons"].append((n, outcome.reason))
            new_dl = update_arc_length(dl, controls.i_total, controls)
            if (
                new_dl >= dl
                or new_dl < stall_floor
                or failures > _MAX_CONSECUTIVE_FAILURES
            ):
                status = PARTIAL_PATH
                break
            dl = new_dl
    return AnalysisResult(history=history, status=status, state=state,
                          diagnostics=diagnostics)


def _control_target(ctx: AnalysisContext) -> float:
    values = [c[2] for c in ctx.bc_spec.constraints if c[2] != 0.0]
    if not values:
        return 0.0
    return max(values, key=abs)


def _reverses_path(ctx: AnalysisContext, inc: Increment, prev: Increment | None,
                   beta: float) -> bool:
    """True when a converged increment retraces the previous one.

    The equilibrium-path tangent rotates continuously, so for a small
    enough arc length consecutive increments keep a positive cosine; a
    non-positive cosine means the continuation doubled back onto the
    branch it came from and the increment must be rejected.  The first
    increment has no predecessor; there the loading program itself fixes
    the forward direction (positive load fraction).
    """
    if inc is None:
        return False
    if prev is None:
        return inc.d_m <= 0.0
    return _cosine(ctx, inc, prev, beta) <= 0.0


def _is_complete(solver, state, history, target_disp) -> bool:
    if solver == FAL:
        if not history:
            return False
        return abs(history[-1].applied_disp) >= abs(target_disp) * (1.0 - 1e-12)
    return state.m_bar >= 1.0 - 1e-12


def _finish_increment(run_ctx, ctx, solver, state, outcome, fal, n, dl, history,
                      diagnostics, recorder, target_disp) -> None:
    delta_d = outcome.trial["gp_damage"] - state.gp_damage
    diagnostics["irreversibility_min"] = min(
        diagnostics["irreversibility_min"], float(delta_d.min()) if delta_d.size else 0.0
    )
    if solver == FAL:
        inc = outcome.increment
        fal.lam = outcome.trial["m_bar"]
        fal.d_u = inc.d_uf.copy()
        fal.d_eb = None if inc.d_eb is None else inc.d_eb.copy()
        fal.d_lam = inc.d_m
        fal.prev_dir = (fal.d_u, fal.d_eb, fal.d_lam)
        applied = float(np.mean(outcome.trial["u"][fal.control]))
        m_report = applied / target_disp if target_disp else outcome.trial["m_bar"]
    else:
        applied = outcome.trial["m_bar"] * target_disp
        m_report = outcome.trial["m_bar"]
    _commit(state, outcome)
    if solver in (UAL_PC, UAL_PNC):
        diagnostics["abs_g"].append(abs(outcome.g))
    record = IncrementRecord(
        n=n,
        m_bar=m_report,
        applied_disp=applied,
        reaction=outcome.trial["reaction"],
        iterations=outcome.iterations,
        dl=dl,
        max_damage=float(state.gp_damage.max()) if state.gp_damage.size else 0.0,
    )
    history.append(record)
    if recorder is not None:
        recorder(record, outcome, state)
