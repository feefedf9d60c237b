"""Residual and consistent-tangent assembly for local and gradient damage.

The assembled displacement tangent is the exact derivative of the
internal force, including the damage chain-rule term for the local law:

    K_uu = int B^T [ (1-d) C - (C eps) (d' * deq/deps) ] B dOmega

For the gradient law, damage depends on the nodal nonlocal strain, so
K_uu keeps only the secant (1-d) C part and the coupling blocks carry
the damage and source derivatives:

    K_ue = -int B^T d'(ebar) (C eps) N dOmega
    K_eu = -int N^T (deq*/deps) B dOmega
    K_ee =  int N^T N + B^T c B dOmega

All blocks are validated against central finite differences of the
residuals in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import materials
from .elements import ElementData, precompute
from .materials import ElasticityParams, MazarsParams, elasticity_tensor, gate
from .mesh import LOCAL, NONLOCAL, BCSpec, DofMap, Mesh, loaded_dofs, prescribed_pattern
from .state import ControlParams, Increment

COUPLING_EXACT = "exact"
COUPLING_SIMPLIFIED = "simplified"


@dataclass
class AnalysisContext:
    """Immutable per-analysis bundle of mesh, partition and parameters."""

    mesh: Mesh
    dofmap: DofMap
    bc_spec: BCSpec
    elasticity: ElasticityParams
    mazars: MazarsParams
    controls: ControlParams
    law: str = LOCAL
    stiffness_scale: np.ndarray | None = None
    nonlocal_coupling: str = COUPLING_EXACT
    elem: ElementData = None
    up: np.ndarray = None
    C: np.ndarray = None

    def __post_init__(self):
        if self.elem is None:
            self.elem = precompute(self.mesh)
        if self.up is None:
            self.up = prescribed_pattern(self.mesh, self.bc_spec)
        if self.C is None:
            self.C = elasticity_tensor(self.elasticity, self.mesh.dim)
        if self.stiffness_scale is None:
            self.stiffness_scale = np.ones(self.mesh.n_elements)
        if self.law == NONLOCAL and self.controls.lc <= 0.0:
            raise ValueError("nonlocal law requires a positive characteristic length")
        if self.nonlocal_coupling == COUPLING_SIMPLIFIED and self.mesh.dim != 1:
            raise ValueError("the simplified nonlocal coupling is defined for 1D only")
        self._pattern_cache = {}
        self._kee_cache = None

    # -- derived index helpers -------------------------------------------
    @property
    def P(self) -> np.ndarray:
        return self.dofmap.prescribed

    @property
    def F(self) -> np.ndarray:
        return self.dofmap.free

    @property
    def up_p(self) -> np.ndarray:
        return self.up[self.P]

    @property
    def loaded(self) -> np.ndarray:
        return loaded_dofs(self.mesh, self.bc_spec)

    @property
    def control_dofs(self) -> np.ndarray:
        """DOFs of the largest-magnitude constraint (reaction/control set).

        With opposed surface loads the reactions of all loaded DOFs sum
        to zero, so reporting uses the single control surface.
        """
        best = None
        for set_name, comp, value in self.bc_spec.constraints:
            if value != 0.0 and (best is None or abs(value) > abs(best[2])):
                best = (set_name, comp, value)
        if best is None:
            return np.array([], dtype=np.int64)
        nset = self.mesh.boundary_sets[best[0]]
        return nset * self.mesh.dim + best[1]

    @property
    def n_gp(self) -> int:
        return self.elem.n_gp

    def coo_pattern(self, key):
        """Cached (rows, cols) index arrays for scatter assembly."""
        if key not in self._pattern_cache:
            dof = self.elem.dof_ids
            nodes = self.mesh.elements
            if key == "uu":
                n = dof.shape[1]
                rows = np.repeat(dof, n, axis=1).ravel()
                cols = np.tile(dof, (1, n)).ravel()
            elif key == "ue":
                rows = np.repeat(dof, nodes.shape[1], axis=1).ravel()
                cols = np.tile(nodes, (1, dof.shape[1])).ravel()
            elif key == "eu":
                rows = np.repeat(nodes, dof.shape[1], axis=1).ravel()
                cols = np.tile(dof, (1, nodes.shape[1])).ravel()
            elif key == "ee":
                n = nodes.shape[1]
                rows = np.repeat(nodes, n, axis=1).ravel()
                cols = np.tile(nodes, (1, n)).ravel()
            else:
                raise KeyError(key)
            self._pattern_cache[key] = (rows, cols)
        return self._pattern_cache[key]


@dataclass
class ResidualBundle:
    """Partitioned residuals: prescribed, free, nonlocal, plus constraint."""

    r_p: np.ndarray
    r_f: np.ndarray
    r_eps: np.ndarray | None = None
    g: float = 0.0

    def force_norm(self) -> float:
        parts = [self.r_p, self.r_f]
        if self.r_eps is not None:
            parts.append(self.r_eps)
        return float(np.sqrt(sum(float(p @ p) for p in parts)))


class TangentBlocks:
    """Assembled sparse tangent with lazily sliced partition blocks."""

    def __init__(self, ctx: AnalysisContext, K_uu, K_ue=None, K_eu=None, K_ee=None):
        self._ctx = ctx
        self.K_uu = K_uu
        self.K_ue = K_ue
        self.K_eu = K_eu
        self.K_ee = K_ee
        self._cache = {}

    def _slice(self, name, matrix, rows, cols):
        if name not in self._cache:
            self._cache[name] = matrix[rows][:, cols].tocsr()
        return self._cache[name]

    @property
    def J_pp(self):
        return self._slice("pp", self.K_uu, self._ctx.P, self._ctx.P)

    @property
    def J_pf(self):
        return self._slice("pf", self.K_uu, self._ctx.P, self._ctx.F)

    @property
    def J_fp(self):
        return self._slice("fp", self.K_uu, self._ctx.F, self._ctx.P)

    @property
    def J_ff(self):
        return self._slice("ff", self.K_uu, self._ctx.F, self._ctx.F)

    @property
    def J_ue_p(self):
        return self._slice("ue_p", self.K_ue, self._ctx.P, np.arange(self.K_ue.shape[1]))

    @property
    def J_ue_f(self):
        return self._slice("ue_f", self.K_ue, self._ctx.F, np.arange(self.K_ue.shape[1]))

    @property
    def J_eu_p(self):
        return self._slice("eu_p", self.K_eu, np.arange(self.K_eu.shape[0]), self._ctx.P)

    @property
    def J_eu_f(self):
        return self._slice("eu_f", self.K_eu, np.arange(self.K_eu.shape[0]), self._ctx.F)

    @property
    def J_ee(self):
        return self.K_ee


@dataclass
class AssemblyResult:
    """Residuals, tangent blocks and the trial Gauss-point state."""

    bundle: ResidualBundle
    blocks: TangentBlocks
    f_int: np.ndarray
    gp_damage: np.ndarray
    gp_eq_strain: np.ndarray
    gp_gated: np.ndarray = None


def _gauss_strains(ctx: AnalysisContext, u: np.ndarray) -> np.ndarray:
    u_el = u[ctx.elem.dof_ids]
    return np.einsum("egsi,ei->egs", ctx.elem.B, u_el, optimize=True)


def _csr(vals, pattern, shape):
    rows, cols = pattern
    return sp.coo_matrix((vals.ravel(), (rows, cols)), shape=shape).tocsr()


def assemble_local(
    ctx: AnalysisContext,
    u: np.ndarray,
    f_ext_p: np.ndarray,
    gp_damage_prev: np.ndarray,
    gp_eq_prev: np.ndarray,
) -> AssemblyResult:
    """Assemble residuals and every tangent block of the local damage law.

    ``u`` is the full trial displacement vector and ``f_ext_p`` the
    external force acting on the prescribed DOFs (UAL unknowns or a
    solver-supplied load).  Damage is gated against the converged
    Gauss-point history (``gp_damage_prev``, ``gp_eq_prev``).
    """
    elem, C = ctx.elem, ctx.C
    eps = _gauss_strains(ctx, u)
    eq = materials.equivalent_strain(eps, ctx.mesh.dim, ctx.mazars, ctx.elasticity.nu)
    d, dp, gated = gate(eq, gp_eq_prev, gp_damage_prev, ctx.mazars, ctx.controls)

    scale = ctx.stiffness_scale[:, None]
    ce = np.einsum("st,egt->egs", C, eps, optimize=True) * scale[:, :, None]
    sigma = (1.0 - d)[:, :, None] * ce
    fe = np.einsum("egsi,egs,eg->ei", elem.B, sigma, elem.jxw, optimize=True)
    f_int = np.bincount(
        elem.dof_ids.ravel(), weights=fe.ravel(), minlength=ctx.dofmap.n_disp_dofs
    )

    geq = materials.equivalent_strain_grad(eps, ctx.mesh.dim, ctx.mazars, ctx.elasticity.nu)
    d_eff = (1.0 - d)[:, :, None, None] * (scale[:, :, None, None] * C) - np.einsum(
        "egs,eg,egt->egst", ce, dp, geq
    , optimize=True)
    ke = np.einsum("egsi,egst,egtj,eg->eij", elem.B, d_eff, elem.B, elem.jxw, optimize=True)
    K_uu = _csr(ke, ctx.coo_pattern("uu"), (ctx.dofmap.n_disp_dofs,) * 2)

    bundle = ResidualBundle(r_p=f_int[ctx.P] - f_ext_p, r_f=f_int[ctx.F])
    blocks = TangentBlocks(ctx, K_uu)
    return AssemblyResult(bundle, blocks, f_int, d, eq, gated)


def assemble_nonlocal(
    ctx: AnalysisContext,
    u: np.ndarray,
    f_ext_p: np.ndarray,
    eps_bar: np.ndarray,
    gp_damage_prev: np.ndarray,
    gp_eq_prev: np.ndarray,
) -> AssemblyResult:
    """Assemble residuals and tangent blocks of the gradient damage law.

    Damage is driven by the nodal nonlocal strain interpolated to the
    Gauss points; the committed equivalent-strain history therefore
    stores Gauss-point nonlocal strain.
    """
    elem, C = ctx.elem, ctx.C
    c = ctx.controls.c_diffusion
    nodes = ctx.mesh.elements
    n_nl = ctx.dofmap.n_nl

    eps = _gauss_strains(ctx, u)
    eb_el = eps_bar[nodes]
    eb_gp = np.einsum("gk,ek->eg", elem.N, eb_el, optimize=True)
    d, dp, gated = gate(eb_gp, gp_eq_prev, gp_damage_prev, ctx.mazars, ctx.controls)

    scale = ctx.stiffness_scale[:, None]
    ce = np.einsum("st,egt->egs", C, eps, optimize=True) * scale[:, :, None]
    sigma = (1.0 - d)[:, :, None] * ce
    fe = np.einsum("egsi,egs,eg->ei", elem.B, sigma, elem.jxw, optimize=True)
    f_int = np.bincount(
        elem.dof_ids.ravel(), weights=fe.ravel(), minlength=ctx.dofmap.n_disp_dofs
    )

    # Nonlocal-strain residual: mass, diffusion and local source terms.
    eq_loc = materials.equivalent_strain(eps, ctx.mesh.dim, ctx.mazars, ctx.elasticity.nu)
    grad_eb = np.einsum("egdk,ek->egd", elem.B_eps, eb_el, optimize=True)
    re_el = np.einsum("gk,eg,eg->ek", elem.N, eb_gp - eq_loc, elem.jxw, optimize=True)
    re_el += c * np.einsum("egdk,egd,eg->ek", elem.B_eps, grad_eb, elem.jxw, optimize=True)
    r_eps = np.bincount(nodes.ravel(), weights=re_el.ravel(), minlength=n_nl)

    # Displacement tangent keeps the secant stiffness only; the damage
    # derivative enters through the coupling block K_ue.
    d_eff = (1.0 - d)[:, :, None, None] * (scale[:, :, None, None] * C)
    ke = np.einsum("egsi,egst,egtj,eg->eij", elem.B, d_eff, elem.B, elem.jxw, optimize=True)
    K_uu = _csr(ke, ctx.coo_pattern("uu"), (ctx.dofmap.n_disp_dofs,) * 2)

    bt_ce = np.einsum("egsi,egs->egi", elem.B, ce, optimize=True)
    kue = -np.einsum("egi,eg,gk,eg->eik", bt_ce, dp, elem.N, elem.jxw, optimize=True)
    K_ue = _csr(kue, ctx.coo_pattern("ue"), (ctx.dofmap.n_disp_dofs, n_nl))

    if ctx.nonlocal_coupling == COUPLING_SIMPLIFIED:
        geq = np.ones_like(eps)
    else:
        geq = materials.equivalent_strain_grad(
            eps, ctx.mesh.dim, ctx.mazars, ctx.elasticity.nu
        )
    keu = -np.einsum("gk,egs,egsi,eg->eki", elem.N, geq, elem.B, elem.jxw, optimize=True)
    K_eu = _csr(keu, ctx.coo_pattern("eu"), (n_nl, ctx.dofmap.n_disp_dofs))

    if ctx._kee_cache is None:
        kee = np.einsum("gk,gl,eg->ekl", elem.N, elem.N, elem.jxw, optimize=True)
        kee += c * np.einsum("egdk,egdl,eg->ekl", elem.B_eps, elem.B_eps, elem.jxw, optimize=True)
        ctx._kee_cache = _csr(kee, ctx.coo_pattern("ee"), (n_nl, n_nl))
    K_ee = ctx._kee_cache

    bundle = ResidualBundle(r_p=f_int[ctx.P] - f_ext_p, r_f=f_int[ctx.F], r_eps=r_eps)
    blocks = TangentBlocks(ctx, K_uu, K_ue, K_eu, K_ee)
    return AssemblyResult(bundle, blocks, f_int, d, eb_gp, gated)


def assemble(ctx: AnalysisContext, u, f_ext_p, state_gp_damage, state_gp_eq, eps_bar=None):
    """Law dispatch: local or nonlocal assembly."""
    if ctx.law == NONLOCAL:
        return assemble_nonlocal(ctx, u, f_ext_p, eps_bar, state_gp_damage, state_gp_eq)
    return assemble_local(ctx, u, f_ext_p, state_gp_damage, state_gp_eq)


def constraint_residual(ctx: AnalysisContext, inc: Increment, dl: float, beta: float) -> float:
    """Arc-length constraint residual of the accumulated increment.

    ``g = |dx|^2 + beta^2 |df_ext|^2 - dl^2`` where ``dx`` stacks the
    prescribed and free displacement increments and, for the gradient
    law, the nonlocal-strain increment.
    """
    dup = inc.d_m * ctx.up_p
    g = float(dup @ dup + inc.d_uf @ inc.d_uf)
    if inc.d_eb is not None:
        g += float(inc.d_eb @ inc.d_eb)
    g += beta * beta * float(inc.d_f @ inc.d_f)
    return g - dl * dl
