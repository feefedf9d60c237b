"""Analysis state, solver control parameters and increment bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ControlParams:
    """Solver control parameters.

    ``tol`` bounds the 2-norm of the stacked force residual, ``st`` is the
    strain tolerance gating damage updates, ``d_max`` caps damage, and the
    ``dl*`` fields bound the arc length.  ``alpha`` is the load fraction
    applied by the very first predictor and ``beta`` weights the external
    force in the constraint (0 gives the cylindrical constraint).  ``lc``
    is the characteristic length of the gradient law (diffusion
    coefficient ``lc**2 / 2``).
    """

    tol: float = 1e-6
    st: float = 1e-12
    d_max: float = 0.999
    dl0: float = 1e-4
    dl_min: float = 0.0
    dl_max: float = 1e-4
    i_min: int = 5
    i_max: int = 12
    i_total: int = 30
    alpha: float = 1e-2
    beta: float = 0.0
    lc: float = 0.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0.0 <= self.dl_min <= self.dl0 <= self.dl_max:
            raise ValueError("require 0 <= dl_min <= dl0 <= dl_max")
        if not 0 < self.i_min < self.i_max <= self.i_total:
            raise ValueError("require 0 < i_min < i_max <= i_total")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0.0 < self.d_max < 1.0:
            raise ValueError("d_max must lie in (0, 1)")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        if self.st < 0.0:
            raise ValueError("st must be non-negative")

    @property
    def c_diffusion(self) -> float:
        return 0.5 * self.lc * self.lc


@dataclass
class Increment:
    """Accumulated increment (predictor plus applied corrections).

    ``d_m`` scales the prescribed-displacement pattern, ``d_uf`` lives on
    free DOFs, ``d_f`` on prescribed DOFs (physical external force) and
    ``d_eb`` on nonlocal-strain DOFs (``None`` for the local law).
    """

    d_m: float
    d_uf: np.ndarray
    d_f: np.ndarray
    d_eb: np.ndarray | None = None

    def copy(self) -> "Increment":
        return Increment(
            self.d_m,
            self.d_uf.copy(),
            self.d_f.copy(),
            None if self.d_eb is None else self.d_eb.copy(),
        )


@dataclass
class SystemState:
    """Converged nodal/Gauss-point state of one analysis.

    The full displacement vector ``u`` spans prescribed and free DOFs;
    ``f_ext`` holds the external-force unknowns on the prescribed DOFs
    only.  ``gp_damage`` and ``gp_eq_strain`` store the committed damage
    and equivalent strain per element and Gauss point; damage is
    non-decreasing across committed increments.
    """

    u: np.ndarray
    f_ext: np.ndarray
    m_bar: float
    gp_damage: np.ndarray
    gp_eq_strain: np.ndarray
    eps_bar: np.ndarray | None = None
    last_increment: Increment | None = None

    @staticmethod
    def initial(dofmap, n_elements: int, n_gp: int, nonlocal_law: bool) -> "SystemState":
        return SystemState(
            u=np.zeros(dofmap.n_disp_dofs),
            f_ext=np.zeros(len(dofmap.prescribed)),
            m_bar=0.0,
            gp_damage=np.zeros((n_elements, n_gp)),
            gp_eq_strain=np.zeros((n_elements, n_gp)),
            eps_bar=np.zeros(dofmap.n_nl) if nonlocal_law else None,
        )


@dataclass(frozen=True)
class IncrementRecord:
    """One converged increment of the equilibrium path."""

    n: int
    m_bar: float
    applied_disp: float
    reaction: float
    iterations: int
    dl: float
    max_damage: float
    converged: bool = True


FULL_PATH = "full"
PARTIAL_PATH = "partial"


@dataclass
class AnalysisResult:
    """History plus terminal status of one analysis run."""

    history: list
    status: str
    state: SystemState
    diagnostics: dict = field(default_factory=dict)

    @property
    def completed(self) -> bool:
        return self.status == FULL_PATH
