"""Elasticity, equivalent-strain measures and the Mazars damage law.

All constitutive functions are vectorized: strain arguments may carry
arbitrary leading batch dimensions with the Voigt axis last
(1D: ``(..., 1)``, 2D plane strain: ``(..., 3)`` as (eps_xx, eps_yy,
gamma_xy) with engineering shear).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MEASURE_PRINCIPAL = "principal"
MEASURE_MVM = "mvm"

# Fallback radius for the coalesced-eigenvalue kink of the principal
# measure; keeps gradients finite without affecting smooth states.
_TINY = 1e-300


@dataclass(frozen=True)
class ElasticityParams:
    """Isotropic elasticity, given as (E, nu) with E in MPa."""

    E: float
    nu: float = 0.0
    plane_strain: bool = True

    def __post_init__(self):
        if self.E <= 0:
            raise ValueError(f"E must be positive, got {self.E}")
        if not 0.0 <= self.nu < 0.5:
            raise ValueError(f"nu must lie in [0, 0.5), got {self.nu}")
        if not self.plane_strain:
            raise ValueError("only plane-strain 2D is supported")

    @staticmethod
    def from_shear(mu: float, nu: float) -> "ElasticityParams":
        return ElasticityParams(E=2.0 * mu * (1.0 + nu), nu=nu)


def elasticity_tensor(params: ElasticityParams, dim: int) -> np.ndarray:
    """Voigt elasticity matrix: ``[[E]]`` in 1D, 3x3 plane strain in 2D."""
    if dim == 1:
        return np.array([[params.E]])
    if dim != 2:
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    E, nu = params.E, params.nu
    f = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    return np.array(
        [
            [f * (1.0 - nu), f * nu, 0.0],
            [f * nu, f * (1.0 - nu), 0.0],
            [0.0, 0.0, 0.5 * E / (1.0 + nu)],
        ]
    )


@dataclass(frozen=True)
class MazarsParams:
    """Mazars damage evolution parameters.

    ``eps_d`` is the damage threshold strain, ``a`` and ``b`` the two
    shape parameters, ``k_ratio`` the compressive/tensile strength ratio
    of the modified von Mises measure, and ``measure`` selects the
    equivalent-strain definition.
    """

    eps_d: float = 1e-4
    a: float = 0.7
    b: float = 1e4
    k_ratio: float = 10.0
    measure: str = MEASURE_PRINCIPAL

    def __post_init__(self):
        if self.eps_d <= 0:
            raise ValueError("eps_d must be positive")
        if not 0.0 < self.a <= 1.0:
            raise ValueError("a must lie in (0, 1]")
        if self.b <= 0:
            raise ValueError("b must be positive")
        if self.k_ratio < 1.0:
            raise ValueError("k_ratio must be >= 1")
        if self.measure not in (MEASURE_PRINCIPAL, MEASURE_MVM):
            raise ValueError(f"unknown measure {self.measure!r}")


# ---------------------------------------------------------------------------
# Equivalent-strain measures and their Voigt-strain gradients
# ---------------------------------------------------------------------------

def _principal_2d(strain):
    """Principal strains of the in-plane tensor: (mean, radius)."""
    exx, eyy, gxy = strain[..., 0], strain[..., 1], strain[..., 2]
    m = 0.5 * (exx + eyy)
    q = 0.5 * (exx - eyy)
    s = 0.5 * gxy
    r = np.sqrt(q * q + s * s)
    return m, q, s, r


def eq_strain_principal(strain: np.ndarray, dim: int) -> np.ndarray:
    """Mazars tension measure: root of summed squared positive principal strains.

    Under plane strain the out-of-plane principal strain is zero and
    drops out of the sum.
    """
    strain = np.asarray(strain, dtype=float)
    if dim == 1:
        return np.maximum(strain[..., 0], 0.0)
    m, _q, _s, r = _principal_2d(strain)
    e1 = np.maximum(m + r, 0.0)
    e2 = np.maximum(m - r, 0.0)
    return np.sqrt(e1 * e1 + e2 * e2)


def eq_strain_principal_grad(strain: np.ndarray, dim: int) -> np.ndarray:
    """Gradient of the tension measure with respect to Voigt strain."""
    strain = np.asarray(strain, dtype=float)
    if dim == 1:
        return np.where(strain > 0.0, 1.0, 0.0)
    m, q, s, r = _principal_2d(strain)
    eq = eq_strain_principal(strain, dim)
    r_safe = np.where(r > 0.0, r, _TINY)
    # d(eps_1,2)/d(exx,eyy,gxy); the shear slot differentiates wrt gamma.
    dr = np.stack([0.5 * q / r_safe, -0.5 * q / r_safe, 0.5 * s / r_safe], axis=-1)
    dm = np.zeros_like(dr)
    dm[..., 0] = 0.5
    dm[..., 1] = 0.5
    e1 = m + r
    e2 = m - r
    act1 = np.where(e1 > 0.0, e1, 0.0)[..., None]
    act2 = np.where(e2 > 0.0, e2, 0.0)[..., None]
    eq_safe = np.where(eq > 0.0, eq, 1.0)[..., None]
    grad = (act1 * (dm + dr) + act2 * (dm - dr)) / eq_safe
    return np.where(eq[..., None] > 0.0, grad, 0.0)


def eq_strain_mvm(strain: np.ndarray, nu: float, k_ratio: float) -> np.ndarray:
    """Modified von Mises equivalent strain (2D plane strain).

    Uses the strain invariants I1 = tr(eps) and J2 = 3 tr(eps.eps) - tr(eps)^2
    of the plane-strain tensor (eps_zz = 0).
    """
    strain = np.asarray(strain, dtype=float)
    exx, eyy, gxy = strain[..., 0], strain[..., 1], strain[..., 2]
    i1 = exx + eyy
    j2 = 3.0 * (exx * exx + eyy * eyy + 0.5 * gxy * gxy) - i1 * i1
    k = k_ratio
    a0 = (k - 1.0) / (2.0 * k * (1.0 - 2.0 * nu))
    a1 = ((k - 1.0) / (1.0 - 2.0 * nu)) ** 2
    a2 = 2.0 * k / (1.0 + nu) ** 2
    root = np.sqrt(np.maximum(a1 * i1 * i1 + a2 * j2, 0.0))
    return a0 * i1 + root / (2.0 * k)


def eq_strain_mvm_grad(strain: np.ndarray, nu: float, k_ratio: float) -> np.ndarray:
    """Gradient of the modified von Mises measure wrt Voigt strain."""
    strain = np.asarray(strain, dtype=float)
    exx, eyy, gxy = strain[..., 0], strain[..., 1], strain[..., 2]
    i1 = exx + eyy
    j2 = 3.0 * (exx * exx + eyy * eyy + 0.5 * gxy * gxy) - i1 * i1
    k = k_ratio
    a0 = (k - 1.0) / (2.0 * k * (1.0 - 2.0 * nu))
    a1 = ((k - 1.0) / (1.0 - 2.0 * nu)) ** 2
    a2 = 2.0 * k / (1.0 + nu) ** 2
    root = np.sqrt(np.maximum(a1 * i1 * i1 + a2 * j2, 0.0))
    di1 = np.zeros(strain.shape)
    di1[..., 0] = 1.0
    di1[..., 1] = 1.0
    dj2 = np.stack([6.0 * exx - 2.0 * i1, 6.0 * eyy - 2.0 * i1, 3.0 * gxy], axis=-1)
    root_safe = np.where(root > 0.0, root, _TINY)
    inner = (2.0 * a1 * i1[..., None] * di1 + a2 * dj2) / (4.0 * k * root_safe[..., None])
    return a0 * di1 + np.where(root[..., None] > 0.0, inner, 0.0)


def equivalent_strain(strain, dim, mazars: MazarsParams, nu: float):
    if mazars.measure == MEASURE_MVM:
        if dim != 2:
            raise ValueError("modified von Mises measure requires 2D")
        return eq_strain_mvm(strain, nu, mazars.k_ratio)
    return eq_strain_principal(strain, dim)


def equivalent_strain_grad(strain, dim, mazars: MazarsParams, nu: float):
    if mazars.measure == MEASURE_MVM:
        if dim != 2:
            raise ValueError("modified von Mises measure requires 2D")
        return eq_strain_mvm_grad(strain, nu, mazars.k_ratio)
    return eq_strain_principal_grad(strain, dim)


# ---------------------------------------------------------------------------
# Mazars evolution
# ---------------------------------------------------------------------------

def mazars_damage(eq_strain, params: MazarsParams):
    """Damage as a function of equivalent strain; 0 below the threshold."""
    eq = np.asarray(eq_strain, dtype=float)
    eps_d, a, b = params.eps_d, params.a, params.b
    eq_safe = np.where(eq >= eps_d, eq, 1.0)
    arg = np.where(eq >= eps_d, eq - eps_d, 0.0)
    d = 1.0 - eps_d * (1.0 - a) / eq_safe - a * np.exp(-b * arg)
    return np.where(eq < eps_d, 0.0, d)


def mazars_damage_derivative(eq_strain, params: MazarsParams):
    """d(damage)/d(equivalent strain); 0 below the threshold."""
    eq = np.asarray(eq_strain, dtype=float)
    eps_d, a, b = params.eps_d, params.a, params.b
    eq_safe = np.where(eq >= eps_d, eq, 1.0)
    arg = np.where(eq >= eps_d, eq - eps_d, 0.0)
    dp = eps_d * (1.0 - a) / (eq_safe * eq_safe) + a * b * np.exp(-b * arg)
    return np.where(eq < eps_d, 0.0, dp)


@dataclass(frozen=True)
class GaussPointResponse:
    """Gated per-point damage state: value, tangent slope, strain, freeze flag."""

    d: float
    d_prime: float
    eq_strain: float
    gated: bool


def gate(eq_strain_trial, eq_strain_prev, d_prev, params: MazarsParams, controls):
    """Strain-tolerance gating of damage growth and its derivative.

    If the trial equivalent strain exceeds the last converged one by more
    than the strain tolerance, fresh damage (capped at ``d_max``, with the
    derivative zeroed when the cap is active) is returned; otherwise the
    converged damage is kept frozen with a zero derivative.  The returned
    damage never drops below ``d_prev``.

    Scalar inputs yield a :class:`GaussPointResponse`; array inputs yield
    ``(d, d_prime, gated)`` arrays.
    """
    scalar = np.isscalar(eq_strain_trial) or np.ndim(eq_strain_trial) == 0
    eq = np.atleast_1d(np.asarray(eq_strain_trial, dtype=float))
    eq_prev = np.broadcast_to(np.asarray(eq_strain_prev, dtype=float), eq.shape)
    d_prev_arr = np.broadcast_to(np.asarray(d_prev, dtype=float), eq.shape)

    fresh = (eq - eq_prev) > controls.st
    d_new = mazars_damage(eq, params)
    dp_new = mazars_damage_derivative(eq, params)
    capped = d_new >= controls.d_max
    d_new = np.minimum(d_new, controls.d_max)
    dp_new = np.where(capped, 0.0, dp_new)
    # Irreversibility: non-monotone iterates may not lower damage.
    rising = d_new > d_prev_arr
    d = np.where(fresh & rising, d_new, d_prev_arr)
    dp = np.where(fresh & rising, dp_new, 0.0)
    gated = ~(fresh & rising)
    if scalar:
        return GaussPointResponse(float(d[0]), float(dp[0]), float(eq[0]), bool(gated[0]))
    return d, dp, gated
