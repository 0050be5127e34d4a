"""Independent reference computations ("oracles") for cross-checking.

Each oracle deliberately avoids the main pipeline's code paths: Riemannian
quantities come from closed-form Christoffel symbols of the entry's a(x),
the Funk curvature from the projectively flat spray, Gauss curvature from
spectral differentiation of the conformal factor.
"""

from __future__ import annotations

import numpy as np

from .grids import BaseGrid
from .jets import jet_variables, sqrt_

__all__ = [
    "riemannian_christoffel",
    "riemannian_killing",
    "riemannian_divergence",
    "gauss_curvature_spectral",
    "funk_pde_residual",
    "funk_ricci_projective",
]


def riemannian_christoffel(entry, x) -> np.ndarray:
    """Christoffel symbols of a Riemannian entry from its closed-form a, da.

    Gamma^i_jk = 1/2 a^{im} (d_k a_mj + d_j a_mk - d_m a_jk); shape (..., n, n, n).
    """
    if entry.a_fun is None or entry.da_fun is None:
        raise ValueError("entry carries no Riemannian reference data")
    x = np.asarray(x, dtype=float)
    a = entry.a_fun(x)
    da = entry.da_fun(x)  # (..., i, j, k) = d a_ij / dx^k
    ai = np.linalg.inv(a)
    return 0.5 * (
        np.einsum("...im,...mjk->...ijk", ai, da)
        + np.einsum("...im,...mkj->...ijk", ai, da)
        - np.einsum("...im,...jkm->...ijk", ai, da)
    )


def riemannian_killing(entry, x, X, dX) -> np.ndarray:
    """Symmetrized covariant derivative nabla_i X_j + nabla_j X_i (Riemannian).

    ``X``/``dX`` are closed-form callables: X(x) -> (..., n), dX(x) -> (..., k, i)
    = d X^k / dx^i.
    """
    x = np.asarray(x, dtype=float)
    a = entry.a_fun(x)
    gam = riemannian_christoffel(entry, x)
    Xv = X(x)
    dXv = dX(x)
    nab = dXv + np.einsum("...kmi,...m->...ki", gam, Xv)  # nabla_i X^k
    low = np.einsum("...jk,...ki->...ij", a, nab)
    return low + np.swapaxes(low, -1, -2)


def riemannian_divergence(entry, x, h, dh) -> np.ndarray:
    """-(div h)_k = -nabla^i h_ik for a y-independent symmetric 2-form.

    ``h``/``dh`` closed-form: h(x) -> (..., i, j), dh(x) -> (..., i, j, m).
    """
    x = np.asarray(x, dtype=float)
    ai = np.linalg.inv(entry.a_fun(x))
    gam = riemannian_christoffel(entry, x)
    hv = h(x)
    dhv = dh(x)
    nab = (
        dhv
        - np.einsum("...rim,...rk->...ikm", gam, hv)
        - np.einsum("...rkm,...ir->...ikm", gam, hv)
    )
    return -np.einsum("...im,...ikm->...k", ai, nab)


def gauss_curvature_spectral(u_field: np.ndarray, grid: BaseGrid) -> np.ndarray:
    """K = -exp(-2u) Lap(u) for the metric exp(2u) delta, u sampled on the grid."""
    from .grids import base_derivative

    lap = base_derivative(u_field, grid, 0, 2, "spectral") + base_derivative(
        u_field, grid, 1, 2, "spectral"
    )
    return -np.exp(-2.0 * u_field) * lap


def funk_pde_residual(fs, x, y) -> float:
    """Max residual of the defining PDE dF/dx^k = F dF/dy^k of the disk metric."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs, ys = jet_variables(x, y, border=1, forder=1)
    F = sqrt_(fs.f2(xs, ys))
    worst = 0.0
    for k in range(2):
        lhs = F.base_deriv(k).value()
        rhs = F.value() * F.fiber_deriv(k).value()
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def funk_ricci_projective(fs, x, y) -> np.ndarray:
    """H(u,u) of a projectively flat spray G^i = P y^i with P = F/2.

    For such sprays Ric = (n-1)(P^2 - y^m dP/dx^m), so
    H(u,u) = (n-1)(P^2 - P_0)/F^2.  Uses only F-jets, never the metric
    pipeline.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs, ys = jet_variables(x, y, border=1, forder=1)
    F = sqrt_(fs.f2(xs, ys))
    P = 0.5 * F.value()
    P0 = np.zeros_like(P)
    for m in range(2):
        P0 += y[..., m] * 0.5 * F.base_deriv(m).value()
    n = 2
    return (n - 1) * (P * P - P0) / (F.value() ** 2)
