"""Tangent vectors of the space of Finsler metrics and variation identities.

Variations are realized as metric families (Randers-parameter paths,
conformal paths), never as raw unconstrained arrays, so membership in the
tangent space (zero-homogeneity, total symmetry of the fiber derivative) is
guaranteed by construction.  Raw arrays are accepted with explicit residual
checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .fields import (
    GridStructure,
    TensorField,
    cov_deriv_0,
    horizontal_cov_deriv,
    theta_derivative,
    fiber_partials,
)
from .grids import BaseGrid, FiberGrid
from .measure import global_inner, pair_inner
from .structures import FinslerStructure

__all__ = [
    "VariationField",
    "conformal_variation",
    "lie_derivative_metric",
    "divergence_delta",
    "codifferential",
    "trace_split",
    "adjointness_residual",
    "MetricFamily",
    "randers_family",
    "conformal_family",
    "family_variation",
    "variation_residuals",
    "VariationReport",
]


@dataclass
class VariationField:
    """Symmetric 2-form field h on SM with provenance and membership residuals."""

    h: TensorField
    provenance: str = "raw"  # conformal | lie | family | raw
    zero_homogeneity_residual: float = np.nan
    symmetry_residual: float = np.nan

    @property
    def data(self) -> np.ndarray:
        return self.h.data

    def check_membership(self, gs: GridStructure, tol: float = 1e-6) -> bool:
        """Residuals for y^k d_k h_ij = 0 and total symmetry of d_k h_ij."""
        dh = gs.fiber(self.data, 0)  # (..., i, j, k)
        e = gs.e[None, None, :, :]
        scale = 1.0 + float(np.max(np.abs(self.data)))
        zh = float(np.max(np.abs(np.einsum("...ijk,...k->...ij", dh, e)))) / scale
        sym = (
            np.abs(dh - np.swapaxes(dh, -1, -2))
            + np.abs(dh - np.swapaxes(dh, -2, -3))
        )
        sy = float(np.max(sym)) / scale
        self.zero_homogeneity_residual = zh
        self.symmetry_residual = sy
        return zh <= tol and sy <= tol


def conformal_variation(k_fun: Callable, gs: GridStructure) -> VariationField:
    """h = k(x) g: the pointwise-conformal tangent direction."""
    kx = np.asarray(k_fun(gs.x_nodes), dtype=float)
    h = kx[..., None, None, None] * gs.g
    return VariationField(TensorField(h, (0, 2), 0), provenance="conformal")


def _vector_field(X, gs: GridStructure) -> np.ndarray:
    """Sample a base vector field on the grid, broadcast over the fiber."""
    if callable(X):
        Xv = np.asarray(X(gs.x_nodes), dtype=float)  # (N1, N2, 2)
    else:
        Xv = np.asarray(X, dtype=float)
    if Xv.shape == gs.bgrid.shape + (2,):
        Xv = np.broadcast_to(Xv[:, :, None, :], gs.F2.shape + (2,)).copy()
    return Xv


def lie_derivative_metric(X, gs: GridStructure) -> VariationField:
    """(L_X^ g)_ij = nabla_i X_j + nabla_j X_i + 2 (nabla_0 X^k) C_kij.

    ``X`` is a vector field on the base (callable of the node array or a
    sampled array); X^ is its complete lift.
    """
    Xv = _vector_field(X, gs)
    Xf = TensorField(Xv, (1, 0), homogeneity=0)
    nabX = horizontal_cov_deriv(Xf, gs).data  # (..., k, i) = nabla_i X^k
    low = np.einsum("...jk,...ki->...ij", gs.g, nabX)  # nabla_i X_j
    e = gs.e[None, None, :, :]
    nab0X = np.einsum("...ki,...i->...k", nabX, e)  # nabla_0 X^k at y = e
    h = low + np.swapaxes(low, -1, -2) + 2.0 * np.einsum(
        "...k,...kij->...ij", nab0X, gs.cartan
    )
    return VariationField(TensorField(h, (0, 2), 0), provenance="lie")


def divergence_delta(h: VariationField | TensorField, gs: GridStructure) -> TensorField:
    """Adjoint of the Lie-derivative operator:

    (delta h)_k = -(nabla^i h_ik - h_kj nabla_0 C^j
                    + (nabla_0 C_kij) h^{ij} + C_kij nabla_0 h^{ij}).
    """
    hf = h.h if isinstance(h, VariationField) else h
    gi = gs.ginv
    hdata = hf.data
    # nabla^i h_ik
    nabh = horizontal_cov_deriv(TensorField(hdata, (0, 2), 0), gs).data  # (...,i,k,m)
    div = np.einsum("...im,...ikm->...k", gi, nabh)
    # h_kj nabla_0 C^j
    t2 = np.einsum("...kj,...j->...k", hdata, gs.nabla0_mean_cartan)
    # (nabla_0 C_kij) h^{ij}
    hup = np.einsum("...ia,...jb,...ab->...ij", gi, gi, hdata)
    Cdot = cov_deriv_0(TensorField(gs.cartan, (0, 3), -1), gs).data
    t3 = np.einsum("...kij,...ij->...k", Cdot, hup)
    # C_kij nabla_0 h^{ij}: metric compatibility lets nabla_0 act on h then raise
    nab0h = np.einsum(
        "...ikm,...m->...ik", nabh, gs.e[None, None, :, :]
    )
    nab0hup = np.einsum("...ia,...jb,...ab->...ij", gi, gi, nab0h)
    t4 = np.einsum("...kij,...ij->...k", gs.cartan, nab0hup)
    out = -(div - t2 + t3 + t4)
    return TensorField(out, (0, 1), homogeneity=0)


def codifferential(form: TensorField, gs: GridStructure, kind: str) -> np.ndarray:
    """Codifferential of a 1-form on SM.

    horizontal: delta a = -(nabla^j a_j - a_j nabla_0 C^j)
    vertical:   delta b = -F g^{ij} db_i/dy^j
    """
    if form.valence != (0, 1):
        raise ValueError("codifferential expects a 1-form field")
    a = form.data
    gi = gs.ginv
    if kind == "horizontal":
        nab = horizontal_cov_deriv(form, gs).data  # (..., j, m)
        div = np.einsum("...jm,...jm->...", gi, nab)
        corr = np.einsum("...j,...j->...", a, gs.nabla0_mean_cartan)
        return -(div - corr)
    if kind == "vertical":
        da = fiber_partials(a, form.homogeneity, gs.thetas)  # (..., i, j)
        return -gs.F * np.einsum("...ij,...ij->...", gi, da)
    raise ValueError(f"unknown codifferential kind {kind!r}")


def trace_split(h: VariationField | TensorField, gs: GridStructure):
    """Pointwise decomposition h = (tr_g h / n) g + h_perp with tr_g h_perp = 0."""
    hf = h.h if isinstance(h, VariationField) else h
    tr = np.einsum("...ij,...ij->...", gs.ginv, hf.data)
    conf = (tr / 2.0)[..., None, None] * gs.g
    perp = hf.data - conf
    return (
        TensorField(conf, (0, 2), hf.homogeneity),
        TensorField(perp, (0, 2), hf.homogeneity),
    )


def adjointness_residual(X, h: VariationField, gs: GridStructure) -> float:
    """|1/2 (L_X^ g, h) - (X, delta h)| / (1 + |(X, delta h)|)."""
    L = lie_derivative_metric(X, gs)
    lhs = 0.5 * global_inner(L.h, h.h, gs)
    dh = divergence_delta(h, gs)
    Xv = _vector_field(X, gs)
    rhs = pair_inner(Xv, dh.data, gs)
    return abs(lhs - rhs) / (1.0 + abs(rhs))


# ---------------------------------------------------------------------------
# metric families (curves in the space of Finsler metrics)
# ---------------------------------------------------------------------------

@dataclass
class MetricFamily:
    """One-parameter family t -> FinslerStructure, valid for |t| <= t_max."""

    make: Callable[[float], FinslerStructure]
    t_max: float = 1e-2
    kind: str = "family"  # conformal | randers | family
    k_fun: Callable | None = None  # for conformal families: F_t = exp(t k) F_0

    def structure(self, t: float) -> FinslerStructure:
        if abs(t) > self.t_max:
            raise ValueError(f"family parameter {t} beyond validity {self.t_max}")
        return self.make(t)


def conformal_family(fs: FinslerStructure, k_fun: Callable, t_max: float = 0.5) -> MetricFamily:
    """F_t = exp(t k(x)) F_0, i.e. g_t = exp(2 t k) g_0."""
    from .jets import exp_

    def make(t: float) -> FinslerStructure:
        def f2(xs, ys):
            base = fs.f2(xs, ys)
            return exp_(2.0 * t * k_fun(xs)) * base

        return FinslerStructure(
            n=fs.n, name=f"{fs.name}+conformal(t={t:g})", chart=fs.chart, f2=f2,
            supports_base_jets=fs.supports_base_jets,
        )

    return MetricFamily(make=make, t_max=t_max, kind="conformal", k_fun=k_fun)


def randers_family(
    fs: FinslerStructure, db_fun: Callable, t_max: float = 0.1
) -> MetricFamily:
    """F_t = F_0 + t * db(x) . y (Randers-type drift path)."""
    from .jets import sqrt_

    def make(t: float) -> FinslerStructure:
        def f2(xs, ys):
            F = sqrt_(fs.f2(xs, ys))
            db = db_fun(xs)
            F = F + t * (db[0] * ys[0] + db[1] * ys[1])
            return F * F

        return FinslerStructure(
            n=fs.n, name=f"{fs.name}+randers(t={t:g})", chart=fs.chart, f2=f2,
            supports_base_jets=fs.supports_base_jets,
        )

    return MetricFamily(make=make, t_max=t_max, kind="randers")


def _grid_of(family: MetricFamily, t: float, gs0: GridStructure) -> GridStructure:
    return GridStructure(family.structure(t), gs0.bgrid, gs0.fgrid, gs0.base_mode)


def family_variation(
    family: MetricFamily, gs0: GridStructure, t_step: float = 1e-4
) -> VariationField:
    """h = d g_t / dt |_0 by centered differencing of the family metric."""
    gp = _grid_of(family, +t_step, gs0).g
    gm = _grid_of(family, -t_step, gs0).g
    h = (gp - gm) / (2.0 * t_step)
    v = VariationField(TensorField(h, (0, 2), 0), provenance="family")
    v.check_membership(gs0)
    return v


@dataclass
class VariationReport:
    """Residuals of the first-variation identities along a metric family."""

    residuals: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def worst(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def summary(self) -> str:
        lines = [f"{k:34s} {v:.3e}" for k, v in sorted(self.residuals.items())]
        return "\n".join(lines)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / (1.0 + abs(b))


def variation_residuals(
    family: MetricFamily,
    gs0: GridStructure,
    t_step: float = 1e-4,
    c_fun=None,
) -> VariationReport:
    """Check the first-variation identities against centered differences.

    (a) dV/dt against both closed forms 1/2 int tr(h) eta = n/2 int h(u,u) eta;
    (b) d eta/dt nodewise against (g^{ij} - (n/2) u^i u^j) h_ij eta;
    (c) dG^i_k/dt against the covariant-derivative expression (with the spray
        variation G'^s itself taken by centered differences);
    (d) for conformal families, dI/dt against int H(u,u) tr_g(h) eta.
    """
    rep = VariationReport()
    n = 2
    gp = _grid_of(family, +t_step, gs0)
    gm = _grid_of(family, -t_step, gs0)
    h = (gp.g - gm.g) / (2.0 * t_step)
    hv = VariationField(TensorField(h, (0, 2), 0), provenance="family")
    hv.check_membership(gs0)
    rep.values["membership_zero_homog"] = hv.zero_homogeneity_residual
    rep.values["membership_symmetry"] = hv.symmetry_residual

    gi = gs0.ginv
    e = gs0.e[None, None, :, :]
    tr_h = np.einsum("...ij,...ij->...", gi, h)
    huu_dir = np.einsum("...ij,...i,...j->...", h, e, e) / gs0.F2  # h(u,u)

    # (a) volume variation, both closed forms
    dV = (gp.volume - gm.volume) / (2.0 * t_step)
    closed1 = 0.5 * gs0.integrate(tr_h)
    closed2 = (n / 2.0) * gs0.integrate(huu_dir)
    rep.residuals["V'(FD) vs 1/2 int tr(h)"] = _rel(dV, closed1)
    rep.residuals["V'(FD) vs n/2 int h(u,u)"] = _rel(dV, closed2)
    rep.residuals["tr-form vs h(u,u)-form"] = _rel(closed1, closed2)
    rep.values["dV_dt"] = dV

    # (b) measure variation nodewise
    drho = (gp.rho - gm.rho) / (2.0 * t_step)
    pref = np.einsum("...ij,...ij->...", gi, h) - (n / 2.0) * huu_dir
    closed = pref * gs0.rho
    scale = float(np.max(np.abs(closed))) + 1e-30
    rep.residuals["eta' nodewise"] = float(np.max(np.abs(drho - closed))) / max(scale, 1.0)

    # (c) nonlinear-connection variation (spray variation by FD on the right)
    dGj = (gp.Gj - gm.Gj) / (2.0 * t_step)
    dG = (gp.G - gm.G) / (2.0 * t_step)
    hup = np.einsum("...im,...mj->...ij", gi, h)  # h^i_j
    h_i0 = np.einsum("...ij,...j->...i", hup, e)  # h^i_o at y = e
    h_0k = np.einsum("...mk,...m->...k", h, e)  # h_ok
    nab_h = horizontal_cov_deriv(TensorField(h, (0, 2), 0), gs0).data  # (...,i,j,m)
    # nabla_k h^i_o = g^{im} (nabla_k h_mj) y^j etc., using metric compatibility
    nab_h_up0 = np.einsum("...im,...mjk,...j->...ik", gi, nab_h, e)  # nabla_k h^i_o
    nab_0h_up = np.einsum("...im,...mkj,...j->...ik", gi, nab_h, e)  # nabla_o h^i_k
    nab_up_h0 = np.einsum("...im,...kjm,...j->...ik", gi, nab_h, e)  # nabla^i h_ok
    rhs = 0.5 * (nab_h_up0 + nab_0h_up - nab_up_h0) - 2.0 * np.einsum(
        "...iks,...s->...ik", np.einsum("...im,...mks->...iks", gi, gs0.cartan), dG
    )
    scale = float(np.max(np.abs(rhs))) + 1e-30
    rep.residuals["G'^i_k relation"] = float(np.max(np.abs(dGj - rhs))) / max(scale, 1.0)

    # (d) conformal-direction functional variation
    if family.kind == "conformal" and family.k_fun is not None:
        from .measure import functional_report

        Ip = functional_report(gp, c_fun).I
        Im = functional_report(gm, c_fun).I
        dI = (Ip - Im) / (2.0 * t_step)
        closed = gs0.integrate(gs0.huu * tr_h)
        rep.residuals["conformal dI/dt"] = _rel(dI, closed)
        rep.values["dI_dt"] = dI
        rep.values["int Huu tr(h)"] = closed
    return rep
