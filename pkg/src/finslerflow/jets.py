"""Truncated multivariate Taylor ("jet") arithmetic.

This is the differentiation engine of the package.  A :class:`Jet` stores the
Taylor coefficients of a smooth quantity at an expansion point, split into
"base" variables (chart coordinates x) and "fiber" variables (tangent
coordinates y), each with its own truncation order.  Arithmetic on jets is
exact up to the tracked truncation orders, so fiber derivatives of anything
built from jet-safe primitives (`+ - * /`, `sqrt`, `exp`, `log`, `sin`,
`cos`, `arctan`, real powers) come out at machine precision -- no
finite-difference noise.

Coefficients are stored in Taylor convention, ``c_alpha = d^alpha f / alpha!``,
so multiplication is plain truncated polynomial convolution.  Coefficient
arrays may carry an arbitrary leading shape; all operations broadcast over
it, which is how grid sweeps vectorize.

Orders are tracked per jet (``bvalid``/``fvalid``) and shrink under
differentiation, so reading a derivative beyond what the inputs support is
an error instead of silent garbage.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Sequence

import numpy as np

__all__ = [
    "JetSpec",
    "Jet",
    "jet_variables",
    "sqrt_",
    "exp_",
    "log_",
    "sin_",
    "cos_",
    "atan_",
    "power_",
    "JetOrderError",
]


class JetOrderError(ValueError):
    """A derivative was requested beyond the valid truncation order."""


def _multi_indices(nvars: int, max_total: int) -> list[tuple[int, ...]]:
    if nvars == 0:
        return [()]
    out = []
    for alpha in product(range(max_total + 1), repeat=nvars):
        if sum(alpha) <= max_total:
            out.append(alpha)
    out.sort(key=lambda a: (sum(a), a))
    return out


_use_numba = os.environ.get("FINSLERFLOW_NO_NUMBA", "") == ""
_numba_mul = None
if _use_numba:
    try:
        import numba

        @numba.njit(cache=True, parallel=True, fastmath=False)
        def _numba_mul_kernel(a, b, out, ii, jj, kk):  # pragma: no cover - jit
            npts = a.shape[0]
            nt = ii.shape[0]
            for p in numba.prange(npts):
                for t in range(nt):
                    out[p, kk[t]] += a[p, ii[t]] * b[p, jj[t]]

        _numba_mul = _numba_mul_kernel
    except Exception:  # pragma: no cover - numba present in CI
        _numba_mul = None


@lru_cache(maxsize=None)
def jet_spec(nbase: int, border: int, nfiber: int, forder: int) -> "JetSpec":
    return JetSpec(nbase, border, nfiber, forder)


class JetSpec:
    """Monomial tables for one (nbase, border, nfiber, forder) signature.

    Instances are cached; construct through :func:`jet_spec`.
    """

    def __init__(self, nbase: int, border: int, nfiber: int, forder: int):
        self.nbase = nbase
        self.border = border
        self.nfiber = nfiber
        self.forder = forder
        self.bmons = _multi_indices(nbase, border)
        self.fmons = _multi_indices(nfiber, forder)
        self.nb = len(self.bmons)
        self.nf = len(self.fmons)
        self.ncoeff = self.nb * self.nf
        self._bidx = {m: i for i, m in enumerate(self.bmons)}
        self._fidx = {m: i for i, m in enumerate(self.fmons)}

        # flat monomial -> (base multi-index, fiber multi-index)
        self.mons = [(bm, fm) for bm in self.bmons for fm in self.fmons]
        self._midx = {m: i for i, m in enumerate(self.mons)}

        # multiplication triplets c[k] += a[i]*b[j]
        ii, jj, kk = [], [], []
        for i, (bi, fi) in enumerate(self.mons):
            for j, (bj, fj) in enumerate(self.mons):
                bs = tuple(p + q for p, q in zip(bi, bj))
                fs = tuple(p + q for p, q in zip(fi, fj))
                if sum(bs) <= border and sum(fs) <= forder:
                    ii.append(i)
                    jj.append(j)
                    kk.append(self._midx[(bs, fs)])
        self.mul_i = np.asarray(ii, dtype=np.int64)
        self.mul_j = np.asarray(jj, dtype=np.int64)
        self.mul_k = np.asarray(kk, dtype=np.int64)

        # derivative maps: per variable, arrays (dst, src, factor) with
        # (d_v f)_beta = (beta_v + 1) * f_{beta + e_v}
        self.base_dmaps = [self._dmap(v, True) for v in range(nbase)]
        self.fiber_dmaps = [self._dmap(v, False) for v in range(nfiber)]

        fact = []
        for bm, fm in self.mons:
            f = 1.0
            for a in bm + fm:
                f *= math.factorial(a)
            fact.append(f)
        self.factorials = np.asarray(fact)

    def _dmap(self, var: int, base: bool):
        dst, src, fac = [], [], []
        for k, (bm, fm) in enumerate(self.mons):
            if base:
                shifted = (tuple(a + (1 if t == var else 0) for t, a in enumerate(bm)), fm)
                mult = bm[var] + 1
            else:
                shifted = (bm, tuple(a + (1 if t == var else 0) for t, a in enumerate(fm)))
                mult = fm[var] + 1
            if shifted in self._midx:
                dst.append(k)
                src.append(self._midx[shifted])
                fac.append(float(mult))
        return (
            np.asarray(dst, dtype=np.int64),
            np.asarray(src, dtype=np.int64),
            np.asarray(fac),
        )

    def index(self, bmon: tuple[int, ...], fmon: tuple[int, ...]) -> int:
        return self._midx[(bmon, fmon)]

    def __repr__(self):  # pragma: no cover - debugging aid
        return (
            f"JetSpec(nbase={self.nbase}, border={self.border}, "
            f"nfiber={self.nfiber}, forder={self.forder})"
        )


@dataclass
class Jet:
    """Truncated Taylor expansion with tracked valid orders.

    ``c`` has shape ``leading_shape + (spec.ncoeff,)``.  ``bvalid`` and
    ``fvalid`` are the orders up to which coefficients are trustworthy.
    """

    spec: JetSpec
    c: np.ndarray
    bvalid: int
    fvalid: int

    # keep numpy from absorbing us into object arrays; reflected ops run here
    __array_ufunc__ = None

    # -- constructors -------------------------------------------------
    @staticmethod
    def constant(spec: JetSpec, value, shape=()) -> "Jet":
        value = np.asarray(value, dtype=float)
        lead = np.broadcast_shapes(value.shape, shape)
        c = np.zeros(lead + (spec.ncoeff,))
        c[..., 0] = value
        return Jet(spec, c, spec.border, spec.forder)

    @staticmethod
    def variable(spec: JetSpec, kind: str, var: int, value, shape=()) -> "Jet":
        """Seed jet for a base ('x') or fiber ('y') coordinate."""
        out = Jet.constant(spec, value, shape)
        if kind == "x":
            mon = (
                tuple(1 if t == var else 0 for t in range(spec.nbase)),
                (0,) * spec.nfiber,
            )
        elif kind == "y":
            mon = (
                (0,) * spec.nbase,
                tuple(1 if t == var else 0 for t in range(spec.nfiber)),
            )
        else:
            raise ValueError(f"unknown variable kind {kind!r}")
        out.c[..., spec.index(*mon)] = 1.0
        return out

    # -- inspection ----------------------------------------------------
    @property
    def shape(self):
        return self.c.shape[:-1]

    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def deriv(self, bmon: Sequence[int] = (), fmon: Sequence[int] = ()) -> np.ndarray:
        """Partial derivative value d^(bmon,fmon) f (not Taylor-normalized)."""
        bmon = tuple(bmon) if bmon else (0,) * self.spec.nbase
        fmon = tuple(fmon) if fmon else (0,) * self.spec.nfiber
        if sum(bmon) > self.bvalid or sum(fmon) > self.fvalid:
            raise JetOrderError(
                f"derivative {bmon}+{fmon} beyond valid orders "
                f"({self.bvalid},{self.fvalid})"
            )
        k = self.spec.index(bmon, fmon)
        return self.c[..., k] * self.spec.factorials[k]

    def base_deriv(self, var: int) -> "Jet":
        """d/dx_var as a jet (base order drops by one)."""
        if self.bvalid < 1:
            raise JetOrderError("no base order left to differentiate")
        dst, src, fac = self.spec.base_dmaps[var]
        c = np.zeros_like(self.c)
        c[..., dst] = self.c[..., src] * fac
        return Jet(self.spec, c, self.bvalid - 1, self.fvalid)

    def fiber_deriv(self, var: int) -> "Jet":
        """d/dy_var as a jet (fiber order drops by one)."""
        if self.fvalid < 1:
            raise JetOrderError("no fiber order left to differentiate")
        dst, src, fac = self.spec.fiber_dmaps[var]
        c = np.zeros_like(self.c)
        c[..., dst] = self.c[..., src] * fac
        return Jet(self.spec, c, self.bvalid, self.fvalid - 1)

    # -- arithmetic ----------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.spec is not self.spec:
                raise ValueError("jet spec mismatch")
            return other
        return Jet.constant(self.spec, other, self.shape)

    def __add__(self, other):
        o = self._coerce(other)
        return Jet(
            self.spec,
            self.c + o.c,
            min(self.bvalid, o.bvalid),
            min(self.fvalid, o.fvalid),
        )

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet(
            self.spec,
            self.c - o.c,
            min(self.bvalid, o.bvalid),
            min(self.fvalid, o.fvalid),
        )

    def __rsub__(self, other):
        o = self._coerce(other)
        return o - self

    def __neg__(self):
        return Jet(self.spec, -self.c, self.bvalid, self.fvalid)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(
                self.spec,
                self.c * np.asarray(other, dtype=float)[..., None],
                self.bvalid,
                self.fvalid,
            )
        o = self._coerce(other)
        spec = self.spec
        a = self.c
        b = o.c
        lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        a = np.broadcast_to(a, lead + (spec.ncoeff,))
        b = np.broadcast_to(b, lead + (spec.ncoeff,))
        npts = int(np.prod(lead)) if lead else 1
        if _numba_mul is not None:
            a2 = np.ascontiguousarray(a.reshape(npts, spec.ncoeff))
            b2 = np.ascontiguousarray(b.reshape(npts, spec.ncoeff))
            out = np.zeros((npts, spec.ncoeff))
            _numba_mul(a2, b2, out, spec.mul_i, spec.mul_j, spec.mul_k)
            out = out.reshape(lead + (spec.ncoeff,))
        else:
            out = np.zeros(lead + (spec.ncoeff,))
            for i, j, k in zip(spec.mul_i, spec.mul_j, spec.mul_k):
                out[..., k] += a[..., i] * b[..., j]
        return Jet(spec, out, min(self.bvalid, o.bvalid), min(self.fvalid, o.fvalid))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other._reciprocal()

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) or (isinstance(p, float) and p.is_integer()):
            p = int(p)
            if p < 0:
                return (self._reciprocal()) ** (-p)
            out = Jet.constant(self.spec, 1.0, self.shape)
            out.bvalid, out.fvalid = self.bvalid, self.fvalid
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return power_(self, float(p))

    # -- series composition --------------------------------------------
    def _nilpotent(self):
        n = self.c.copy()
        n[..., 0] = 0.0
        return Jet(self.spec, n, self.bvalid, self.fvalid)

    def compose(self, series: np.ndarray) -> "Jet":
        """Evaluate sum_j series[j] * (self - value)^j by Horner.

        ``series[j]`` must be f^(j)(value)/j!; leading axis j, remaining axes
        broadcast against the jet's leading shape.
        """
        nil = self._nilpotent()
        m = series.shape[0] - 1
        out = Jet.constant(self.spec, series[m], self.shape)
        out.bvalid, out.fvalid = self.bvalid, self.fvalid
        for j in range(m - 1, -1, -1):
            out = out * nil
            out.c[..., 0] += series[j]
        return out

    def _series_orders(self) -> int:
        return self.bvalid + self.fvalid

    def _reciprocal(self):
        v = self.value()
        m = self._series_orders()
        series = np.empty((m + 1,) + np.shape(v))
        for j in range(m + 1):
            series[j] = (-1.0) ** j * v ** (-(j + 1))
        return self.compose(series)


def _pow_series(v: np.ndarray, p: float, m: int) -> np.ndarray:
    """Coefficients binom(p, j) * v^(p-j) for j = 0..m."""
    out = np.empty((m + 1,) + v.shape)
    coef = 1.0
    for j in range(m + 1):
        out[j] = coef * v ** (p - j)
        coef *= (p - j) / (j + 1)
    return out


def power_(x, p: float):
    if not isinstance(x, Jet):
        return np.power(x, p)
    return x.compose(_pow_series(x.value(), p, x._series_orders()))


def sqrt_(x):
    if not isinstance(x, Jet):
        return np.sqrt(x)
    return x.compose(_pow_series(x.value(), 0.5, x._series_orders()))


def exp_(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    v = np.exp(x.value())
    m = x._series_orders()
    series = np.empty((m + 1,) + v.shape)
    f = 1.0
    for j in range(m + 1):
        series[j] = v / f
        f *= j + 1
    return x.compose(series)


def log_(x):
    if not isinstance(x, Jet):
        return np.log(x)
    v = x.value()
    m = x._series_orders()
    series = np.empty((m + 1,) + v.shape)
    series[0] = np.log(v)
    for j in range(1, m + 1):
        series[j] = (-1.0) ** (j + 1) / (j * v**j)
    return x.compose(series)


def _trig_series(v: np.ndarray, m: int, start_sin: bool) -> np.ndarray:
    s, c = np.sin(v), np.cos(v)
    cycle = [s, c, -s, -c] if start_sin else [c, -s, -c, s]
    out = np.empty((m + 1,) + v.shape)
    f = 1.0
    for j in range(m + 1):
        out[j] = cycle[j % 4] / f
        f *= j + 1
    return out


def sin_(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    return x.compose(_trig_series(x.value(), x._series_orders(), True))


def cos_(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    return x.compose(_trig_series(x.value(), x._series_orders(), False))


def atan_(x):
    if not isinstance(x, Jet):
        return np.arctan(x)
    v = x.value()
    m = x._series_orders()
    # Taylor of arctan at v by integrating the reciprocal series of 1+(v+s)^2.
    g = np.zeros((max(m, 2) + 1,) + v.shape)
    g[0], g[1], g[2] = 1.0 + v * v, 2.0 * v, 1.0
    r = np.empty((m + 1,) + v.shape)
    r[0] = 1.0 / g[0]
    for k in range(1, m + 1):
        acc = np.zeros_like(v)
        for i in range(1, min(k, 2) + 1):
            acc = acc + g[i] * r[k - i]
        r[k] = -acc / g[0]
    series = np.empty((m + 1,) + v.shape)
    series[0] = np.arctan(v)
    for j in range(1, m + 1):
        series[j] = r[j - 1] / j
    return x.compose(series)


def jet_variables(
    x: np.ndarray,
    y: np.ndarray,
    border: int,
    forder: int,
) -> tuple[list, list]:
    """Seed joint (x, y) jets at points.

    ``x``/``y`` have shape (..., n).  With ``border == 0`` the x's are plain
    arrays (constants from the jet algebra's point of view).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    if border > 0:
        spec = jet_spec(n, border, n, forder)
        xs = [Jet.variable(spec, "x", a, x[..., a]) for a in range(n)]
    else:
        spec = jet_spec(0, 0, n, forder)
        xs = [x[..., a] for a in range(n)]
    ys = [Jet.variable(spec, "y", a, y[..., a]) for a in range(n)]
    return xs, ys
