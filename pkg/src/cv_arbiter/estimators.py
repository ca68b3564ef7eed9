"""Competing regression procedures.

Implements the candidate fits the selection engine arbitrates between:
polynomial least squares, the trivial zero/constant-mean fits, a
penalized cubic B-spline smoother tuned by generalized cross validation,
and a local linear kernel smoother.

All fitting functions canonicalize the sample by sorting on (x, y)
first, so fits are exactly invariant to the ordering of sample rows,
and every returned prediction function is total on [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import solve_triangular

from .errors import (
    BandwidthTooSmall,
    DegenerateDenominator,
    RankDeficient,
    SampleTooSmall,
)
from .scenarios import Sample

MAX_INTERIOR_SITES = 35  # cap on distinct knot sites (incl. the two boundary knots)


class ProcedureKind(Enum):
    POLYNOMIAL = "polynomial"
    MEAN_ZERO = "mean-zero"
    MEAN_CONSTANT = "mean-constant"
    SMOOTHING_SPLINE = "smoothing-spline"
    LOCAL_LINEAR = "local-linear"


@dataclass(frozen=True)
class LambdaGrid:
    """Smoothing-parameter grid specification.

    A default grid has ``points`` logarithmically spaced values spanning
    ``decades`` decades.  Its top is anchored at
    ``top_stiffness / s_min`` where ``s_min`` is the smallest nonzero
    eigenvalue of the fit's normalized penalty, which pins the top of
    the grid at effective degrees of freedom 2 (the penalty null space)
    while the bottom reaches the unpenalized end.  ``values`` overrides
    everything with explicit absolute lambdas.
    """

    points: int = 81
    decades: float = 16.0
    top_stiffness: float = 1e8
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            vals = tuple(float(v) for v in self.values)
            if not vals or any(not np.isfinite(v) or v <= 0 for v in vals):
                raise ValueError("explicit lambda grid must be positive and finite")
            object.__setattr__(self, "values", tuple(sorted(vals)))
        elif self.points < 1 or self.decades <= 0 or self.top_stiffness <= 0:
            raise ValueError("bad lambda grid specification")

    @classmethod
    def explicit(cls, values) -> "LambdaGrid":
        return cls(values=tuple(values))

    def resolve(self, s_min_nonzero: float) -> np.ndarray:
        """Return the absolute, ascending lambda values for one fit."""
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        top = self.top_stiffness / s_min_nonzero
        if self.points == 1:
            return np.array([top])
        return top * np.geomspace(10.0 ** (-self.decades), 1.0, self.points)


@dataclass(frozen=True)
class ProcedureSpec:
    """A candidate procedure, addressable by a string id.

    Ids: ``poly:d``, ``zero``, ``mean``, ``spline``, ``loclin:h`` or
    ``loclin:auto``.
    """

    kind: ProcedureKind
    degree: int | None = None
    grid: LambdaGrid = field(default_factory=LambdaGrid)
    bandwidth: float | str | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind is ProcedureKind.POLYNOMIAL:
            if self.degree is None or self.degree < 0:
                raise ValueError("polynomial degree must be >= 0")
        if self.kind is ProcedureKind.LOCAL_LINEAR:
            if self.bandwidth != "auto" and not (
                isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0
            ):
                raise ValueError("bandwidth must be positive or 'auto'")
        if not self.label:
            object.__setattr__(self, "label", self.id)

    @property
    def id(self) -> str:
        k = self.kind
        if k is ProcedureKind.POLYNOMIAL:
            return f"poly:{self.degree}"
        if k is ProcedureKind.MEAN_ZERO:
            return "zero"
        if k is ProcedureKind.MEAN_CONSTANT:
            return "mean"
        if k is ProcedureKind.SMOOTHING_SPLINE:
            return "spline"
        return f"loclin:{self.bandwidth}"

    @classmethod
    def parse(cls, text: str) -> "ProcedureSpec":
        t = text.strip()
        if t == "zero":
            return cls(ProcedureKind.MEAN_ZERO)
        if t == "mean":
            return cls(ProcedureKind.MEAN_CONSTANT)
        if t == "spline":
            return cls(ProcedureKind.SMOOTHING_SPLINE)
        if t.startswith("poly:"):
            return cls(ProcedureKind.POLYNOMIAL, degree=int(t[5:]))
        if t.startswith("loclin:"):
            arg = t[7:]
            bw: float | str = "auto" if arg == "auto" else float(arg)
            return cls(ProcedureKind.LOCAL_LINEAR, bandwidth=bw)
        raise ValueError(f"unknown procedure id: {text!r}")


@dataclass(frozen=True)
class FittedModel:
    """An immutable fitted procedure: a prediction function plus metadata."""

    predict: Callable[[np.ndarray], np.ndarray]
    dof: float
    train_n: int
    lam: float | None = None
    coefficients: np.ndarray | None = None
    label: str = ""


class GcvPoint(NamedTuple):
    lam: float
    gcv: float
    dof: float


def _canonical(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    """Sort rows by (x, y); makes all fits exactly order-invariant."""
    order = np.lexsort((sample.y, sample.x))
    return sample.x[order], sample.y[order]


def _vectorized(fn: Callable[[np.ndarray], np.ndarray]):
    def predict(x):
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        out = fn(xv)
        return out if np.ndim(x) else float(out[0])

    return predict


# --- polynomial and mean fits -------------------------------------------------


def fit_polynomial(sample: Sample, degree: int) -> FittedModel:
    """Least-squares polynomial of the given degree.

    Solved through an orthogonal factorization (LAPACK least squares);
    no explicit normal-equation inverse is ever formed.

    Raises RankDeficient when the sample has fewer than degree + 1
    distinct x values.
    """
    x, y = _canonical(sample)
    if len(np.unique(x)) < degree + 1:
        raise RankDeficient(
            f"degree {degree} needs {degree + 1} distinct x values, "
            f"got {len(np.unique(x))}"
        )
    basis = np.vander(x, degree + 1, increasing=True)
    coefs, *_ = np.linalg.lstsq(basis, y, rcond=None)

    def raw(xv):
        return np.polynomial.polynomial.polyval(xv, coefs)

    return FittedModel(
        predict=_vectorized(raw),
        dof=float(degree + 1),
        train_n=sample.n,
        coefficients=coefs,
        label=f"poly:{degree}",
    )


def fit_mean_model(sample: Sample, with_mean: bool) -> FittedModel:
    """The two nested trivial fits: predict 0, or predict the sample mean."""
    value = float(np.mean(sample.y)) if with_mean else 0.0
    return FittedModel(
        predict=_vectorized(lambda xv: np.full_like(xv, value)),
        dof=1.0 if with_mean else 0.0,
        train_n=sample.n,
        coefficients=np.array([value]),
        label="mean" if with_mean else "zero",
    )


# --- penalized cubic B-spline smoother ----------------------------------------


def _spline_design(x: np.ndarray):
    """Knots, sparse design and penalty for the penalized spline.

    Cubic B-spline basis on interior knots at quantiles of the distinct
    x values, capped at MAX_INTERIOR_SITES knot sites; the penalty D
    takes second-order divided differences of the coefficients at the
    basis' Greville abscissae, so its null space is exactly the linear
    functions of x.
    """
    xd = np.unique(x)
    n_sites = min(len(xd) - 2, MAX_INTERIOR_SITES)
    m = n_sites - 2
    a, b = xd[0], xd[-1]
    if m > 0:
        interior = np.quantile(xd, np.arange(1, m + 1) / (m + 1))
        interior = np.unique(interior[(interior > a) & (interior < b)])
    else:
        interior = np.empty(0)
    t = np.concatenate([[a] * 4, interior, [b] * 4])
    k = len(t) - 4
    B = BSpline.design_matrix(x, t, 3)

    greville = (t[1:-3] + t[2:-2] + t[3:-1]) / 3.0
    D = np.zeros((k - 2, k))
    for i in range(k - 2):
        h1 = greville[i + 1] - greville[i]
        h2 = greville[i + 2] - greville[i + 1]
        span = greville[i + 2] - greville[i]
        D[i, i] = 2.0 / (h1 * span)
        D[i, i + 1] = -2.0 / (h1 * h2)
        D[i, i + 2] = 2.0 / (h2 * span)
    return t, B, D


def _spline_system(x: np.ndarray, y: np.ndarray):
    """Diagonalize the penalized least-squares problem.

    Returns (t, B, C, s, w, k) such that the coefficients at a given
    lambda are ``C @ (w / (1 + lam * s))``: one thin QR of the design
    (QR rather than a Gram-matrix factorization, so conditioning is
    kappa(B) and not its square) plus one small symmetric
    eigendecomposition of the whitened penalty; each grid lambda then
    costs only a diagonal rescale, which stays numerically exact even
    at the stiff top of the grid.
    """
    t, B, D = _spline_design(x)
    k = len(t) - 4
    Q, R = np.linalg.qr(B.toarray())
    diag = np.abs(np.diag(R))
    if np.min(diag) <= 1e-10 * np.max(diag):
        raise RankDeficient("spline design matrix is numerically rank deficient")
    E = solve_triangular(R.T, D.T, lower=True).T  # D R^{-1}
    # Shrinkage spectrum via the SVD of E (not eigh of E'E, which would
    # square the conditioning); the penalty null space has dimension
    # exactly 2, appended as explicit zeros.
    _, sigma, vh = np.linalg.svd(E, full_matrices=True)
    v = vh.T[:, ::-1]  # columns now ordered by ascending penalty strength
    s = np.concatenate([np.zeros(2), sigma[::-1] ** 2])
    C = solve_triangular(R, v, lower=False)  # R^{-1} V
    w = v.T @ (Q.T @ y)
    return t, B, C, s, w, k


def _spline_profile(x, y, grid: LambdaGrid):
    t, B, C, s, w, k = _spline_system(x, y)
    if s[2] <= 0.0:
        raise RankDeficient("spline penalty is rank deficient beyond its null space")
    lams = grid.resolve(s[2])
    shrink = 1.0 / (1.0 + np.outer(s, lams))  # k x L
    coefs = C @ (w[:, None] * shrink)
    resid = y[:, None] - B @ coefs
    rss = np.einsum("ij,ij->j", resid, resid)
    dof = shrink.sum(axis=0)
    n = len(y)
    denom = n - dof
    with np.errstate(divide="ignore", invalid="ignore"):
        gcv = np.where(denom > 0, n * rss / denom**2, np.inf)
    return t, lams, gcv, dof, coefs


def _check_spline_sample(sample: Sample) -> tuple[np.ndarray, np.ndarray]:
    if sample.n < 10:
        raise SampleTooSmall(f"spline needs >= 10 points, got {sample.n}")
    x, y = _canonical(sample)
    if len(np.unique(x)) < 4:
        raise RankDeficient("spline needs >= 4 distinct x values")
    return x, y


def gcv_profile(sample: Sample, grid: LambdaGrid | None = None) -> list[GcvPoint]:
    """GCV score n*RSS / (n - tr S)^2 and trace over the lambda grid.

    Grid points whose smoother trace reaches n are reported with a
    ``gcv`` of +inf (the denominator is degenerate there); entries are
    ordered by ascending lambda.
    """
    x, y = _check_spline_sample(sample)
    _, lams, gcv, dof, _ = _spline_profile(x, y, grid or LambdaGrid())
    return [GcvPoint(float(l), float(g), float(d)) for l, g, d in zip(lams, gcv, dof)]


def fit_smoothing_spline(sample: Sample, grid: LambdaGrid | None = None) -> FittedModel:
    """Penalized cubic B-spline with GCV-selected lambda.

    Ties on the GCV grid break toward the smallest lambda.  Predictions
    extrapolate linearly outside the knot range.  Raises
    DegenerateDenominator if no grid point has a usable GCV value.
    """
    x, y = _check_spline_sample(sample)
    t, lams, gcv, dof, coefs = _spline_profile(x, y, grid or LambdaGrid())
    if not np.any(np.isfinite(gcv)):
        raise DegenerateDenominator("smoother trace reaches n at every grid lambda")
    best = int(np.argmin(gcv))  # first minimum = smallest lambda on ties
    c = coefs[:, best]
    spl = BSpline(t, c, 3)
    a, b = t[3], t[-4]
    der = spl.derivative()
    fa, fb = float(spl(a)), float(spl(b))
    da, db = float(der(a)), float(der(b))

    def raw(xv):
        out = spl(np.clip(xv, a, b))
        out = np.where(xv < a, fa + da * (xv - a), out)
        out = np.where(xv > b, fb + db * (xv - b), out)
        return out

    return FittedModel(
        predict=_vectorized(raw),
        dof=float(dof[best]),
        train_n=sample.n,
        lam=float(lams[best]),
        coefficients=c,
        label="spline",
    )


# --- local linear kernel smoother ---------------------------------------------


def _epanechnikov(u: np.ndarray) -> np.ndarray:
    return 0.75 * np.maximum(0.0, 1.0 - u * u)


def _loclin_batch(xt, yt, h, queries, drop_self=False):
    """Local linear predictions at ``queries``; optionally delete-1.

    Uses the centered weighted-least-squares statistics (numerically
    stable even when the window barely identifies a slope).  Falls back
    to the nearest-data mean where fewer than two points carry positive
    weight, and to the local weighted mean where the weighted x spread
    is numerically degenerate.  Returns (predictions, self-weight
    diagonal contribution for dof bookkeeping, all-windows-regular flag).
    """
    dx = xt[None, :] - queries[:, None]
    w = _epanechnikov(dx / h)
    if drop_self:
        np.fill_diagonal(w, 0.0)
    s0 = w.sum(axis=1)
    s1 = (w * dx).sum(axis=1)
    s2 = (w * dx * dx).sum(axis=1)
    t0 = w @ yt
    t1 = (w * dx) @ yt
    npos = (w > 0).sum(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        ybar = t0 / s0
        ubar = s1 / s0
        sxx = s2 - s1 * ubar  # weighted spread of the centered design
        sxy = t1 - s1 * ybar
        ok_line = sxx > 1e-5 * np.maximum(s2, 1e-300)
        slope = np.where(ok_line, sxy, 0.0) / np.where(ok_line, sxx, 1.0)
        pred = ybar - slope * ubar  # prediction at the query (u = 0)
        selfw = np.where(
            ok_line,
            0.75 * (1.0 / s0 + ubar * ubar / np.where(ok_line, sxx, 1.0)),
            0.75 / np.maximum(s0, 1e-300),
        )

    few = npos < 2
    if np.any(few):
        for i in np.flatnonzero(few):
            d = np.abs(xt - queries[i])
            if drop_self:
                d[i] = np.inf
            nearest = d <= d.min() + 1e-300
            pred[i] = yt[nearest].mean()
            selfw[i] = 0.0
    return pred, selfw, bool(np.all(ok_line & (npos >= 2)))


def fit_local_linear(sample: Sample, bandwidth: float | str = "auto") -> FittedModel:
    """Local linear fit with Epanechnikov weights at scale h.

    ``bandwidth='auto'`` selects h by delete-1 cross validation over a
    geometric grid; a grid bandwidth is usable only if every delete-1
    fit supports a non-degenerate line.  Raises BandwidthTooSmall when
    no grid bandwidth is usable.
    """
    if sample.n < 5:
        raise SampleTooSmall(f"local linear needs >= 5 points, got {sample.n}")
    xt, yt = _canonical(sample)
    n = len(xt)
    span = xt[-1] - xt[0]

    if bandwidth == "auto":
        if span <= 0:
            raise BandwidthTooSmall("all x values coincide; no bandwidth works")
        lo = max(span / (n - 1) * 1.5, span * 1e-3)
        h_grid = np.geomspace(lo, span, 15)
        best_h, best_score = None, np.inf
        for h in h_grid:
            pred, _, valid = _loclin_batch(xt, yt, h, xt, drop_self=True)
            if not valid:
                continue
            score = float(np.sum((yt - pred) ** 2))
            if score < best_score:  # strict: ties keep the smaller h
                best_h, best_score = float(h), score
        if best_h is None:
            raise BandwidthTooSmall("no bandwidth on the grid supports delete-1 fits")
        h = best_h
    else:
        h = float(bandwidth)
        if h <= 0:
            raise ValueError("bandwidth must be positive")

    _, selfw, _ = _loclin_batch(xt, yt, h, xt)
    dof = float(np.clip(np.sum(selfw), 0.0, n))

    def raw(xv):
        out = np.empty_like(xv)
        for start in range(0, len(xv), 512):
            chunk = xv[start : start + 512]
            out[start : start + 512] = _loclin_batch(xt, yt, h, chunk)[0]
        return out

    return FittedModel(
        predict=_vectorized(raw),
        dof=dof,
        train_n=n,
        lam=h,
        label=f"loclin:{bandwidth}",
    )


# --- dispatch ------------------------------------------------------------------


def fit_procedure(spec: ProcedureSpec, sample: Sample) -> FittedModel:
    """Fit one candidate procedure on a sample."""
    k = spec.kind
    if k is ProcedureKind.POLYNOMIAL:
        return fit_polynomial(sample, spec.degree)
    if k is ProcedureKind.MEAN_ZERO:
        return fit_mean_model(sample, with_mean=False)
    if k is ProcedureKind.MEAN_CONSTANT:
        return fit_mean_model(sample, with_mean=True)
    if k is ProcedureKind.SMOOTHING_SPLINE:
        return fit_smoothing_spline(sample, spec.grid)
    return fit_local_linear(sample, spec.bandwidth)


def parse_procedures(texts) -> list[ProcedureSpec]:
    return [ProcedureSpec.parse(t) for t in texts]
