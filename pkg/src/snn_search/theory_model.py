"""
Pruning efficiency under the elongated Gaussian model.

Data is drawn from a Gaussian with standard deviation ``(1, s, ..., s)`` in
``d`` dimensions and queried at ``x_q = [c, 0, ..., 0]`` with radius ``R``.
For large ``n`` the principal direction is the first axis, so

* ``p1(c, R)``: probability that a point is a band candidate,
  the standard-normal measure of ``[c - R, c + R]``;
* ``p2(model)``: probability that a point is a true neighbor,
  ``∫ phi(r) F((R² - (r - c)²) / s²; d - 1) dr`` over the same interval,
  with ``F`` the chi-square CDF;
* ``efficiency_ratio = p2 / p1``: probability that a candidate is a hit.
"""

import logging
import math
from collections.abc import Callable

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import brentq
from scipy.special import erfc, gammaln, ndtri

from snn_search.errors import ParameterError
from snn_search.indexer import SnnIndex
from snn_search.query import query_radius

log = logging.getLogger(__name__)

_EPS = 1e-16
_FPMIN = 1e-300
_MAX_ITER = 10_000
QUAD_TOLERANCE = 1e-8
QUAD_MAX_DEPTH = 40
# equal panels evaluated before adaptive refinement
_QUAD_PANELS = 8


class BlobModel(BaseModel):
    """Elongation ``s``, dimension ``d``, query offset ``c`` and radius."""

    model_config = ConfigDict(frozen=True)

    s: float = Field(gt=0, le=1)
    d: int = Field(ge=2)
    c: float = 0.0
    radius: float = Field(gt=0)


def _lower_gamma_series(a: float, x: float) -> float:
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        log.warning("Incomplete gamma series did not converge for a=%g, x=%g", a, x)
    return total * math.exp(-x + a * math.log(x) - gammaln(a))


def _upper_gamma_fraction(a: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1 - a
    c = 1 / _FPMIN
    d = 1 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < _EPS:
            break
    else:
        log.warning("Incomplete gamma fraction did not converge for a=%g, x=%g", a, x)
    return math.exp(-x + a * math.log(x) - gammaln(a)) * h


def chi2_cdf(x: float, k: int) -> float:
    """
    Chi-square CDF with ``k`` degrees of freedom, i.e. the regularized lower
    incomplete gamma function ``P(k/2, x/2)``. Series below ``x = k + 1``,
    continued fraction above.
    """
    if k < 1:
        raise ParameterError(f"chi-square degrees of freedom must be >= 1, got {k}")
    if x <= 0:
        return 0.0
    a, half_x = k / 2, x / 2
    if x < k + 1:
        value = _lower_gamma_series(a, half_x)
    else:
        value = 1.0 - _upper_gamma_fraction(a, half_x)
    return min(1.0, max(0.0, value))


def p1(c: float, radius: float) -> float:
    """Standard-normal measure of ``[c - radius, c + radius]``."""
    if radius < 0:
        raise ParameterError(f"negative radius: {radius}")
    # symmetric in c; the erfc form avoids cancellation in the far tail
    c = abs(c)
    root2 = math.sqrt(2)
    return float(0.5 * (erfc((c - radius) / root2) - erfc((c + radius) / root2)))


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = QUAD_TOLERANCE,
    max_depth: int = QUAD_MAX_DEPTH,
) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``."""
    if b <= a:
        return 0.0
    edges = np.linspace(a, b, _QUAD_PANELS + 1)
    panel_tol = tol / _QUAD_PANELS
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        lo, hi = float(lo), float(hi)
        mid = (lo + hi) / 2
        f_lo, f_mid, f_hi = f(lo), f(mid), f(hi)
        whole = (hi - lo) / 6 * (f_lo + 4 * f_mid + f_hi)
        total += _simpson_refine(
            f, lo, hi, f_lo, f_mid, f_hi, whole, panel_tol, max_depth
        )
    return total


def _simpson_refine(f, a, b, fa, fm, fb, whole, tol, depth) -> float:
    m = (a + b) / 2
    lm, rm = (a + m) / 2, (m + b) / 2
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6 * (fa + 4 * flm + fm)
    right = (b - m) / 6 * (fm + 4 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15 * tol:
        return left + right + delta / 15
    half_tol = tol / 2
    return _simpson_refine(
        f, a, m, fa, flm, fm, left, half_tol, depth - 1
    ) + _simpson_refine(f, m, b, fm, frm, fb, right, half_tol, depth - 1)


def _normal_pdf(r: float) -> float:
    return math.exp(-r * r / 2) / math.sqrt(2 * math.pi)


def p2(model: BlobModel) -> float:
    """Probability that a point of the model lies within the query ball."""
    c, radius, s2, dof = model.c, model.radius, model.s * model.s, model.d - 1

    def integrand(r: float) -> float:
        return _normal_pdf(r) * chi2_cdf((radius * radius - (r - c) ** 2) / s2, dof)

    value = adaptive_simpson(integrand, c - radius, c + radius)
    # the exact value is bounded by the candidate probability
    return min(max(value, 0.0), p1(c, radius))


def efficiency_ratio(model: BlobModel) -> float:
    """``p2 / p1``, the probability that a band candidate is a true neighbor."""
    denom = p1(model.c, model.radius)
    if denom == 0:
        raise ParameterError("undefined ratio: candidate probability is zero")
    return min(1.0, max(0.0, p2(model) / denom))


def chi2_quantile(prob: float, k: int) -> float:
    """Smallest ``t`` with ``chi2_cdf(t, k) = prob`` for ``0 < prob < 1``."""
    if not 0 < prob < 1:
        raise ParameterError(f"probability must lie in (0, 1), got {prob}")
    hi = float(k + 1)
    while chi2_cdf(hi, k) < prob:
        hi *= 2
    return float(brentq(lambda t: chi2_cdf(t, k) - prob, 0.0, hi, xtol=1e-12))


def limit_radius(c: float, s: float, d: int, eps: float) -> tuple[float, float, float]:
    """
    Radii from the convergence argument for ``efficiency_ratio -> 1``.

    Returns:
        ``(R1, R2, T)``: ``R1 = 1 + |c| + z`` with ``z`` the standard-normal
        quantile at ``1 - eps / 2``; ``T`` is the
        chi-square(``d - 1``) quantile at ``1 - eps`` and
        ``R2 = sqrt((T s² + 1) / 2)``. Any radius ``>= max(R1, R2)`` makes the
        ratio at least ``(1 - eps)²`` up to quadrature error.
    """
    if not 0 < eps < 1:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")
    r1 = 1 + abs(c) + float(ndtri(1 - eps / 2))
    t = chi2_quantile(1 - eps, d - 1)
    r2 = math.sqrt((t * s * s + 1) / 2)
    return r1, r2, t


def empirical_candidate_ratio(
    idx: SnnIndex, query: ArrayLike, radius: float
) -> tuple[float, float]:
    """
    Measured counterparts of ``p1`` and ``p2``.

    Returns:
        Tuple of (band candidates / n, hits / n).
    """
    res = query_radius(idx, query, radius)
    return res.candidates / idx.n, len(res) / idx.n


class ModelRow(BaseModel):
    """One evaluated parameter set, as printed by ``snn-search model``."""

    c: float
    radius: float
    s: float
    d: int
    p1: float
    p2: float
    ratio: float | None


def model_row(model: BlobModel) -> ModelRow:
    """
    Evaluate ``model``; ``ratio`` is ``None`` where the candidate probability
    vanishes.
    """
    prob1 = p1(model.c, model.radius)
    prob2 = p2(model)
    ratio = min(1.0, max(0.0, prob2 / prob1)) if prob1 > 0 else None
    log.debug("Model %s: p1=%g p2=%g", model, prob1, prob2)
    return ModelRow(
        c=model.c,
        radius=model.radius,
        s=model.s,
        d=model.d,
        p1=prob1,
        p2=prob2,
        ratio=ratio,
    )
