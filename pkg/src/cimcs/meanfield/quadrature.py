"""Quadrature helpers for the mean-field averages.

Averages over the source value use composite Gauss-Legendre rules on panels
whose breakpoints are placed at the kinks of the effective output functions,
so step-like integrands are integrated to machine precision.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import ndtr

from ..problem import Kind, SourceDistribution

SQRT2PI = math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=32)
def legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(order)


def composite_legendre(breaks, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite rule on the sorted, deduplicated ``breaks``."""
    b = np.unique(np.asarray(breaks, dtype=float))
    if b.size < 2:
        return np.zeros(0), np.zeros(0)
    t, w = legendre(order)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (t + 1.0)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


def composite_legendre_rows(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise composite rule: ``breaks`` is (rows, k) sorted along axis 1.

    Returns (rows, (k-1)*order) node and weight arrays. Empty panels get zero
    weight.
    """
    t, w = legendre(order)
    lo, hi = breaks[:, :-1, None], breaks[:, 1:, None]
    half = 0.5 * (hi - lo)
    nodes = lo + half * (t + 1.0)
    weights = half * w
    rows = breaks.shape[0]
    return nodes.reshape(rows, -1), weights.reshape(rows, -1)


def std_normal_pdf(z):
    return np.exp(-0.5 * np.square(z)) / SQRT2PI


def std_normal_cdf(z):
    return ndtr(z)


class SourceAverage:
    """Expectation over ``x ~ g(x)`` by composite Gauss-Legendre quadrature.

    Parameters
    ----------
    dist : SourceDistribution
    order : int
        Nodes per panel.
    base_panels : int
        Number of uniform panels on the support before kink breakpoints are
        added.
    """

    def __init__(self, dist: SourceDistribution, order: int = 16, base_panels: int = 24):
        self.dist = dist
        self.order = order
        self.base_panels = base_panels
        lo, hi = dist.support()
        self.lo, self.hi = lo, hi
        self._base = np.linspace(lo, hi, base_panels + 1)
        if dist.kind in (Kind.GAMMA, Kind.BILATERAL_GAMMA):
            # resolve the bulk of the Gamma density more finely near the origin
            bulk = dist.theta * (dist.k + 6.0 * math.sqrt(dist.k))
            extra = np.linspace(0.0, bulk, base_panels + 1)
            if dist.signed:
                extra = np.concatenate([-extra, extra])
            self._base = np.concatenate([self._base, extra])
            if dist.k < 2:
                # integrable singular behaviour at 0: geometric refinement
                geo = bulk * np.logspace(-12, 0, 25)
                self._base = np.concatenate([self._base, geo, -geo] if dist.signed else [self._base, geo])

    def rule(self, kinks=(), widths=()) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and pdf-weighted weights, refined around each kink.

        Each kink ``c`` adds breakpoints ``c``, and ``c +- k w`` for every
        width ``w`` and ``k`` in (0.5, 2, 6).
        """
        pts = [self._base]
        for c in kinks:
            pts.append([c])
            for w in widths:
                if w > 0:
                    pts.append(c + w * np.array([-6.0, -2.0, -0.5, 0.5, 2.0, 6.0]))
        b = np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in pts])
        b = b[(b >= self.lo) & (b <= self.hi)]
        x, w = composite_legendre(b, self.order)
        w = w * self.dist.pdf(x)
        return x, w

    def second_moment(self) -> float:
        x, w = self.rule()
        return float(w @ (x * x))
