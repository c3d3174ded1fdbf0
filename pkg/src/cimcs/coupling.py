"""Quadratic couplings shared by the support-estimation solvers.

Every solver in this package minimizes an energy of the form

    H(sigma, r) = 1/2 (sigma*r)^T G (sigma*r) - b^T (sigma*r) + lam * sum(sigma)

where ``G`` is symmetric positive semi-definite with unit diagonal (the Gram
matrix of a column-normalized observation matrix, or the D-normalized imaging
interaction) and ``b`` is the Zeeman vector. A coupling object exposes exactly
the operations the solvers need, so dense instances and matrix-free imaging
problems share one code path.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


class RankDeficiencyError(np.linalg.LinAlgError):
    """Support-restricted system is singular or too ill-conditioned."""

    def __init__(self, support_size: int, detail: str = ""):
        self.support_size = support_size
        msg = f"support of size {support_size} gives a rank-deficient system"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class Coupling:
    """Abstract coupling. Subclasses provide ``n``, ``zeeman`` and ``diag``."""

    n: int
    zeeman: np.ndarray
    diag: np.ndarray

    def matvec(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def column(self, i: int) -> np.ndarray:
        e = np.zeros(self.n)
        e[i] = 1.0
        return self.matvec(e)

    @property
    def dense(self) -> np.ndarray | None:
        """Dense ``G`` if it is cheap to hold, else None."""
        return None

    def local_field(self, rs: np.ndarray) -> np.ndarray:
        """``h = b - (G - diag G) rs`` for the masked signal ``rs = sigma*r``."""
        rs = np.asarray(rs, dtype=float)
        if rs.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {rs.shape}")
        return self.zeeman - self.matvec(rs) + self.diag * rs

    def energy(self, rs: np.ndarray, sigma: np.ndarray, lam: float) -> float:
        rs = np.asarray(rs, dtype=float)
        return float(0.5 * rs @ self.matvec(rs) - self.zeeman @ rs + lam * np.count_nonzero(sigma))

    def solve_support(self, support: np.ndarray) -> np.ndarray:
        """Solve ``G_SS r_S = b_S`` for the index array ``support``."""
        raise NotImplementedError


class DenseCoupling(Coupling):
    """Coupling built from an explicit observation matrix ``A`` and data ``y``.

    The Gram matrix is formed lazily; solving on a support uses only the
    selected columns of ``A``.
    """

    #: condition-number ceiling above which a support system counts as singular
    cond_limit = 1e12

    def __init__(self, a_mat: np.ndarray, y: np.ndarray):
        self.a_mat = np.asarray(a_mat, dtype=float)
        self.y = np.asarray(y, dtype=float)
        m, n = self.a_mat.shape
        if self.y.shape != (m,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({m},)")
        self.n = n
        self.m = m
        self.zeeman = self.a_mat.T @ self.y
        self.diag = np.einsum("ij,ij->j", self.a_mat, self.a_mat)
        self._gram = None

    @classmethod
    def from_matrix(cls, a_mat, y) -> "DenseCoupling":
        return cls(a_mat, y)

    @property
    def dense(self) -> np.ndarray:
        if self._gram is None:
            self._gram = self.a_mat.T @ self.a_mat
        return self._gram

    def matvec(self, v):
        if self._gram is not None:
            return self._gram @ v
        return self.a_mat.T @ (self.a_mat @ v)

    def column(self, i):
        return self.dense[:, i]

    def local_field(self, rs):
        rs = np.asarray(rs, dtype=float)
        if rs.shape != (self.n,):
            raise ValueError(f"expected vector of length {self.n}, got shape {rs.shape}")
        return self.a_mat.T @ (self.y - self.a_mat @ rs) + self.diag * rs

    def energy(self, rs, sigma, lam):
        rs = np.asarray(rs, dtype=float)
        ar = self.a_mat @ rs
        return float(0.5 * ar @ ar - self.y @ ar + lam * np.count_nonzero(sigma))

    def solve_support(self, support):
        support = np.asarray(support, dtype=np.intp)
        k = support.size
        if k == 0:
            return np.zeros(0)
        if k > self.m:
            raise RankDeficiencyError(k, f"exceeds {self.m} observations")
        a_s = self.a_mat[:, support]
        gram = a_s.T @ a_s
        rhs = a_s.T @ self.y
        try:
            cho = scipy.linalg.cho_factor(gram, check_finite=False)
        except np.linalg.LinAlgError:
            cho = None
        if cho is not None:
            # 1-norm condition estimate from the triangular factor
            rcond = _cho_rcond(cho[0], gram)
            if rcond * self.cond_limit > 1.0:
                return scipy.linalg.cho_solve(cho, rhs, check_finite=False)
        cond = np.linalg.cond(a_s) ** 2
        raise RankDeficiencyError(k, f"condition estimate {cond:.3g}")


def _cho_rcond(factor: np.ndarray, gram: np.ndarray) -> float:
    """Reciprocal condition estimate of ``gram`` from its upper Cholesky factor."""
    rc, info = scipy.linalg.lapack.dtrcon(factor, norm="1", uplo="U", diag="N")
    if info != 0:
        return 0.0
    return float(rc) ** 2


def least_squares_support(a_mat: np.ndarray, y: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares values on ``support`` (rank-deficient fallback)."""
    a_s = a_mat[:, support]
    sol, *_ = scipy.linalg.lstsq(a_s, y, lapack_driver="gelsy", check_finite=False)
    return sol


def as_coupling(obj) -> Coupling:
    """Accept an instance (anything with a ``coupling`` attribute) or a coupling."""
    if isinstance(obj, Coupling):
        return obj
    coupling = getattr(obj, "coupling", None)
    if isinstance(coupling, Coupling):
        return coupling
    raise TypeError(f"cannot derive a coupling from {type(obj).__name__}")
