"""Undersampled Fourier imaging with a Haar sparsity basis.

A real image ``x`` is observed through k-space samples ``y = S F x`` (``F``
the orthonormal 2-D DFT, ``S`` a sampling mask) and reconstructed through its
Haar coefficients ``r = Psi x``. The quadratic part of every objective is

    1/2 |y - S F x|^2 + gamma/2 |Dv x|^2 + gamma/2 |Dh x|^2

with second differences ``Dv``, ``Dh`` under reflective boundaries. In Haar
coordinates this is ``1/2 r^T Jt r - bt^T r`` with
``Jt = Psi (Re(F^H S^T S F) + gamma (Dv^T Dv + Dh^T Dh)) Psi^T``. The L0
solver works in the normalized coordinates ``r = D r'`` with
``D = diag(Jt)^(-1/2)``, where the coupling ``J = D Jt D`` has unit diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from .coupling import Coupling, RankDeficiencyError
from .hybrid import HybridConfig, HybridResult, run_hybrid
from .lasso import L1EqResult, run_ista, solve_l1_equality
from .problem import Chi

#: largest coefficient count for which the coupling matrix is held densely
DENSE_LIMIT = 4096


def _check_pow2(shape) -> None:
    for s in shape:
        if s < 1 or s & (s - 1):
            raise ValueError(f"image dimensions must be powers of two, got {tuple(shape)}")


def _haar_step(x, axis, n, inverse=False):
    """One orthonormal Haar level on the leading ``n`` entries of ``axis``."""
    x = np.moveaxis(x, axis, -1)
    head = x[..., :n]
    if inverse:
        a, d = head[..., : n // 2], head[..., n // 2:]
        out = np.empty_like(head)
        out[..., 0::2] = (a + d) / math.sqrt(2.0)
        out[..., 1::2] = (a - d) / math.sqrt(2.0)
    else:
        even, odd = head[..., 0::2], head[..., 1::2]
        out = np.concatenate([(even + odd) / math.sqrt(2.0), (even - odd) / math.sqrt(2.0)], axis=-1)
    x = x.copy()
    x[..., :n] = out
    return np.moveaxis(x, -1, axis)


def _levels(shape):
    rows, cols = shape
    sizes = []
    while rows > 1 or cols > 1:
        sizes.append((rows, cols))
        rows, cols = max(rows // 2, 1), max(cols // 2, 1)
    return sizes


def haar2d(image) -> np.ndarray:
    """Orthonormal 2-D Haar transform over the last two axes (full pyramid).

    Each level transforms the rows and columns of the current approximation
    block; once one side reaches length 1 the other continues alone.
    """
    x = np.array(image, dtype=float)
    _check_pow2(x.shape[-2:])
    for rows, cols in _levels(x.shape[-2:]):
        sub = x[..., :rows, :cols]
        if rows > 1:
            sub = _haar_step(sub, -2, rows)
        if cols > 1:
            sub = _haar_step(sub, -1, cols)
        x[..., :rows, :cols] = sub
    return x


def ihaar2d(coeffs) -> np.ndarray:
    """Inverse of :func:`haar2d`."""
    x = np.array(coeffs, dtype=float)
    _check_pow2(x.shape[-2:])
    for rows, cols in reversed(_levels(x.shape[-2:])):
        sub = x[..., :rows, :cols]
        if cols > 1:
            sub = _haar_step(sub, -1, cols, inverse=True)
        if rows > 1:
            sub = _haar_step(sub, -2, rows, inverse=True)
        x[..., :rows, :cols] = sub
    return x


def fft2o(x):
    return np.fft.fft2(x, norm="ortho")


def ifft2o(k):
    return np.fft.ifft2(k, norm="ortho")


def second_difference(x, axis: int) -> np.ndarray:
    """``x[i-1] - 2 x[i] + x[i+1]`` with reflective ends (a symmetric operator)."""
    x = np.asarray(x, dtype=float)
    pad = [(0, 0)] * x.ndim
    pad[axis] = (1, 1)
    xp = np.pad(x, pad, mode="edge")
    n = x.shape[axis]
    take = lambda a, b: np.take(xp, np.arange(a, a + n), axis=axis)  # noqa: E731
    return take(0, n) - 2.0 * x + take(2, n)


def smoothness(x) -> np.ndarray:
    """``(Dv^T Dv + Dh^T Dh) x`` over the last two axes."""
    return (second_difference(second_difference(x, -2), -2)
            + second_difference(second_difference(x, -1), -1))


# --- problem set-up -----------------------------------------------------------

@dataclass(frozen=True)
class KSpaceProblem:
    """Ground-truth image, sampling mask and smoothness weight.

    ``y`` holds the complex k-space samples ``F x`` at the mask, in row-major
    mask order.
    """

    image: np.ndarray
    mask: np.ndarray
    gamma: float = 1e-4
    phantom_haar_sparsity: float = float("nan")
    seed: int = 0

    def __post_init__(self):
        img = np.asarray(self.image, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        _check_pow2(img.shape)
        if img.ndim != 2 or mask.shape != img.shape:
            raise ValueError("image and mask must be 2-D arrays of the same shape")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "mask", mask)

    @property
    def image_size(self) -> tuple[int, int]:
        return self.image.shape

    @property
    def n(self) -> int:
        return self.image.size

    @property
    def sampling(self) -> float:
        return float(self.mask.mean())

    @property
    def y(self) -> np.ndarray:
        return fft2o(self.image)[self.mask]

    def zero_filled(self, y=None) -> np.ndarray:
        k = np.zeros(self.image.shape, dtype=complex)
        k[self.mask] = self.y if y is None else y
        return k


def conjugate_index(shape) -> np.ndarray:
    """Flat index of the frequency ``-k`` for every flat frequency ``k``."""
    rows, cols = shape
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return ((-i % rows) * cols + (-j % cols)).ravel()


def sampling_density(shape, power: float = 2.0, floor: float = 0.02) -> np.ndarray:
    """Relative sampling weight ``max((1 - |k|/k_max)^power, floor)`` per frequency.

    ``|k|`` is the radial frequency in cycles per sample; ``power = 0`` gives
    uniform sampling.
    """
    rows, cols = shape
    ky = np.fft.fftfreq(rows)[:, None]
    kx = np.fft.fftfreq(cols)[None, :]
    rad = np.sqrt(kx ** 2 + ky ** 2) / math.sqrt(0.5)
    return np.maximum((1.0 - rad) ** power, floor) if power else np.ones(shape)


def random_mask(shape, fraction: float, rng: np.random.Generator, *, power: float = 2.0,
                floor: float = 0.02) -> np.ndarray:
    """Random conjugate-symmetric k-space mask covering ``fraction`` of k-space.

    Frequencies are drawn in conjugate pairs (a pair carries the same
    information about a real image), so the number of real measurements
    equals the number of sampled points. Pairs are drawn without
    replacement with probability proportional to :func:`sampling_density`.
    The DC sample is always included. The sampled count is
    ``round(fraction * N)`` or one more.
    """
    if not 0 < fraction <= 1:
        raise ValueError("sampling fraction must be in (0, 1]")
    n = int(np.prod(shape))
    conj = conjugate_index(shape)
    reps = np.flatnonzero(np.arange(n) <= conj)
    reps = reps[reps != 0]
    weight = sampling_density(shape, power, floor).ravel()[reps]
    # weighted sampling without replacement: largest log(u) / w first
    keys = np.log(rng.random(reps.size)) / weight
    order = reps[np.argsort(-keys, kind="stable")]
    target = max(int(round(fraction * n)), 1)
    mask = np.zeros(n, dtype=bool)
    mask[0] = True
    count = 1
    for k in order:
        if count >= target:
            break
        mask[k] = mask[conj[k]] = True
        count += 1 if conj[k] == k else 2
    return mask.reshape(shape)


def haar_sparsify(image, sparsity: float) -> np.ndarray:
    """Keep the ``round(sparsity * N)`` largest Haar coefficients."""
    coeffs = haar2d(image)
    flat = coeffs.ravel()
    keep = int(round(sparsity * flat.size))
    out = np.zeros_like(flat)
    if keep:
        idx = np.argsort(-np.abs(flat), kind="stable")[:keep]
        out[idx] = flat[idx]
    return ihaar2d(out.reshape(coeffs.shape))


def synth_phantom(shape=(64, 64), sparsity: float = 0.134, rng: np.random.Generator | None = None,
                  n_ellipses: int = 10) -> np.ndarray:
    """Smooth random ellipse image in [0, 1], made exactly sparse in the Haar basis."""
    rng = np.random.default_rng(0) if rng is None else rng
    _check_pow2(shape)
    rows, cols = shape
    yy, xx = np.meshgrid(np.linspace(-1, 1, rows), np.linspace(-1, 1, cols), indexing="ij")
    img = np.zeros(shape)
    # outer body then random inner structures
    img[(xx / 0.85) ** 2 + (yy / 0.95) ** 2 <= 1.0] = 0.6
    for _ in range(n_ellipses):
        cx, cy = rng.uniform(-0.5, 0.5, 2)
        ax, ay = rng.uniform(0.05, 0.35, 2)
        phi = rng.uniform(0, np.pi)
        u = (xx - cx) * np.cos(phi) + (yy - cy) * np.sin(phi)
        v = -(xx - cx) * np.sin(phi) + (yy - cy) * np.cos(phi)
        img[(u / ax) ** 2 + (v / ay) ** 2 <= 1.0] += rng.uniform(-0.3, 0.4)
    # mild Gaussian blur through the spectrum
    ky = np.fft.fftfreq(rows)[:, None]
    kx = np.fft.fftfreq(cols)[None, :]
    img = np.real(np.fft.ifft2(np.fft.fft2(img) * np.exp(-2.0 * (np.pi * 0.8) ** 2 * (kx ** 2 + ky ** 2))))
    img = np.clip(img, 0.0, None)
    img /= max(img.max(), 1e-300)
    return haar_sparsify(img, sparsity)


def make_problem(shape=(64, 64), sampling: float = 0.4, sparsity: float = 0.134,
                 gamma: float = 1e-4, seed: int = 0) -> KSpaceProblem:
    """Phantom and mask from one seed (phantom first, then mask)."""
    rng = np.random.default_rng(seed)
    img = synth_phantom(shape, sparsity, rng)
    mask = random_mask(shape, sampling, rng)
    return KSpaceProblem(img, mask, gamma, sparsity, seed)


# --- operators -------------------------------------------------------------------

class ImagingOperators:
    """Matrix-free ``Jt``, its diagonal and the Zeeman vector ``bt`` in Haar coordinates."""

    def __init__(self, prob: KSpaceProblem, *, block: int = 256):
        self.prob = prob
        self.shape = prob.image_size
        self.n = prob.n
        self.gamma = prob.gamma
        self._mask = prob.mask.astype(float)
        self.zeeman = haar2d(np.real(ifft2o(prob.zero_filled()))).ravel()
        self._block = block
        self._diag = None

    def apply_image(self, x):
        """Image-domain operator ``Re(F^H S^T S F) x + gamma (Dv^T Dv + Dh^T Dh) x``."""
        out = np.real(ifft2o(self._mask * fft2o(x)))
        if self.gamma:
            out = out + self.gamma * smoothness(x)
        return out

    def apply(self, r):
        """``Jt r`` for flat coefficient vectors (or a stack of them, shape (k, N))."""
        r = np.asarray(r, dtype=float)
        lead = r.shape[:-1]
        img = ihaar2d(r.reshape(lead + self.shape))
        return haar2d(self.apply_image(img)).reshape(lead + (self.n,))

    def _blocks(self):
        for start in range(0, self.n, self._block):
            stop = min(start + self._block, self.n)
            e = np.zeros((stop - start, self.n))
            e[np.arange(stop - start), np.arange(start, stop)] = 1.0
            yield start, stop, e

    def dense(self) -> np.ndarray:
        """Explicit ``Jt`` (symmetric), built column block by column block."""
        out = np.empty((self.n, self.n))
        for start, stop, e in self._blocks():
            out[start:stop] = self.apply(e)
        return 0.5 * (out + out.T)

    @property
    def diag(self) -> np.ndarray:
        """``diag(Jt)`` accumulated from the basis images, without forming ``Jt``."""
        if self._diag is None:
            d = np.empty(self.n)
            for start, stop, e in self._blocks():
                basis = ihaar2d(e.reshape((-1,) + self.shape))
                spec = np.abs(fft2o(basis)) ** 2
                val = np.sum(spec * self._mask, axis=(-2, -1))
                if self.gamma:
                    val = val + self.gamma * (
                        np.sum(second_difference(basis, -2) ** 2, axis=(-2, -1))
                        + np.sum(second_difference(basis, -1) ** 2, axis=(-2, -1)))
                d[start:stop] = val
            self._diag = d
        return self._diag


def build_effective_operators(prob: KSpaceProblem):
    """Return ``(jt_apply, d_diag, zeeman)`` with ``zeeman = D bt`` (normalized).

    Raises
    ------
    ValueError
        If a diagonal entry of ``Jt`` vanishes (that coefficient is unobserved).
    """
    ops = ImagingOperators(prob)
    diag = ops.diag
    bad = np.flatnonzero(diag <= 1e-14)
    if bad.size:
        raise ValueError(f"coefficient {bad[0]} has zero diagonal entry; cannot normalize")
    d = 1.0 / np.sqrt(diag)
    return ops.apply, d, d * ops.zeeman


class ImagingCoupling(Coupling):
    """Coupling in Haar coordinates, normalized (``J = D Jt D``) or raw (``Jt``).

    Support solves use conjugate gradients on the restricted system; the
    number of solves that missed the tolerance is kept in ``cg_failures``.
    """

    def __init__(self, prob: KSpaceProblem, *, normalized: bool = True,
                 dense: bool | None = None, cg_tol: float = 1e-10, cg_maxiter: int = 5000):
        self.prob = prob
        self.ops = ImagingOperators(prob)
        self.n = prob.n
        self.normalized = normalized
        raw_diag = self.ops.diag
        bad = np.flatnonzero(raw_diag <= 1e-14)
        if bad.size:
            raise ValueError(f"coefficient {bad[0]} has zero diagonal entry; cannot normalize")
        self.scale = 1.0 / np.sqrt(raw_diag) if normalized else np.ones(self.n)
        self.zeeman = self.scale * self.ops.zeeman
        self.cg_tol = cg_tol
        self.cg_maxiter = cg_maxiter
        self.cg_failures = 0
        use_dense = self.n <= DENSE_LIMIT if dense is None else dense
        self._dense = None
        if use_dense:
            jt = self.ops.dense()
            self._dense = self.scale[:, None] * jt * self.scale[None, :]
            self.diag = np.diag(self._dense).copy()
        else:
            self.diag = self.scale * raw_diag * self.scale

    @property
    def dense(self):
        return self._dense

    def matvec(self, v):
        if self._dense is not None:
            return self._dense @ v
        return self.scale * self.ops.apply(self.scale * v)

    def column(self, i):
        if self._dense is not None:
            return self._dense[:, i]
        return super().column(i)

    def solve_support(self, support):
        support = np.asarray(support, dtype=np.intp)
        k = support.size
        if k == 0:
            return np.zeros(0)
        if self._dense is not None:
            sub = self._dense[np.ix_(support, support)]
            mv = sub.__matmul__
        else:
            def mv(v):
                full = np.zeros(self.n)
                full[support] = v
                return self.matvec(full)[support]
        rhs = self.zeeman[support]
        op = spla.LinearOperator((k, k), matvec=mv, dtype=float)
        sol, info = spla.cg(op, rhs, rtol=self.cg_tol, atol=0.0, maxiter=self.cg_maxiter)
        if info != 0:
            self.cg_failures += 1
            res = np.linalg.norm(mv(sol) - rhs) / max(np.linalg.norm(rhs), 1e-300)
            if not np.isfinite(res) or res > 1e-6:
                raise RankDeficiencyError(k, f"CG stalled at relative residual {res:.3g}")
        return sol

    def to_image(self, r_prime) -> np.ndarray:
        """Image ``Psi^T D r'`` of a coefficient vector in this coupling's coordinates."""
        return ihaar2d((self.scale * np.asarray(r_prime)).reshape(self.prob.image_size))

    def from_image(self, image) -> np.ndarray:
        return haar2d(image).ravel() / self.scale


# --- reconstructions ------------------------------------------------------------

def image_rmse(estimate, truth) -> float:
    estimate, truth = np.asarray(estimate, dtype=float), np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))


def zero_fill(prob: KSpaceProblem) -> np.ndarray:
    """Real part of the inverse transform of the zero-filled samples."""
    return np.real(ifft2o(prob.zero_filled()))


@dataclass
class Reconstruction:
    image: np.ndarray
    rmse: float
    info: dict = field(default_factory=dict)


def reconstruct_l0(prob: KSpaceProblem, cfg: HybridConfig, rng: np.random.Generator, *,
                   coupling: ImagingCoupling | None = None) -> Reconstruction:
    """Hybrid L0 reconstruction in normalized Haar coordinates."""
    cpl = coupling or ImagingCoupling(prob, normalized=True)
    if not cpl.normalized:
        raise ValueError("the L0 solver needs the normalized coupling")
    truth = cpl.from_image(prob.image)
    res: HybridResult = run_hybrid(cpl, cfg, rng, truth=truth)
    img = cpl.to_image(res.r * res.sigma)
    return Reconstruction(img, image_rmse(img, prob.image),
                          {"support": int(np.count_nonzero(res.sigma)), "energy": res.energy,
                           "rank_deficient": res.rank_deficient, "cg_failures": cpl.cg_failures,
                           "result": res})


def reconstruct_lasso(prob: KSpaceProblem, eta: float, *, coupling: ImagingCoupling | None = None,
                      max_iters: int = 20000, tol: float = 1e-9) -> Reconstruction:
    """LASSO with the L1 weight on the raw Haar coefficients ``Psi x``."""
    cpl = coupling or ImagingCoupling(prob, normalized=False)
    if cpl.normalized:
        raise ValueError("LASSO uses the raw (unnormalized) coupling")
    res = run_ista(cpl, eta, Chi.SIGNED, max_iters=max_iters, tol=tol, accelerate=True)
    img = cpl.to_image(res.x)
    return Reconstruction(img, image_rmse(img, prob.image),
                          {"converged": res.converged, "iterations": res.iterations})


class _SymmetricSampling:
    """Observation of real images on the conjugate-symmetric closure of the mask.

    On that set ``forward o adjoint`` is the identity for conjugate-symmetric
    data, which is all a real image can produce.
    """

    def __init__(self, mask):
        flat = mask.ravel()
        self.mask = (flat | flat[conjugate_index(mask.shape)]).reshape(mask.shape)

    def forward(self, x):
        return fft2o(x)[self.mask]

    def adjoint(self, d):
        k = np.zeros(self.mask.shape, dtype=complex)
        k[self.mask] = d
        return np.real(ifft2o(k))


def reconstruct_l1eq(prob: KSpaceProblem, gamma_prime: float | None = None, *,
                     max_iters: int = 3000, tol: float = 1e-7) -> Reconstruction:
    """Minimize ``|Psi x|_1 + gamma' (|Dv x|^2 + |Dh x|^2)`` subject to ``S F x = y``."""
    gp = prob.gamma if gamma_prime is None else gamma_prime
    op = _SymmetricSampling(prob.mask)
    y = op.forward(prob.image)
    res: L1EqResult = solve_l1_equality(op, y, gp, max_iters, tol, analysis=haar2d, synthesis=ihaar2d,
                                        smooth=smoothness)
    return Reconstruction(res.x, image_rmse(res.x, prob.image),
                          {"converged": res.converged, "iterations": res.iterations,
                           "feasibility": res.feasibility})


def reconstruct_zero_fill(prob: KSpaceProblem) -> Reconstruction:
    img = zero_fill(prob)
    return Reconstruction(img, image_rmse(img, prob.image), {})


# --- image files -----------------------------------------------------------------

def write_pgm(path, image, *, maxval: int = 255, sidecar: bool = True) -> Path:
    """ASCII PGM (P2) scaled to ``[0, maxval]`` plus an exact float64 sidecar ``.f64``.

    The sidecar holds two little-endian int64 dimensions followed by the
    row-major float64 pixels.
    """
    path = Path(path)
    img = np.asarray(image, dtype=float)
    lo, hi = float(img.min()), float(img.max())
    span = hi - lo if hi > lo else 1.0
    levels = np.rint((img - lo) / span * maxval).astype(int) if maxval > 1 else (img > 0).astype(int)
    with path.open("w") as fh:
        fh.write(f"P2\n{img.shape[1]} {img.shape[0]}\n{maxval}\n")
        for row in levels:
            fh.write(" ".join(map(str, row)) + "\n")
    if sidecar:
        with path.with_suffix(".f64").open("wb") as fh:
            fh.write(np.array(img.shape, dtype="<i8").tobytes())
            fh.write(np.ascontiguousarray(img, dtype="<f8").tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Integer pixel levels of an ASCII PGM file."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM file")
    cols, rows, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array(tokens[4:4 + rows * cols], dtype=int)
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated pixel data")
    return data.reshape(rows, cols)


def read_sidecar(path) -> np.ndarray:
    """Exact image from the float64 sidecar written by :func:`write_pgm`."""
    raw = Path(path).with_suffix(".f64").read_bytes()
    rows, cols = np.frombuffer(raw[:16], dtype="<i8")
    return np.frombuffer(raw[16:], dtype="<f8").reshape(int(rows), int(cols)).copy()


def write_mask(path, mask) -> Path:
    return write_pgm(path, np.asarray(mask, dtype=float), maxval=1, sidecar=False)


def read_mask(path) -> np.ndarray:
    return read_pgm(path).astype(bool)
