"""Compressed search space over singular values.

The noise tensor, viewed as C_s square matrices, is decomposed per slice
as X = U diag(sigma) V^T. Singular vectors are frozen and only the
singular values are searched, shrinking candidate dimensionality from
C_s * N_s^2 to C_s * N_s. When candidate-score diversity collapses (or a
better pivot appears), the space is re-anchored by decomposing the best
noise found so far.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .noise import NoiseTensor, TensorShape, from_batched, gaussian_normalize, to_batched


@dataclass(frozen=True)
class SingularSpace:
    """Frozen per-slice singular frame plus the pivot singular values."""

    U: np.ndarray          # (C_s, N_s, N_s), orthonormal columns per slice
    V: np.ndarray          # (C_s, N_s, N_s), orthonormal columns per slice
    sigma_init: np.ndarray  # (C_s, N_s), non-negative, descending per slice
    source_shape: TensorShape

    @property
    def n_slices(self) -> int:
        return self.U.shape[0]

    @property
    def side(self) -> int:
        return self.U.shape[1]


@dataclass
class SigmaCandidate:
    """A searchable singular-value vector; negatives allowed."""

    values: np.ndarray  # (C_s, N_s)
    score: float | None = field(default=None, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise NumericError("sigma candidate contains non-finite values")


def _canonical_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Deterministic sign convention: the largest-magnitude element of each
    # U column is made non-negative; V columns flip to compensate.
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs, v * signs


def decompose(x: NoiseTensor) -> SingularSpace:
    """Full SVD of each batched slice with a fixed sign convention.

    Singular values are sorted descending per slice; the decomposition is
    deterministic (two calls on the same input are bit-identical).
    """
    batched = to_batched(x)
    if not np.all(np.isfinite(batched)):
        raise NumericError("cannot decompose non-finite input")
    c_s, n_s, _ = batched.shape
    U = np.empty((c_s, n_s, n_s))
    V = np.empty((c_s, n_s, n_s))
    sigma = np.empty((c_s, n_s))
    for i in range(c_s):
        u, s, vt = np.linalg.svd(batched[i], full_matrices=True)
        u, v = _canonical_signs(u, vt.T)
        U[i], V[i], sigma[i] = u, v, s
    return SingularSpace(U=U, V=V, sigma_init=sigma, source_shape=x.shape)


def reconstruct(
    space: SingularSpace, sigma: SigmaCandidate, normalize: bool = False
) -> NoiseTensor:
    """SVD inverse transform: per slice U diag(sigma) V^T, reshaped back.

    With ``normalize=True`` the reconstructed tensor is Gaussian-normalized
    (std mode) before being returned, matching the improved search loops.
    """
    vals = sigma.values
    if vals.shape != space.sigma_init.shape:
        raise ShapeError(
            f"sigma shape {vals.shape} does not match space {space.sigma_init.shape}"
        )
    # U @ diag(s) @ V^T  ==  (U * s[None, :]) @ V^T, batched over slices
    batched = np.einsum("cik,ck,cjk->cij", space.U, vals, space.V)
    out = from_batched(batched, space.source_shape)
    if normalize:
        out = gaussian_normalize(out, mode="std")
    return out


def sample_candidates(
    space: SingularSpace, n: int, eta: float, rng: np.random.Generator
) -> list[SigmaCandidate]:
    """Draw n candidates from N(sigma_init, eta^2 per coordinate).

    Negative results are intentionally not clamped: reconstruction is
    linear in sigma and re-decomposition canonicalizes signs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    base = space.sigma_init
    return [
        SigmaCandidate(base + eta * rng.standard_normal(base.shape)) for _ in range(n)
    ]


def should_reset(scores: list[float], zeta: float) -> bool:
    """True iff the population variance of the scores is below zeta."""
    if len(scores) == 0:
        raise ValueError("scores must be non-empty")
    return float(np.var(np.asarray(scores, dtype=np.float64))) < zeta


def reset_space(best_noise: NoiseTensor) -> SingularSpace:
    """Re-anchor the compressed space at the given (best) noise."""
    return decompose(best_noise)


def singular_vector_similarity(a: SingularSpace, b: SingularSpace) -> float:
    """Mean absolute cosine similarity between index-matched singular vectors.

    Columns are matched by index after the canonical descending sort; U and
    V contribute equally. Returns a scalar in [0, 1].
    """
    if a.U.shape != b.U.shape:
        raise ShapeError(f"space shapes differ: {a.U.shape} vs {b.U.shape}")
    # columns are unit-norm, so the cosine is a plain dot product
    cos_u = np.abs(np.einsum("cik,cik->ck", a.U, b.U))
    cos_v = np.abs(np.einsum("cik,cik->ck", a.V, b.V))
    # round-off can push unit dot products a ulp past 1
    return float(np.clip((cos_u.mean() + cos_v.mean()) / 2.0, 0.0, 1.0))
