"""Noise tensor representation and elementary operations.

A noise tensor is the searchable starting latent of the sampler: a flat
float64 array tagged with its logical multi-dimensional shape and a
"batched view" (C_s slices of N_s x N_s matrices) used by the compressed
search space. All operations are pure; values are frozen after
construction so tensors can be shared across concurrent evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, NumericError, ShapeError

_VAR_EPS = 1e-12


def _default_batched_view(dims: tuple[int, ...]) -> tuple[int, int] | None:
    # Heuristic: if the trailing two axes form a square matrix, fold the
    # leading axes into slices. Shapes that need a different folding
    # (e.g. [14,32,32,32] -> (7, 256)) must pass batched_view explicitly.
    if len(dims) >= 3 and dims[-1] == dims[-2] and dims[-1] >= 2:
        lead = math.prod(dims[:-2])
        return (lead, dims[-1])
    return None


@dataclass(frozen=True)
class TensorShape:
    """Logical shape of a noise tensor plus its batched-matrix view.

    ``batched_view`` is ``(C_s, N_s)``: the tensor reshapes losslessly to
    C_s square matrices of side N_s. ``None`` means the shape admits no
    compressed view (singular-space operations will reject it).
    """

    dims: tuple[int, ...]
    batched_view: tuple[int, int] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims or any(d <= 0 for d in dims):
            raise ShapeError(f"dims must be positive integers, got {dims}")
        view = self.batched_view
        if view is None:
            view = _default_batched_view(dims)
        else:
            view = (int(view[0]), int(view[1]))
        if view is not None:
            c_s, n_s = view
            if c_s < 1 or n_s < 2:
                raise ShapeError(f"batched view {view} requires C_s >= 1, N_s >= 2")
            if c_s * n_s * n_s != self.size:
                raise ShapeError(
                    f"batched view {view} has {c_s * n_s * n_s} elements, "
                    f"dims {dims} have {self.size}"
                )
        object.__setattr__(self, "batched_view", view)

    @property
    def size(self) -> int:
        return math.prod(self.dims)

    def require_batched_view(self) -> tuple[int, int]:
        if self.batched_view is None:
            raise ShapeError(f"shape {self.dims} has no batched-matrix view")
        return self.batched_view


@dataclass(frozen=True)
class NoiseTensor:
    """Immutable flat noise array with shape metadata and seed lineage."""

    shape: TensorShape
    values: np.ndarray
    seed_lineage: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if values.size != self.shape.size:
            raise ShapeError(
                f"got {values.size} values for shape {self.shape.dims} "
                f"({self.shape.size} elements)"
            )
        if not np.all(np.isfinite(values)):
            raise NumericError("noise tensor contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def with_values(self, values: np.ndarray, note: str | None = None) -> "NoiseTensor":
        lineage = self.seed_lineage + (note,) if note else self.seed_lineage
        return NoiseTensor(self.shape, values, lineage)


def sample_standard_noise(shape: TensorShape, rng: np.random.Generator) -> NoiseTensor:
    """Draw i.i.d. standard-normal noise of the given shape.

    This is the single canonical normal-sampling routine of the package;
    all other modules draw normals through the same generator API so that
    (seed, shape) determines the output bit-exactly.
    """
    values = rng.standard_normal(shape.size)
    return NoiseTensor(shape, values, seed_lineage=("standard_normal",))


def gaussian_normalize(x: NoiseTensor, mode: str = "std") -> NoiseTensor:
    """Recenter and rescale a tensor toward a standard normal.

    Global scalar statistics over all elements. ``mode="std"`` divides by
    the population standard deviation (yields zero mean, unit std, and is
    idempotent); ``mode="variance"`` divides by the population variance,
    the literal form of the normalization formula. For near-unit-variance
    noise the two nearly coincide.
    """
    if mode not in ("std", "variance"):
        raise ValueError(f"unknown normalization mode {mode!r}")
    v = x.values
    mean = v.mean()
    var = v.var()
    if var <= _VAR_EPS:
        raise DegenerateInputError(
            f"population variance {var:.3e} <= {_VAR_EPS}; normalization undefined"
        )
    denom = math.sqrt(var) if mode == "std" else var
    return x.with_values((v - mean) / denom, note=f"gn:{mode}")


def normalize_array(values: np.ndarray, mode: str = "std") -> np.ndarray:
    """Array-level counterpart of :func:`gaussian_normalize`."""
    mean = values.mean()
    var = values.var()
    if var <= _VAR_EPS:
        raise DegenerateInputError(
            f"population variance {var:.3e} <= {_VAR_EPS}; normalization undefined"
        )
    denom = math.sqrt(var) if mode == "std" else var
    return (values - mean) / denom


def to_batched(x: NoiseTensor) -> np.ndarray:
    """Row-major relabeling to (C_s, N_s, N_s) matrices. Lossless."""
    c_s, n_s = x.shape.require_batched_view()
    return x.values.reshape(c_s, n_s, n_s)


def from_batched(batched: np.ndarray, shape: TensorShape) -> NoiseTensor:
    """Inverse of :func:`to_batched`; bit-exact round trip."""
    c_s, n_s = shape.require_batched_view()
    arr = np.asarray(batched, dtype=np.float64)
    if arr.shape != (c_s, n_s, n_s):
        raise ShapeError(f"expected batched shape {(c_s, n_s, n_s)}, got {arr.shape}")
    return NoiseTensor(shape, arr.reshape(-1))
