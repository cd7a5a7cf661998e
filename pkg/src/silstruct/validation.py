"""Input coercion helpers shared by the estimator and the CLI."""

from __future__ import annotations

import numpy as np

from .camera import CameraRig
from .errors import DimensionMismatchError, FormatError
from .rasterizer import MeasurementVector, from_bits


def check_binary_matrix(x) -> np.ndarray:
    """Coerce to a 2D bool array, rejecting anything not 0/1-valued."""
    arr = np.asarray(x)
    if arr.ndim != 2:
        raise FormatError(f"expected a 2D sample matrix, got ndim={arr.ndim}")
    if arr.dtype != bool:
        values = np.unique(arr)
        if not np.isin(values, (0, 1)).all():
            raise FormatError("sample matrix must contain only 0/1 values")
        arr = arr.astype(bool)
    return arr


def as_measurement(sample, rig: CameraRig) -> MeasurementVector:
    """Wrap one flat binary sample as a measurement over the rig's views."""
    if isinstance(sample, MeasurementVector):
        if sample.n_bits != rig.n_bits:
            raise DimensionMismatchError(
                f"measurement has {sample.n_bits} bits, rig expects {rig.n_bits}"
            )
        if sample.view_dims != rig.view_dims:
            raise DimensionMismatchError("measurement view layout does not match rig")
        return sample
    flat = np.asarray(sample).reshape(-1)
    if flat.size != rig.n_bits:
        raise DimensionMismatchError(
            f"sample has {flat.size} bits, rig expects {rig.n_bits}"
        )
    return from_bits(flat.astype(bool), rig.view_dims)
