"""Sparse random sketches of long binary measurement vectors.

The sketch is a D x S matrix with ``max(1, round(k * S))`` Gaussian
nonzeros per row at uniformly chosen distinct columns.  Entries are
scaled by sqrt(S / (D * nnz_per_row)) so a sketched vector's squared
norm is an unbiased estimate of the original's; at k = 1 this is the
familiar dense 1/sqrt(D).  Applying the sketch to a binary vector only
ever touches the columns at set bits, so the full basis of template
silhouettes is sketched one column at a time and the S x T silhouette
matrix itself is never materialized.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraRig
from .errors import DimensionMismatchError, FormatError
from .geometry import TemplateLibrary
from .rasterizer import MeasurementVector, scene_bits
from .seeding import make_generator


@dataclass(eq=False)
class SketchMatrix:
    """A seeded sparse Gaussian projection.

    ``cols``/``vals`` hold each row's nonzero column indices (strictly
    increasing) and values as (n_rows, nnz_per_row) arrays.
    """

    n_rows: int
    n_cols: int
    density: float
    seed: int
    cols: np.ndarray
    vals: np.ndarray
    _csc: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.vals, dtype=float)
        if cols.ndim != 2 or cols.shape[0] != self.n_rows or vals.shape != cols.shape:
            raise ValueError("cols and vals must be (n_rows, nnz_per_row) arrays")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise ValueError("column indices out of range")
        if cols.shape[1] > 1 and not np.all(np.diff(cols, axis=1) > 0):
            raise ValueError("column indices must be strictly increasing within a row")
        self.cols = cols
        self.vals = vals

    @property
    def nnz_per_row(self) -> int:
        return int(self.cols.shape[1])

    def _csc_layout(self):
        """Column-sorted copy of the nonzeros, cached for fast applies."""
        if self._csc is None:
            flat_cols = self.cols.ravel()
            order = np.argsort(flat_cols, kind="stable")
            sorted_cols = flat_cols[order]
            rows = np.repeat(
                np.arange(self.n_rows, dtype=np.int64), self.nnz_per_row
            )[order]
            vals = self.vals.ravel()[order]
            col_ptr = np.searchsorted(sorted_cols, np.arange(self.n_cols + 1))
            self._csc = (col_ptr, rows, vals)
        return self._csc


def expected_nnz_per_row(n_cols: int, density: float) -> int:
    return max(1, int(round(density * n_cols)))


def build_sketch(n_rows: int, n_cols: int, density: float, seed: int, rng: str = "philox") -> SketchMatrix:
    """Draw a sketch matrix from a named counter-based generator.

    Row contents are drawn row by row (column indices without
    replacement, then values), so the same (dimensions, density, seed)
    always yields the same matrix.
    """
    if not 1 <= n_rows <= n_cols:
        raise ValueError(f"need 1 <= n_rows <= n_cols, got {n_rows}, {n_cols}")
    if not 0.0 < density <= 1.0:
        raise ValueError(f"density must be in (0, 1], got {density}")
    if density * n_cols < 1.0:
        raise ValueError(f"density {density} leaves rows empty at {n_cols} columns")
    nnz = expected_nnz_per_row(n_cols, density)
    scale = np.sqrt(n_cols / (n_rows * nnz))
    gen = make_generator(seed, rng)
    cols = np.empty((n_rows, nnz), dtype=np.int64)
    vals = np.empty((n_rows, nnz), dtype=float)
    for r in range(n_rows):
        cols[r] = np.sort(gen.choice(n_cols, size=nnz, replace=False))
        vals[r] = gen.standard_normal(nnz) * scale
    return SketchMatrix(n_rows, n_cols, density, seed, cols, vals)


def apply_sketch(phi: SketchMatrix, measurement) -> np.ndarray:
    """Multiply the sketch by a binary vector, touching set bits only."""
    if isinstance(measurement, MeasurementVector):
        if measurement.n_bits != phi.n_cols:
            raise DimensionMismatchError(
                f"sketch expects {phi.n_cols} bits, measurement has {measurement.n_bits}"
            )
        bits = measurement.to_bool()
    else:
        bits = np.asarray(measurement).astype(bool).ravel()
        if bits.size != phi.n_cols:
            raise DimensionMismatchError(
                f"sketch expects {phi.n_cols} bits, vector has {bits.size}"
            )
    support = np.flatnonzero(bits)
    if support.size == 0:
        return np.zeros(phi.n_rows)
    col_ptr, rows, vals = phi._csc_layout()
    starts = col_ptr[support]
    lengths = col_ptr[support + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(phi.n_rows)
    bases = np.repeat(starts, lengths)
    offsets = np.arange(total) - np.repeat(
        np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths
    )
    take = bases + offsets
    return np.bincount(rows[take], weights=vals[take], minlength=phi.n_rows)


@dataclass(eq=False)
class SketchedBasis:
    """Sketched silhouette columns for a library, one per template id."""

    entries: np.ndarray
    template_ids: tuple[int, ...]

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ValueError("entries must be 2-dimensional")
        ids = tuple(int(i) for i in self.template_ids)
        if entries.shape[1] != len(ids):
            raise DimensionMismatchError(
                f"{entries.shape[1]} columns for {len(ids)} template ids"
            )
        self.entries = entries
        self.template_ids = ids


def sketch_basis(phi: SketchMatrix, library: TemplateLibrary, rig: CameraRig) -> SketchedBasis:
    """Sketch every template's stacked silhouette, streaming one at a time.

    Peak memory is the output plus one unsketched silhouette; the
    template-silhouette matrix never exists as a whole.
    """
    if rig.n_bits != phi.n_cols:
        raise DimensionMismatchError(
            f"sketch expects {phi.n_cols} bits, rig renders {rig.n_bits}"
        )
    entries = np.empty((phi.n_rows, len(library)))
    ids = []
    for j, template in enumerate(library.templates):
        bits = scene_bits([template], rig)
        entries[:, j] = apply_sketch(phi, bits)
        ids.append(template.id)
    return SketchedBasis(entries, tuple(ids))


def _sketch_text(phi: SketchMatrix) -> str:
    lines = [
        f"SKETCH 1 {phi.n_rows} {phi.n_cols} {repr(float(phi.density))} {phi.seed}"
    ]
    for r in range(phi.n_rows):
        parts = [str(phi.nnz_per_row)]
        for c, v in zip(phi.cols[r], phi.vals[r]):
            parts.append(str(int(c)))
            parts.append(repr(float(v)))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def save_sketch(phi: SketchMatrix, path) -> None:
    """Write the sketch in its text format.

    ``SKETCH 1 D S k seed`` header, then one line per row holding the
    nonzero count followed by alternating column index and value.  The
    file pins the matrix exactly, independent of any generator.
    """
    Path(path).write_text(_sketch_text(phi), encoding="ascii")


def sketch_digest(phi: SketchMatrix) -> str:
    """SHA-256 of the sketch's canonical text serialization."""
    return hashlib.sha256(_sketch_text(phi).encode("ascii")).hexdigest()


def load_sketch(path) -> SketchMatrix:
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.rstrip("\n") for line in handle if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty sketch file")
    header = lines[0].split()
    if len(header) != 6 or header[0] != "SKETCH" or header[1] != "1":
        raise FormatError(f"{path}: expected 'SKETCH 1 D S k seed' header")
    try:
        n_rows, n_cols = int(header[2]), int(header[3])
        density = float(header[4])
        seed = int(header[5])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header field") from exc
    if len(lines) - 1 != n_rows:
        raise FormatError(f"{path}: header promises {n_rows} rows, found {len(lines) - 1}")
    cols_rows = []
    vals_rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        try:
            count = int(fields[0])
            if len(fields) != 1 + 2 * count:
                raise ValueError(f"row promises {count} nonzeros")
            cols_rows.append([int(v) for v in fields[1::2]])
            vals_rows.append([float(v) for v in fields[2::2]])
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    try:
        return SketchMatrix(
            n_rows, n_cols, density, seed, np.array(cols_rows), np.array(vals_rows)
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_basis(basis: SketchedBasis, path, phi: SketchMatrix | None = None) -> None:
    """Cache a sketched basis: raw little-endian float64 plus a sidecar.

    The data file holds the D x T entries column-major; ``path``.json
    records dimensions, template ids, and (when ``phi`` is given) the
    SHA-256 of the sketch that produced it, so stale caches are
    detectable.
    """
    path = Path(path)
    entries = np.ascontiguousarray(basis.entries.T, dtype="<f8")
    path.write_bytes(entries.tobytes())
    meta = {
        "n_rows": int(basis.entries.shape[0]),
        "n_templates": int(basis.entries.shape[1]),
        "template_ids": list(basis.template_ids),
        "dtype": "<f8",
        "layout": "column-major",
        "sketch_sha256": sketch_digest(phi) if phi is not None else None,
    }
    Path(str(path) + ".json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="ascii"
    )


def load_basis(path, phi: SketchMatrix | None = None) -> SketchedBasis:
    """Load a cached basis, verifying the sketch hash when ``phi`` is given."""
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    try:
        meta = json.loads(sidecar.read_text(encoding="ascii"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{sidecar}: unreadable basis sidecar: {exc}") from exc
    n_rows = int(meta["n_rows"])
    n_templates = int(meta["n_templates"])
    if phi is not None:
        recorded = meta.get("sketch_sha256")
        if recorded is not None and recorded != sketch_digest(phi):
            raise FormatError(f"{path}: basis was built from a different sketch")
    raw = np.frombuffer(path.read_bytes(), dtype="<f8")
    if raw.size != n_rows * n_templates:
        raise FormatError(f"{path}: expected {n_rows * n_templates} entries, found {raw.size}")
    entries = raw.reshape(n_templates, n_rows).T.copy()
    return SketchedBasis(entries, tuple(int(i) for i in meta["template_ids"]))
