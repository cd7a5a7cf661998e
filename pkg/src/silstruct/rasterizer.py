"""Binary silhouette rendering and measurement-vector plumbing.

A silhouette is the filled 2D convex hull of a template's projected
vertices.  Pixel (i, j) covers the half-open square [i, i+1) x [j, j+1);
a pixel is foreground when its center lies inside the hull, with
boundary ties resolved top-left (a center exactly on a top or left edge
counts as inside, on a bottom or right edge as outside), so abutting
hulls never double-claim or drop a pixel.

Multi-view measurements are the views' row-major pixels concatenated in
camera order and bit-packed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bitpack
from .camera import CameraRig, ProjectionMatrix, project_points
from .errors import DimensionMismatchError, FormatError
from .geometry import Template, transformed_vertices
from .seeding import make_generator


@dataclass(eq=False)
class SilhouetteImage:
    """A single view's binary mask, shape (height, width)."""

    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.dtype != np.bool_:
            bits = bits.astype(bool)
        if bits.shape != (self.height, self.width):
            raise DimensionMismatchError(
                f"bits shape {bits.shape} does not match (height, width) "
                f"({self.height}, {self.width})"
            )
        self.bits = bits

    def count(self) -> int:
        """Number of foreground pixels."""
        return int(self.bits.sum())


@dataclass(eq=False)
class MeasurementVector:
    """Bit-packed concatenation of one or more silhouette views."""

    packed: np.ndarray
    n_bits: int
    view_dims: tuple[tuple[int, int], ...]

    def __post_init__(self):
        packed = np.asarray(self.packed, dtype=np.uint8)
        dims = tuple((int(w), int(h)) for w, h in self.view_dims)
        total = sum(w * h for w, h in dims)
        if total != self.n_bits:
            raise DimensionMismatchError(
                f"view dims sum to {total} bits but n_bits is {self.n_bits}"
            )
        if packed.shape != ((self.n_bits + 7) // 8,):
            raise DimensionMismatchError("packed length does not match n_bits")
        # Zero any padding bits so popcounts stay exact.
        tail = self.n_bits % 8
        if tail and packed.size:
            packed = packed.copy()
            packed[-1] &= np.uint8(0xFF << (8 - tail) & 0xFF)
        self.packed = packed
        self.view_dims = dims

    @property
    def view_offsets(self) -> tuple[int, ...]:
        """Bit offset of each view's first pixel."""
        sizes = [w * h for w, h in self.view_dims]
        return tuple(int(v) for v in np.concatenate([[0], np.cumsum(sizes)[:-1]]))

    def to_bool(self) -> np.ndarray:
        return bitpack.unpack(self.packed, self.n_bits)

    def count(self) -> int:
        return bitpack.popcount(self.packed)


def from_bits(bits, view_dims) -> MeasurementVector:
    """Pack a flat boolean vector into a measurement."""
    bits = np.asarray(bits).astype(bool).ravel()
    return MeasurementVector(bitpack.pack(bits), bits.size, tuple(view_dims))


def convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Convex hull by monotone chain, counterclockwise, collinear dropped.

    Degenerate inputs return fewer than 3 points: a single point for
    coincident inputs, two extreme points for collinear ones.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) == 1:
        return pts

    def build(seq):
        chain: list[np.ndarray] = []
        for p in seq:
            while len(chain) >= 2 and _turn(chain[-2], chain[-1], p) <= 0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(pts)
    upper = build(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def _turn(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def fill_convex(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Rasterize the filled convex hull of ``points`` into a bool mask.

    Fewer than 3 distinct hull points fall back to a line (or single
    pixel), never an empty or full image, so degenerate projections stay
    representable.
    """
    img = np.zeros((height, width), dtype=bool)
    hull = convex_hull_2d(points)
    if len(hull) <= 2:
        _mark_segment(img, hull[0], hull[-1])
        return img
    xmin, ymin = hull.min(axis=0)
    xmax, ymax = hull.max(axis=0)
    i0 = max(0, int(np.floor(xmin - 0.5)))
    i1 = min(width - 1, int(np.ceil(xmax - 0.5)))
    j0 = max(0, int(np.floor(ymin - 0.5)))
    j1 = min(height - 1, int(np.ceil(ymax - 0.5)))
    if i0 > i1 or j0 > j1:
        return img
    centers_x = np.arange(i0, i1 + 1) + 0.5
    centers_y = np.arange(j0, j1 + 1) + 0.5
    x = centers_x[None, :]
    y = centers_y[:, None]
    inside = np.ones((centers_y.size, centers_x.size), dtype=bool)
    for k in range(len(hull)):
        ax, ay = hull[k]
        bx, by = hull[(k + 1) % len(hull)]
        dx = bx - ax
        dy = by - ay
        cross = dx * (y - ay) - dy * (x - ax)
        # Interior is the math-left of each CCW edge; with image y down,
        # "left or top" edges (dy < 0, or dy == 0 with dx > 0) own their
        # boundary pixels.
        if dy < 0 or (dy == 0 and dx > 0):
            inside &= cross >= 0
        else:
            inside &= cross > 0
    img[j0 : j1 + 1, i0 : i1 + 1] = inside
    return img


def _mark_segment(img: np.ndarray, p0, p1) -> None:
    height, width = img.shape
    length = float(np.hypot(p1[0] - p0[0], p1[1] - p0[1]))
    n = max(2, int(np.ceil(length * 8)) + 1)
    ts = np.linspace(0.0, 1.0, n)
    xs = np.floor(p0[0] + ts * (p1[0] - p0[0])).astype(int)
    ys = np.floor(p0[1] + ts * (p1[1] - p0[1])).astype(int)
    keep = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)
    img[ys[keep], xs[keep]] = True


def render_silhouette(template: Template, camera: ProjectionMatrix) -> SilhouetteImage:
    """Project a template's vertices and fill their convex hull."""
    pts = project_points(camera, transformed_vertices(template))
    bits = fill_convex(pts, camera.image_width, camera.image_height)
    return SilhouetteImage(camera.image_width, camera.image_height, bits)


def scene_bits(templates, rig: CameraRig) -> np.ndarray:
    """Flat boolean union silhouette of ``templates`` across all views."""
    views = []
    for camera in rig.cameras:
        acc = np.zeros((camera.image_height, camera.image_width), dtype=bool)
        for template in templates:
            acc |= render_silhouette(template, camera).bits
        views.append(acc.ravel())
    return np.concatenate(views) if views else np.zeros(0, dtype=bool)


def render_scene(templates, rig: CameraRig) -> MeasurementVector:
    """Render the union (OR) of templates in every view and pack it.

    An empty template list yields the all-background measurement.
    """
    return from_bits(scene_bits(templates, rig), rig.view_dims)


def flatten(images, rig: CameraRig | None = None) -> MeasurementVector:
    """Concatenate per-view images into one packed measurement."""
    images = list(images)
    if not images:
        raise ValueError("need at least one image")
    if rig is not None:
        if len(images) != rig.n_views:
            raise DimensionMismatchError(
                f"{len(images)} images for a {rig.n_views}-view rig"
            )
        for img, cam in zip(images, rig.cameras):
            if (img.width, img.height) != (cam.image_width, cam.image_height):
                raise DimensionMismatchError(
                    f"image is {img.width}x{img.height}, camera expects "
                    f"{cam.image_width}x{cam.image_height}"
                )
    bits = np.concatenate([img.bits.ravel() for img in images])
    return from_bits(bits, [(img.width, img.height) for img in images])


def unflatten(measurement: MeasurementVector) -> list[SilhouetteImage]:
    """Split a measurement back into per-view images."""
    bits = measurement.to_bool()
    images = []
    offset = 0
    for width, height in measurement.view_dims:
        view = bits[offset : offset + width * height].reshape(height, width)
        images.append(SilhouetteImage(width, height, view))
        offset += width * height
    return images


def silhouette_error(a: MeasurementVector, b: MeasurementVector) -> int:
    """Hamming distance between two equal-length measurements."""
    if a.n_bits != b.n_bits:
        raise DimensionMismatchError(
            f"measurement lengths differ: {a.n_bits} vs {b.n_bits}"
        )
    return bitpack.popcount_xor(a.packed, b.packed)


def add_salt_pepper(
    measurement: MeasurementVector, fraction: float, seed: int
) -> MeasurementVector:
    """Resample a seeded fraction of pixel positions with fair coin flips.

    Exactly ``round(fraction * n_bits)`` distinct positions are chosen
    uniformly without replacement; each is set to an independent coin
    flip, so roughly half the chosen positions actually change.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    n = int(round(fraction * measurement.n_bits))
    bits = measurement.to_bool()
    if n:
        rng = make_generator(seed)
        positions = rng.choice(measurement.n_bits, size=n, replace=False)
        bits[positions] = rng.integers(0, 2, size=n).astype(bool)
    return from_bits(bits, measurement.view_dims)


def save_pbm(image: SilhouetteImage, path) -> None:
    """Write a binary PBM (P4); foreground bits become black (1)."""
    header = f"P4\n{image.width} {image.height}\n".encode("ascii")
    rows = np.packbits(image.bits, axis=1)
    with open(path, "wb") as handle:
        handle.write(header + rows.tobytes())


def _pbm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    while pos < len(buf):
        ch = buf[pos : pos + 1]
        if ch == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(buf) and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("truncated PBM header")
    return buf[start:pos], pos


def load_pbm(path) -> SilhouetteImage:
    with open(path, "rb") as handle:
        buf = handle.read()
    try:
        magic, pos = _pbm_token(buf, 0)
        if magic != b"P4":
            raise FormatError(f"expected P4 magic, got {magic!r}")
        wtok, pos = _pbm_token(buf, pos)
        htok, pos = _pbm_token(buf, pos)
        width, height = int(wtok), int(htok)
    except (FormatError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    pos += 1  # single whitespace byte separates header from raster
    row_bytes = (width + 7) // 8
    raster = buf[pos : pos + height * row_bytes]
    if len(raster) != height * row_bytes:
        raise FormatError(f"{path}: raster truncated")
    rows = np.frombuffer(raster, dtype=np.uint8).reshape(height, row_bytes)
    bits = np.unpackbits(rows, axis=1, count=width).astype(bool)
    return SilhouetteImage(width, height, bits)


def save_measurement(measurement: MeasurementVector, manifest_path, stem: str | None = None) -> None:
    """Write per-view PBMs next to a manifest that lists them.

    The manifest is ``MEAS 1 P`` followed by P relative PBM file names.
    """
    manifest_path = Path(manifest_path)
    if stem is None:
        stem = manifest_path.stem
    images = unflatten(measurement)
    names = [f"{stem}_view{i:02d}.pbm" for i in range(len(images))]
    for name, image in zip(names, images):
        save_pbm(image, manifest_path.parent / name)
    text = f"MEAS 1 {len(images)}\n" + "\n".join(names) + "\n"
    manifest_path.write_text(text, encoding="ascii")


def load_measurement(manifest_path) -> MeasurementVector:
    manifest_path = Path(manifest_path)
    lines = [l.strip() for l in manifest_path.read_text(encoding="ascii").splitlines() if l.strip()]
    if not lines:
        raise FormatError(f"{manifest_path}: empty manifest")
    header = lines[0].split()
    if len(header) != 3 or header[:2] != ["MEAS", "1"]:
        raise FormatError(f"{manifest_path}: expected 'MEAS 1 P' header")
    try:
        n_views = int(header[2])
    except ValueError as exc:
        raise FormatError(f"{manifest_path}: bad view count") from exc
    names = lines[1:]
    if len(names) != n_views:
        raise FormatError(
            f"{manifest_path}: header promises {n_views} views, found {len(names)}"
        )
    images = [load_pbm(manifest_path.parent / name) for name in names]
    return flatten(images)
