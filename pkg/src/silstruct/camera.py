"""Pinhole cameras as 3x4 projection matrices, plus multi-view rigs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, FormatError, PointAtInfinityError

_W_EPS = 1e-12


@dataclass(eq=False)
class ProjectionMatrix:
    """A finite pinhole camera with its image dimensions.

    ``entries`` is the 3x4 matrix mapping homogeneous world points to
    homogeneous pixel coordinates; its left 3x3 block must be invertible
    (finite camera).  Pixel (i, j) covers [i, i+1) x [j, j+1), so the
    image spans [0, width) x [0, height).
    """

    entries: np.ndarray
    image_width: int
    image_height: int

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.shape != (3, 4):
            raise ValueError(f"projection matrix must be 3x4, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("projection matrix must be finite")
        scale = float(np.abs(entries[:, :3]).max())
        det = float(np.linalg.det(entries[:, :3]))
        if scale == 0.0 or abs(det) <= 1e-12 * scale**3:
            raise ValueError("left 3x3 block must have nonzero determinant")
        self.entries = entries
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be positive")


def project_point(camera: ProjectionMatrix, point) -> tuple[float, float]:
    """Project one world point to pixel coordinates.

    Raises
    ------
    PointAtInfinityError
        If the homogeneous depth is smaller than 1e-12 in magnitude.
    """
    x, y = project_points(camera, np.asarray(point, dtype=float).reshape(1, 3))[0]
    return float(x), float(y)


def project_points(camera: ProjectionMatrix, points: np.ndarray) -> np.ndarray:
    """Project an (n, 3) array of world points to an (n, 2) pixel array."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (n, 3), got {pts.shape}")
    homo = camera.entries[:, :3] @ pts.T + camera.entries[:, 3:4]
    w = homo[2]
    if np.any(np.abs(w) < _W_EPS):
        raise PointAtInfinityError("point projects onto the camera's principal plane")
    return (homo[:2] / w).T


@dataclass(eq=False)
class CameraRig:
    """An ordered collection of cameras sharing one image size."""

    cameras: tuple[ProjectionMatrix, ...]

    def __post_init__(self):
        cams = tuple(self.cameras)
        if not cams:
            raise ValueError("a rig needs at least one camera")
        w, h = cams[0].image_width, cams[0].image_height
        for cam in cams:
            if (cam.image_width, cam.image_height) != (w, h):
                raise DimensionMismatchError("all rig cameras must share image dimensions")
        self.cameras = cams

    @property
    def n_views(self) -> int:
        return len(self.cameras)

    @property
    def image_width(self) -> int:
        return self.cameras[0].image_width

    @property
    def image_height(self) -> int:
        return self.cameras[0].image_height

    @property
    def n_bits(self) -> int:
        """Total measurement length: views x width x height."""
        return self.n_views * self.image_width * self.image_height

    @property
    def view_dims(self) -> tuple[tuple[int, int], ...]:
        return tuple((c.image_width, c.image_height) for c in self.cameras)


def ring_rig(
    n_views: int,
    radius: float,
    elevation: float,
    target,
    image_dims: tuple[int, int] = (281, 211),
    focal: float = 300.0,
) -> CameraRig:
    """Cameras on a horizontal ring, all aimed at ``target``.

    View i sits at azimuth 2*pi*i/n_views, ``radius`` out from the target
    and ``elevation`` above it, with square pixels, focal length
    ``focal`` (pixels), and the principal point at the image center, so
    the target projects exactly to (width/2, height/2) in every view.
    """
    if n_views < 1:
        raise ValueError("need at least one view")
    if radius <= 0:
        raise ValueError("radius must be positive")
    target = np.asarray(target, dtype=float)
    width, height = image_dims
    intrinsics = np.array(
        [[focal, 0.0, width / 2.0], [0.0, focal, height / 2.0], [0.0, 0.0, 1.0]]
    )
    up = np.array([0.0, 0.0, 1.0])
    cameras = []
    for i in range(n_views):
        angle = 2.0 * np.pi * i / n_views
        center = target + np.array(
            [radius * np.cos(angle), radius * np.sin(angle), elevation]
        )
        z_axis = target - center
        z_axis = z_axis / np.linalg.norm(z_axis)
        x_axis = np.cross(z_axis, up)
        x_axis = x_axis / np.linalg.norm(x_axis)
        y_axis = np.cross(z_axis, x_axis)
        rotation = np.stack([x_axis, y_axis, z_axis])
        translation = -rotation @ center
        entries = intrinsics @ np.hstack([rotation, translation[:, None]])
        cameras.append(ProjectionMatrix(entries, width, height))
    return CameraRig(tuple(cameras))


def save_rig(rig: CameraRig, path) -> None:
    """Write a rig in the CAMS text format.

    ``CAMS 1 P W H`` header, then one line of 12 reals (row-major 3x4
    matrix) per camera.
    """
    lines = [f"CAMS 1 {rig.n_views} {rig.image_width} {rig.image_height}"]
    for cam in rig.cameras:
        lines.append(" ".join(repr(float(v)) for v in cam.entries.ravel()))
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_rig(path) -> CameraRig:
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.strip() for line in handle if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty rig file")
    header = lines[0].split()
    if len(header) != 5 or header[0] != "CAMS" or header[1] != "1":
        raise FormatError(f"{path}: expected 'CAMS 1 P W H' header")
    try:
        n_views, width, height = (int(v) for v in header[2:])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header fields") from exc
    if len(lines) - 1 != n_views:
        raise FormatError(f"{path}: header promises {n_views} cameras, found {len(lines) - 1}")
    cameras = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if len(fields) != 12:
            raise FormatError(f"{path}:{lineno}: expected 12 entries")
        try:
            entries = np.array([float(v) for v in fields]).reshape(3, 4)
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad entry") from exc
        try:
            cameras.append(ProjectionMatrix(entries, width, height))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    return CameraRig(tuple(cameras))
