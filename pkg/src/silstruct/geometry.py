"""Convex 3D primitives, grid poses, and template library enumeration.

A *template* is a primitive shape in a fixed pose: a quarter-turn about
the vertical axis followed by a translation.  Libraries are enumerated
over a regular horizontal grid and a stack of layers, and carry dense
1-based template ids so a coefficient vector indexes them directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicateTemplateIdError,
    EmptyLibraryError,
    FormatError,
    UnknownTemplateIdError,
)

KINDS = ("box", "wedge", "arch-approximation", "leaf-quad")

_PLANAR_KINDS = frozenset({"leaf-quad"})
_BOUNDS_TOL = 1e-9


def _rotate_quarter(vertices: np.ndarray, times: int) -> np.ndarray:
    """Rotate points by ``times`` exact quarter turns about the z axis."""
    out = np.array(vertices, dtype=float, copy=True)
    for _ in range(times % 4):
        x = out[:, 0].copy()
        out[:, 0] = -out[:, 1]
        out[:, 1] = x
    return out


@dataclass(frozen=True, eq=False)
class PrimitiveShape:
    """A convex solid (or planar quad) given by its defining vertices.

    Parameters
    ----------
    name : str
        Identifier without whitespace; appears in library files.
    kind : str
        One of ``KINDS``.  The ``leaf-quad`` kind is a planar quad; the
        other kinds are solids and must span three dimensions.
    vertices : (n, 3) array_like
        Hull-defining vertices in the shape's model frame.
    symmetry : int
        Yaw symmetry order (1, 2 or 4): how many quarter turns map the
        shape onto itself.  Enumeration generates ``4 // symmetry``
        distinct orientations.
    """

    name: str
    kind: str
    vertices: np.ndarray
    symmetry: int = 1

    def __post_init__(self):
        if not self.name or any(ch.isspace() for ch in self.name):
            raise ValueError(f"shape name must be non-empty without whitespace: {self.name!r}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 4:
            raise ValueError("vertices must be an (n, 3) array with n >= 4")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertices must be finite")
        object.__setattr__(self, "vertices", verts)
        if self.symmetry not in (1, 2, 4):
            raise ValueError(f"symmetry must be 1, 2 or 4, got {self.symmetry}")
        scale = float(np.abs(verts).max()) + 1.0
        centered = verts - verts.mean(axis=0)
        spans = np.linalg.svd(centered, compute_uv=False)
        planar = spans[-1] <= 1e-9 * scale
        if self.kind in _PLANAR_KINDS:
            if verts.shape[0] != 4:
                raise ValueError("a leaf-quad needs exactly 4 vertices")
            if not planar:
                raise ValueError("leaf-quad vertices must be coplanar")
        elif planar:
            raise ValueError(f"{self.kind} vertices must span three dimensions")

    @property
    def z_extent(self) -> float:
        zs = self.vertices[:, 2]
        return float(zs.max() - zs.min())


@dataclass(frozen=True)
class Pose:
    """A quarter-turn count about z followed by a translation."""

    rotation: int
    translation: tuple[float, float, float]

    def __post_init__(self):
        if self.rotation not in (0, 1, 2, 3):
            raise ValueError(f"rotation must be in 0..3, got {self.rotation}")
        t = tuple(float(v) for v in self.translation)
        if len(t) != 3 or not all(np.isfinite(t)):
            raise ValueError("translation must be 3 finite reals")
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True, eq=False)
class Template:
    """A shape in a pose, with a 1-based library id."""

    id: int
    shape: PrimitiveShape
    pose: Pose

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"template id must be >= 1, got {self.id}")


def transformed_vertices(template: Template) -> np.ndarray:
    """World-frame vertices of a posed template."""
    verts = _rotate_quarter(template.shape.vertices, template.pose.rotation)
    return verts + np.asarray(template.pose.translation, dtype=float)


@dataclass(frozen=True)
class Box:
    """An axis-aligned box given by its lower and upper corners."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("corners must be 3-vectors")
        if not all(np.isfinite(lo)) or not all(np.isfinite(hi)):
            raise ValueError("corners must be finite")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"lower corner exceeds upper corner: {lo} > {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains_points(self, points: np.ndarray, tol: float = _BOUNDS_TOL) -> bool:
        pts = np.asarray(points, dtype=float)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return bool(np.all(pts >= lo) and np.all(pts <= hi))


@dataclass(eq=False)
class TemplateLibrary:
    """An ordered pool of templates with dense ids 1..T.

    ``scene_bounds`` contains every template's transformed vertices;
    ``grid_pitch`` records the enumeration lattice spacing (0.0 when the
    library was not built on a grid, e.g. after loading from a file).
    """

    templates: list[Template]
    scene_bounds: Box
    grid_pitch: float = 0.0

    def __post_init__(self):
        self.templates = list(self.templates)
        for pos, template in enumerate(self.templates):
            if template.id != pos + 1:
                raise ValueError(
                    f"template ids must be dense and ordered 1..T; "
                    f"position {pos} holds id {template.id}"
                )
            if not self.scene_bounds.contains_points(transformed_vertices(template)):
                raise ValueError(f"template {template.id} falls outside scene bounds")

    def __len__(self) -> int:
        return len(self.templates)

    def __getitem__(self, template_id: int) -> Template:
        """Look a template up by its 1-based id."""
        if not 1 <= template_id <= len(self.templates):
            raise UnknownTemplateIdError(template_id)
        return self.templates[template_id - 1]


def enumerate_library(shapes, bounds: Box, pitch: float, layers: int) -> TemplateLibrary:
    """Enumerate every placement of ``shapes`` on a grid inside ``bounds``.

    Placements step by ``pitch`` along x and y starting at the lower
    corner, stack ``layers`` copies vertically (layer height equals the
    shape's z extent), and cover the shape's distinct quarter-turn
    orientations.  A placement is kept when all transformed vertices lie
    inside ``bounds`` (tolerance 1e-9).  Ids are assigned 1..T in
    (shape, layer, row, column, rotation) order.

    Raises
    ------
    EmptyLibraryError
        If no placement of any shape fits.
    """
    shapes = list(shapes)
    if not shapes:
        raise ValueError("need at least one shape")
    if not (pitch > 0 and np.isfinite(pitch)):
        raise ValueError(f"pitch must be positive and finite, got {pitch}")
    if layers < 1:
        raise ValueError(f"layers must be >= 1, got {layers}")

    lo = np.asarray(bounds.lo)
    hi = np.asarray(bounds.hi)
    steps_x = int(np.floor((hi[0] - lo[0]) / pitch + _BOUNDS_TOL))
    steps_y = int(np.floor((hi[1] - lo[1]) / pitch + _BOUNDS_TOL))

    templates: list[Template] = []
    next_id = 1
    for shape in shapes:
        height = shape.z_extent
        if layers > 1 and height <= 0:
            raise ValueError(f"shape {shape.name!r} has no z extent; cannot stack layers")
        z_base = float(shape.vertices[:, 2].min())
        rotations = range(4 // shape.symmetry)
        rotated = {r: _rotate_quarter(shape.vertices, r) for r in rotations}
        for layer in range(layers):
            tz = float(lo[2]) + layer * height - z_base
            for iy in range(steps_y + 1):
                ty = float(lo[1]) + iy * pitch
                for ix in range(steps_x + 1):
                    tx = float(lo[0]) + ix * pitch
                    offset = np.array([tx, ty, tz])
                    for r in rotations:
                        if bounds.contains_points(rotated[r] + offset):
                            pose = Pose(rotation=r, translation=(tx, ty, tz))
                            templates.append(Template(next_id, shape, pose))
                            next_id += 1
    if not templates:
        raise EmptyLibraryError("no shape placement fits inside the given bounds")
    return TemplateLibrary(templates, bounds, pitch)


def compose_scene(template_ids, library: TemplateLibrary) -> list[Template]:
    """Resolve a list of ids to templates, rejecting unknowns and repeats."""
    seen = set()
    scene = []
    for template_id in template_ids:
        template_id = int(template_id)
        if template_id in seen:
            raise DuplicateTemplateIdError(f"template id {template_id} listed twice")
        seen.add(template_id)
        scene.append(library[template_id])
    return scene


def box_shape(name: str, sx: float, sy: float, sz: float, symmetry: int | None = None) -> PrimitiveShape:
    """An axis-aligned box with one corner at the origin."""
    corners = np.array(
        [[x, y, z] for x in (0.0, sx) for y in (0.0, sy) for z in (0.0, sz)]
    )
    if symmetry is None:
        symmetry = 4 if sx == sy else 2
    return PrimitiveShape(name, "box", corners, symmetry=symmetry)


def wedge_shape(name: str, sx: float, sy: float, sz: float) -> PrimitiveShape:
    """A right triangular prism: a box cut diagonally along x."""
    verts = np.array(
        [
            [0.0, 0.0, 0.0],
            [sx, 0.0, 0.0],
            [sx, sy, 0.0],
            [0.0, sy, 0.0],
            [0.0, 0.0, sz],
            [0.0, sy, sz],
        ]
    )
    return PrimitiveShape(name, "wedge", verts, symmetry=1)


def arch_shape(name: str = "arch4x4", span: float = 4.0, height: float = 1.0) -> PrimitiveShape:
    """A convex stand-in for an arch block: a hip-roofed slab.

    The true part is non-convex (it has a tunnel); its convex hull is a
    ``span`` x ``span`` footprint rising to a ridge along the y axis at
    mid-span, which is what a silhouette of the part looks like from the
    side.  Two quarter turns map it onto itself.
    """
    s = float(span)
    h = float(height)
    ridge_lo = 0.375 * s
    ridge_hi = 0.625 * s
    verts = np.array(
        [
            [0.0, 0.0, 0.0],
            [s, 0.0, 0.0],
            [s, s, 0.0],
            [0.0, s, 0.0],
            [ridge_lo, 0.0, h],
            [ridge_hi, 0.0, h],
            [ridge_lo, s, h],
            [ridge_hi, s, h],
        ]
    )
    return PrimitiveShape(name, "arch-approximation", verts, symmetry=2)


def leaf_quad(name: str, vertices) -> PrimitiveShape:
    return PrimitiveShape(name, "leaf-quad", vertices, symmetry=1)


def _format_floats(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def save_library(library: TemplateLibrary, path) -> None:
    """Write a library in the TLIB text format.

    ``TLIB 1`` header, one ``SHAPE name kind x y z ...`` line per
    distinct shape, then one ``TMPL id shape_idx rot tx ty tz`` line per
    template.  Bounds and pitch are not part of the format; loading
    recomputes tight bounds.
    """
    shape_index: dict[int, int] = {}
    shapes_in_order: list[PrimitiveShape] = []
    for template in library.templates:
        key = id(template.shape)
        if key not in shape_index:
            shape_index[key] = len(shapes_in_order)
            shapes_in_order.append(template.shape)
    lines = ["TLIB 1"]
    for shape in shapes_in_order:
        coords = _format_floats(shape.vertices.ravel())
        lines.append(f"SHAPE {shape.name} {shape.kind} {coords}")
    for template in library.templates:
        idx = shape_index[id(template.shape)]
        tx, ty, tz = template.pose.translation
        lines.append(
            f"TMPL {template.id} {idx} {template.pose.rotation} "
            f"{_format_floats((tx, ty, tz))}"
        )
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_library(path) -> TemplateLibrary:
    """Read a TLIB file back into a library.

    Shape symmetry is not stored in the format, so loaded shapes default
    to symmetry 1; scene bounds are the tight box over all transformed
    vertices and the grid pitch is recorded as 0.0 (unknown).
    """
    shapes: list[PrimitiveShape] = []
    templates: list[Template] = []
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or lines[0].strip() != "TLIB 1":
        raise FormatError(f"{path}: expected 'TLIB 1' header")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        tag = fields[0]
        try:
            if tag == "SHAPE":
                name, kind = fields[1], fields[2]
                coords = np.array([float(v) for v in fields[3:]])
                if coords.size == 0 or coords.size % 3:
                    raise ValueError("coordinate count must be a positive multiple of 3")
                shapes.append(PrimitiveShape(name, kind, coords.reshape(-1, 3)))
            elif tag == "TMPL":
                if len(fields) != 7:
                    raise ValueError("TMPL line needs exactly 6 fields after the tag")
                template_id = int(fields[1])
                shape_idx = int(fields[2])
                rot = int(fields[3])
                tx, ty, tz = (float(v) for v in fields[4:7])
                templates.append(
                    Template(template_id, shapes[shape_idx], Pose(rot, (tx, ty, tz)))
                )
            else:
                raise ValueError(f"unknown tag {tag!r}")
        except (ValueError, IndexError) as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    if not templates:
        raise FormatError(f"{path}: no TMPL lines")
    templates.sort(key=lambda t: t.id)
    corners = np.concatenate([transformed_vertices(t) for t in templates])
    bounds = Box(tuple(corners.min(axis=0)), tuple(corners.max(axis=0)))
    return TemplateLibrary(templates, bounds, 0.0)


def save_scene(template_ids, path, comments=None) -> None:
    """Write a scene (id list) in the SCENE text format.

    ``comments`` is an optional mapping or list of strings emitted as a
    trailing ``#``-prefixed block, ignored by :func:`load_scene`.
    """
    lines = ["SCENE 1"]
    lines.extend(f"TMPL_REF {int(i)}" for i in template_ids)
    if comments:
        if isinstance(comments, dict):
            comments = [f"{k}={v}" for k, v in comments.items()]
        lines.extend(f"# {c}" for c in comments)
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def load_scene(path) -> list[int]:
    with open(path, "r", encoding="ascii") as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or lines[0].strip() != "SCENE 1":
        raise FormatError(f"{path}: expected 'SCENE 1' header")
    ids = []
    for lineno, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if fields[0] != "TMPL_REF" or len(fields) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'TMPL_REF <id>'")
        try:
            ids.append(int(fields[1]))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: bad id {fields[1]!r}") from exc
    return ids
