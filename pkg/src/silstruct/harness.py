"""Synthetic scenes, evaluation metrics, and reproducible sweeps.

The synthetic subject is a plant: T candidate leaves sprout from a
common root with seeded random azimuth, elevation, length, and width;
a chosen few are the true scene and the rest are decoys.  A block-scene
benchmark (unit blocks and arch approximations on a stud grid) covers
the culling story.  Sweeps run the full pipeline over a config grid and
serialize per-trial metrics to CSV deterministically: reruns of the
same config are byte-identical, so wall-clock timings stay out of the
CSV (they ride along in the in-memory rows only).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from time import perf_counter

import numpy as np

from . import bitpack
from .camera import CameraRig, ring_rig
from .errors import DimensionMismatchError
from .geometry import (
    Box,
    Pose,
    PrimitiveShape,
    Template,
    TemplateLibrary,
    arch_shape,
    box_shape,
    compose_scene,
    leaf_quad,
)
from .rasterizer import MeasurementVector, add_salt_pepper, render_scene, silhouette_error
from .rounding import SearchConfig, StructureEstimate, round_max, round_search
from .seeding import derive_seed, make_generator
from .sketch import build_sketch
from .solver import deconstruct

_AZIMUTH_RANGE = (0.0, 2.0 * math.pi)
_ELEVATION_RANGE = (math.radians(15.0), math.radians(75.0))
_LENGTH_RANGE = (0.45, 0.95)  # log-uniform
_WIDTH_RANGE = (0.10, 0.30)  # log-uniform
_DEFAULT_ROOT = (0.0, 0.0, 0.06)
_PLANT_BOUNDS = Box((-1.1, -1.1, 0.0), (1.1, 1.1, 1.2))


def _leaf_shape(name: str, azimuth: float, elevation: float, length: float, width: float, root) -> PrimitiveShape:
    """A planar rhombus leaf: root, two mid-rib side points, tip."""
    root = np.asarray(root, dtype=float)
    direction = np.array(
        [
            math.cos(elevation) * math.cos(azimuth),
            math.cos(elevation) * math.sin(azimuth),
            math.sin(elevation),
        ]
    )
    side = np.array([-math.sin(azimuth), math.cos(azimuth), 0.0])
    tip = root + length * direction
    mid = root + 0.5 * length * direction
    quad = np.stack(
        [root, mid + 0.5 * width * side, tip, mid - 0.5 * width * side]
    )
    return leaf_quad(name, quad)


@dataclass(eq=False)
class PlantModel:
    """A sampled plant: per-leaf parameters plus which leaves are real.

    ``leaf_params`` is a (T, 4) array of (azimuth, elevation, length,
    width); ``true_indices`` are 0-based rows forming the true scene.
    """

    leaf_count: int
    leaf_params: np.ndarray
    root: tuple[float, float, float]
    true_indices: np.ndarray

    def __post_init__(self):
        params = np.asarray(self.leaf_params, dtype=float)
        if params.ndim != 2 or params.shape[1] != 4:
            raise ValueError("leaf_params must be (T, 4)")
        if self.leaf_count < 1:
            raise ValueError("leaf_count must be >= 1")
        self.leaf_params = params
        self.true_indices = np.asarray(self.true_indices, dtype=int)

    def _template(self, index: int, params=None) -> Template:
        az, el, length, width = (params if params is not None else self.leaf_params[index])
        shape = _leaf_shape(f"leaf{index + 1:04d}", az, el, length, width, self.root)
        return Template(index + 1, shape, Pose(0, (0.0, 0.0, 0.0)))

    def library(self) -> TemplateLibrary:
        templates = [self._template(i) for i in range(len(self.leaf_params))]
        return TemplateLibrary(templates, _PLANT_BOUNDS, 0.0)

    def true_ids(self) -> tuple[int, ...]:
        return tuple(int(i) + 1 for i in self.true_indices)

    def true_templates(self) -> list[Template]:
        return [self._template(int(i)) for i in self.true_indices]

    def perturbed_true_templates(self, scale: float, seed: int) -> list[Template]:
        """True leaves with parameters jittered at the given scale.

        Used to render a target the library cannot match exactly; the
        realized pixel-change fraction is measured by the caller rather
        than targeted analytically.
        """
        rng = make_generator(seed)
        templates = []
        for i in self.true_indices:
            az, el, length, width = self.leaf_params[int(i)]
            az = az + rng.normal(0.0, 0.9 * scale)
            el = float(
                np.clip(el + rng.normal(0.0, 0.45 * scale), math.radians(5), math.radians(85))
            )
            length = float(np.clip(length * math.exp(rng.normal(0.0, 0.5 * scale)), 0.05, 1.0))
            width = float(np.clip(width * math.exp(rng.normal(0.0, 0.5 * scale)), 0.02, 0.5))
            templates.append(self._template(int(i), (az, el, length, width)))
        return templates


def build_plant_model(
    leaf_count: int, seed: int, t_total: int = 500, root=_DEFAULT_ROOT
) -> PlantModel:
    """Sample T candidate leaves and mark ``leaf_count`` of them true."""
    if not 1 <= leaf_count <= t_total:
        raise ValueError(f"need 1 <= leaf_count <= {t_total}, got {leaf_count}")
    rng = make_generator(seed)
    azimuth = rng.uniform(*_AZIMUTH_RANGE, size=t_total)
    elevation = rng.uniform(*_ELEVATION_RANGE, size=t_total)
    length = np.exp(rng.uniform(*np.log(_LENGTH_RANGE), size=t_total))
    width = np.exp(rng.uniform(*np.log(_WIDTH_RANGE), size=t_total))
    params = np.column_stack([azimuth, elevation, length, width])
    true_indices = np.sort(rng.choice(t_total, size=leaf_count, replace=False))
    return PlantModel(leaf_count, params, tuple(float(v) for v in root), true_indices)


def generate_plant(leaf_count: int, seed: int, t_total: int = 500) -> tuple[list[Template], TemplateLibrary]:
    """Sample a plant and return (true scene templates, full library)."""
    model = build_plant_model(leaf_count, seed, t_total)
    return model.true_templates(), model.library()


def default_rig(
    views: int = 4,
    width: int = 281,
    height: int = 211,
    radius: float = 3.0,
    elevation: float = 0.8,
    focal: float = 300.0,
) -> CameraRig:
    """The plant experiment's camera ring, aimed just above the root."""
    return ring_rig(views, radius, elevation, (0.0, 0.0, 0.45), (width, height), focal)


def _estimate_measurement(estimate, library, rig) -> MeasurementVector:
    if isinstance(estimate, MeasurementVector):
        return estimate
    if isinstance(estimate, StructureEstimate):
        ids = estimate.template_ids
    else:
        ids = tuple(estimate)
    if library is None or rig is None:
        raise ValueError("library and rig are required to render an id estimate")
    return render_scene(compose_scene(ids, library), rig)


def fpe(estimate, target: MeasurementVector, library=None, rig=None) -> float:
    """Fraction of Pixels Explained: target foreground covered by the estimate.

    ``estimate`` may be a StructureEstimate (rendered via ``library`` and
    ``rig``), a bare id collection, or an already-rendered measurement.
    A zero-foreground target scores 1.0 against an empty estimate and is
    an error otherwise.
    """
    rendered = _estimate_measurement(estimate, library, rig)
    if rendered.n_bits != target.n_bits:
        raise DimensionMismatchError(
            f"estimate renders {rendered.n_bits} bits, target has {target.n_bits}"
        )
    foreground = target.count()
    if foreground == 0:
        if rendered.count() == 0:
            return 1.0
        raise ValueError("target has no foreground but the estimate is nonempty")
    covered = bitpack.popcount_and(rendered.packed, target.packed)
    return covered / foreground


def false_positive_rate(estimate, target: MeasurementVector, library=None, rig=None) -> float:
    """Fraction of the estimate's own pixels that fall outside the target."""
    rendered = _estimate_measurement(estimate, library, rig)
    if rendered.n_bits != target.n_bits:
        raise DimensionMismatchError(
            f"estimate renders {rendered.n_bits} bits, target has {target.n_bits}"
        )
    total = rendered.count()
    if total == 0:
        return 0.0
    outside = bitpack.popcount_andnot(rendered.packed, target.packed)
    return outside / total


def recovery_fraction(estimate, true_ids) -> float:
    """|estimate ids intersect true ids| / |true ids|."""
    if isinstance(estimate, StructureEstimate):
        estimate = estimate.template_ids
    true_set = {int(i) for i in true_ids}
    if not true_set:
        raise ValueError("true_ids must be nonempty")
    return len(true_set.intersection(int(i) for i in estimate)) / len(true_set)


def block_benchmark() -> tuple[tuple[int, ...], TemplateLibrary, CameraRig]:
    """A deterministic block scene: arches bridged by unit blocks.

    The library enumerates a 1x1 block and the arch approximation over a
    14x14 stud grid at 4 layers (784 + 968 = 1752 templates); the scene
    is a compact bridge near the grid center.
    """
    block = box_shape("block1x1", 1.0, 1.0, 1.0, symmetry=4)
    arch = arch_shape("arch4x4", span=4.0, height=1.0)
    bounds = Box((0.0, 0.0, 0.0), (14.0, 14.0, 4.0))
    from .geometry import enumerate_library

    library = enumerate_library([block, arch], bounds, 1.0, 4)
    wanted = [
        ("block1x1", 0, (x, 6.0, 1.0)) for x in (3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
    ]
    wanted += [("block1x1", 0, (3.0, 6.0, 2.0)), ("block1x1", 0, (10.0, 6.0, 2.0))]
    wanted += [("arch4x4", 0, (3.0, 5.0, 0.0)), ("arch4x4", 0, (7.0, 5.0, 0.0))]
    index = {
        (t.shape.name, t.pose.rotation, t.pose.translation): t.id
        for t in library.templates
    }
    true_ids = tuple(sorted(index[key] for key in wanted))
    rig = ring_rig(4, radius=34.0, elevation=10.0, target=(7.0, 7.0, 1.2), image_dims=(281, 211), focal=420.0)
    return true_ids, library, rig


@dataclass
class ExperimentConfig:
    """One sweep cell: every knob of the pipeline, JSON-serializable."""

    seed: int = 0
    views: int = 4
    image_width: int = 281
    image_height: int = 211
    t_templates: int = 500
    leaf_count: int = 6
    d: int = 441
    k: float = 0.01
    lam: float = 0.01
    noise_fraction: float = 0.0
    parameter_noise: float = 0.0
    trials: int = 10
    method: str = "search"
    max_n: int | None = None
    cull_threshold: float | None = None
    alpha_threshold: float = 0.01
    min_parts: int = 1
    max_parts: int = 20
    max_candidates: int = 5000
    lambda_search: float = 0.01
    cardinality_reward: bool = False
    rng: str = "philox"
    rig_radius: float = 3.0
    rig_elevation: float = 0.8
    rig_focal: float = 300.0
    capture_alpha: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.method not in ("search", "max"):
            raise ValueError(f"method must be 'search' or 'max', got {self.method!r}")
        for name in ("views", "image_width", "image_height", "t_templates", "leaf_count", "d"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.leaf_count > self.t_templates:
            raise ValueError("leaf_count cannot exceed t_templates")
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError("noise_fraction must be in [0, 1]")
        if self.parameter_noise < 0.0:
            raise ValueError("parameter_noise must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def rig(self) -> CameraRig:
        return default_rig(
            self.views,
            self.image_width,
            self.image_height,
            self.rig_radius,
            self.rig_elevation,
            self.rig_focal,
        )

    def effective_cull_threshold(self) -> float:
        """Explicit threshold, or a noise-aware default.

        Salt-and-pepper noise erodes roughly half the flipped fraction
        out of a true template's silhouette, and parameter noise shifts
        silhouettes bodily, so the margin widens with both.
        """
        if self.cull_threshold is not None:
            return float(self.cull_threshold)
        return min(0.9, 0.05 + 0.6 * self.noise_fraction + 1.5 * self.parameter_noise)


_CSV_COLUMNS = [
    "schema_version",
    "kind",
    "cell",
    "trial",
    "status",
    "seed",
    "views",
    "image_width",
    "image_height",
    "t_templates",
    "leaf_count",
    "d",
    "k",
    "lam",
    "noise_fraction",
    "parameter_noise",
    "realized_pixel_change",
    "method",
    "cull_threshold",
    "n_retained",
    "n_dropped",
    "lp_status",
    "lp_iterations",
    "lp_objective",
    "nnz_alpha",
    "n_selected",
    "error_bits",
    "score",
    "fpe",
    "false_positive",
    "fpe_observed",
    "fpe_truth_observed",
    "recovery_fraction",
    "message",
]

_MEAN_COLUMNS = [
    "realized_pixel_change",
    "cull_threshold",
    "n_retained",
    "n_dropped",
    "lp_iterations",
    "lp_objective",
    "nnz_alpha",
    "n_selected",
    "error_bits",
    "score",
    "fpe",
    "false_positive",
    "fpe_observed",
    "fpe_truth_observed",
    "recovery_fraction",
]


def run_trial(config: ExperimentConfig, cell: int, trial: int) -> dict:
    """Execute one full pipeline pass and collect its metrics row.

    The row holds every CSV column plus two in-memory extras: a
    ``timings`` dict of per-stage seconds and, when ``capture_alpha`` is
    set, the full coefficient vector.
    """
    plant_seed = derive_seed(config.seed, "plant", cell, trial)
    perturb_seed = derive_seed(config.seed, "perturb", cell, trial)
    noise_seed = derive_seed(config.seed, "noise", cell, trial)
    sketch_seed = derive_seed(config.seed, "sketch", cell, trial)

    timings: dict[str, float] = {}
    t0 = perf_counter()
    model = build_plant_model(config.leaf_count, plant_seed, config.t_templates)
    library = model.library()
    rig = config.rig()
    clean = render_scene(model.true_templates(), rig)
    if config.parameter_noise > 0:
        perturbed = model.perturbed_true_templates(config.parameter_noise, perturb_seed)
        base = render_scene(perturbed, rig)
    else:
        base = clean
    realized_change = silhouette_error(clean, base) / clean.n_bits
    observed = (
        add_salt_pepper(base, config.noise_fraction, noise_seed)
        if config.noise_fraction > 0
        else base
    )
    timings["render"] = perf_counter() - t0

    t0 = perf_counter()
    phi = build_sketch(config.d, rig.n_bits, config.k, sketch_seed, config.rng)
    timings["sketch"] = perf_counter() - t0

    cull_threshold = config.effective_cull_threshold()
    t0 = perf_counter()
    solution, cull = deconstruct(
        observed, library, rig, phi, config.lam, cull_threshold
    )
    timings["lp"] = perf_counter() - t0

    t0 = perf_counter()
    if config.method == "search":
        search_config = SearchConfig(
            alpha_threshold=config.alpha_threshold,
            min_parts=config.min_parts,
            max_parts=config.max_parts,
            max_candidates=config.max_candidates,
            lambda_search=config.lambda_search,
            cardinality_reward=config.cardinality_reward,
        )
        estimate = round_search(solution, search_config, observed, library, rig)
    else:
        n = config.max_n if config.max_n is not None else config.leaf_count
        estimate = round_max(solution, n, observed, library, rig, config.lambda_search)
    timings["round"] = perf_counter() - t0

    rendered = render_scene(compose_scene(estimate.template_ids, library), rig)
    row = {
        "schema_version": 1,
        "kind": "trial",
        "cell": cell,
        "trial": trial,
        "status": "ok",
        "seed": config.seed,
        "views": config.views,
        "image_width": config.image_width,
        "image_height": config.image_height,
        "t_templates": config.t_templates,
        "leaf_count": config.leaf_count,
        "d": config.d,
        "k": config.k,
        "lam": config.lam,
        "noise_fraction": config.noise_fraction,
        "parameter_noise": config.parameter_noise,
        "realized_pixel_change": realized_change,
        "method": config.method,
        "cull_threshold": cull_threshold,
        "n_retained": cull.n_retained,
        "n_dropped": cull.n_dropped,
        "lp_status": solution.status,
        "lp_iterations": solution.iterations,
        "lp_objective": solution.objective,
        "nnz_alpha": int(np.count_nonzero(solution.alpha > 1e-3)),
        "n_selected": len(estimate.template_ids),
        "error_bits": estimate.error,
        "score": estimate.score,
        "fpe": fpe(rendered, clean),
        "false_positive": false_positive_rate(rendered, clean),
        "fpe_observed": fpe(rendered, observed),
        "fpe_truth_observed": fpe(clean, observed),
        "recovery_fraction": recovery_fraction(estimate, model.true_ids()),
        "message": "",
        "timings": timings,
    }
    if config.capture_alpha:
        row["alpha"] = solution.alpha.copy()
    return row


def _failed_row(config: ExperimentConfig, cell: int, trial: int, exc: Exception) -> dict:
    row = {name: "" for name in _CSV_COLUMNS}
    row.update(
        {
            "schema_version": 1,
            "kind": "trial",
            "cell": cell,
            "trial": trial,
            "status": "failed",
            "seed": config.seed,
            "method": config.method,
            "message": f"{type(exc).__name__}: {exc}",
            "timings": {},
        }
    )
    return row


@dataclass(eq=False)
class ExperimentReport:
    """All trial rows of a sweep plus per-cell aggregate means."""

    configs: list[ExperimentConfig]
    rows: list[dict] = field(default_factory=list)

    def cell_rows(self, cell: int) -> list[dict]:
        return [r for r in self.rows if r["cell"] == cell]

    def mean_row(self, cell: int) -> dict:
        """Aggregate the cell's successful trials column-wise."""
        rows = [r for r in self.cell_rows(cell) if r["status"] == "ok"]
        out = {name: "" for name in _CSV_COLUMNS}
        config = self.configs[cell]
        out.update(
            {
                "schema_version": 1,
                "kind": "mean",
                "cell": cell,
                "trial": len(rows),
                "status": "ok" if rows else "failed",
                "seed": config.seed,
                "views": config.views,
                "image_width": config.image_width,
                "image_height": config.image_height,
                "t_templates": config.t_templates,
                "leaf_count": config.leaf_count,
                "d": config.d,
                "k": config.k,
                "lam": config.lam,
                "noise_fraction": config.noise_fraction,
                "parameter_noise": config.parameter_noise,
                "method": config.method,
                "message": "",
            }
        )
        if rows:
            for name in _MEAN_COLUMNS:
                out[name] = float(np.mean([float(r[name]) for r in rows]))
        return out

    def _format(self, value) -> str:
        if isinstance(value, str):
            return value.replace(",", ";").replace("\n", " ")
        if isinstance(value, (bool, np.bool_)):
            return str(bool(value)).lower()
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            return repr(float(value))
        return str(value)

    def to_csv(self) -> str:
        """Render the versioned CSV: trial rows, then each cell's mean."""
        lines = [",".join(_CSV_COLUMNS)]
        for cell in range(len(self.configs)):
            for row in self.cell_rows(cell):
                lines.append(",".join(self._format(row[name]) for name in _CSV_COLUMNS))
            lines.append(
                ",".join(self._format(self.mean_row(cell)[name]) for name in _CSV_COLUMNS)
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="ascii")


def run_sweep(configs, threads: int = 1) -> ExperimentReport:
    """Run every (cell, trial) of a config grid; failures become rows.

    Trials may run on a thread pool, but results are gathered in
    cell-then-trial order so the report is identical at any thread
    count.
    """
    configs = list(configs)
    if not configs:
        raise ValueError("config grid must be nonempty")
    tasks = [
        (cell, trial)
        for cell, config in enumerate(configs)
        for trial in range(config.trials)
    ]

    def run_one(task):
        cell, trial = task
        config = configs[cell]
        try:
            return run_trial(config, cell, trial)
        except Exception as exc:  # noqa: BLE001 - failures become rows
            return _failed_row(config, cell, trial, exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_one, tasks))
    else:
        rows = [run_one(task) for task in tasks]
    return ExperimentReport(configs, rows)


def _write_xy(path: Path, header: str, pairs) -> None:
    lines = [f"# {header}"]
    lines.extend(f"{repr(float(x))} {repr(float(y))}" for x, y in pairs)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def emit_figures(report: ExperimentReport, out_dir) -> list[str]:
    """Write per-figure (x, y) data files; returns the file names written.

    Covers the coefficient spectrum (bar and histogram of a captured
    alpha), the estimate-vs-truth FPE scatter, and recovery as a
    function of k and of D when those vary across cells.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    captured = next((r for r in report.rows if "alpha" in r), None)
    if captured is not None:
        alpha = np.asarray(captured["alpha"], dtype=float)
        path = out_dir / "fig_alpha_bar.txt"
        _write_xy(path, "template_index alpha", enumerate(alpha, start=1))
        written.append(path.name)
        counts, edges = np.histogram(alpha, bins=20, range=(0.0, 1.0))
        centers = (edges[:-1] + edges[1:]) / 2.0
        path = out_dir / "fig_alpha_hist.txt"
        _write_xy(path, "alpha_bin_center count", zip(centers, counts))
        written.append(path.name)

    ok_rows = [r for r in report.rows if r["status"] == "ok"]
    if ok_rows:
        path = out_dir / "fig_fpe_scatter.txt"
        _write_xy(
            path,
            "fpe_truth_observed fpe_estimate_observed",
            [(r["fpe_truth_observed"], r["fpe_observed"]) for r in ok_rows],
        )
        written.append(path.name)

    def sweep_file(attr: str, name: str) -> None:
        values = [getattr(c, attr) for c in report.configs]
        if len(set(values)) < 2:
            return
        means = [report.mean_row(cell) for cell in range(len(report.configs))]
        pairs = [
            (getattr(report.configs[cell], attr), means[cell]["recovery_fraction"])
            for cell in range(len(report.configs))
            if means[cell]["recovery_fraction"] != ""
        ]
        if pairs:
            path = out_dir / name
            _write_xy(path, f"{attr} mean_recovery_fraction", pairs)
            written.append(path.name)

    sweep_file("k", "fig_recovery_vs_k.txt")
    sweep_file("d", "fig_recovery_vs_D.txt")
    sweep_file("noise_fraction", "fig_recovery_vs_noise.txt")
    return written
