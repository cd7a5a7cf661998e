"""Part-level structure recovery from multi-view binary silhouettes.

The pipeline poses a library of candidate 3D primitive templates, renders
each to a stacked multi-view silhouette vector, compresses everything
through a sparse random sketch, selects a small coefficient vector by
linear programming, and rounds the coefficients to a discrete subset of
templates whose union best reproduces the observed silhouettes.
"""

from .camera import CameraRig, ProjectionMatrix, load_rig, project_point, ring_rig, save_rig
from .errors import (
    DimensionMismatchError,
    DuplicateTemplateIdError,
    EmptyFeasibleSetError,
    EmptyLibraryError,
    FormatError,
    PointAtInfinityError,
    SilstructError,
    UnknownTemplateIdError,
)
from .estimator import StructureDeconstructor
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    PlantModel,
    block_benchmark,
    build_plant_model,
    default_rig,
    emit_figures,
    false_positive_rate,
    fpe,
    generate_plant,
    recovery_fraction,
    run_sweep,
    run_trial,
)
from .geometry import (
    Box,
    Pose,
    PrimitiveShape,
    Template,
    TemplateLibrary,
    compose_scene,
    enumerate_library,
    load_library,
    load_scene,
    save_library,
    save_scene,
)
from .rasterizer import (
    MeasurementVector,
    SilhouetteImage,
    add_salt_pepper,
    flatten,
    load_measurement,
    load_pbm,
    render_scene,
    render_silhouette,
    save_measurement,
    save_pbm,
    silhouette_error,
    unflatten,
)
from .rounding import SearchConfig, StructureEstimate, feasible_set, round_max, round_search
from .simplex import LinearProgram, LpSolution, solve_lp
from .sketch import SketchMatrix, SketchedBasis, apply_sketch, build_sketch, load_sketch, save_sketch, sketch_basis
from .solver import CullReport, DeconstructionProblem, cull_templates, deconstruct, formulate_lp

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CameraRig",
    "CullReport",
    "DeconstructionProblem",
    "DimensionMismatchError",
    "DuplicateTemplateIdError",
    "EmptyFeasibleSetError",
    "EmptyLibraryError",
    "ExperimentConfig",
    "ExperimentReport",
    "FormatError",
    "LinearProgram",
    "LpSolution",
    "MeasurementVector",
    "PlantModel",
    "PointAtInfinityError",
    "Pose",
    "PrimitiveShape",
    "ProjectionMatrix",
    "SearchConfig",
    "SilhouetteImage",
    "SilstructError",
    "SketchMatrix",
    "SketchedBasis",
    "StructureDeconstructor",
    "StructureEstimate",
    "Template",
    "TemplateLibrary",
    "UnknownTemplateIdError",
    "add_salt_pepper",
    "apply_sketch",
    "block_benchmark",
    "build_plant_model",
    "build_sketch",
    "compose_scene",
    "cull_templates",
    "deconstruct",
    "default_rig",
    "emit_figures",
    "enumerate_library",
    "false_positive_rate",
    "feasible_set",
    "flatten",
    "formulate_lp",
    "fpe",
    "generate_plant",
    "load_library",
    "load_measurement",
    "load_pbm",
    "load_rig",
    "load_scene",
    "load_sketch",
    "project_point",
    "recovery_fraction",
    "render_scene",
    "render_silhouette",
    "ring_rig",
    "round_max",
    "round_search",
    "run_sweep",
    "run_trial",
    "save_library",
    "save_measurement",
    "save_pbm",
    "save_rig",
    "save_scene",
    "save_sketch",
    "silhouette_error",
    "sketch_basis",
    "solve_lp",
    "unflatten",
]
