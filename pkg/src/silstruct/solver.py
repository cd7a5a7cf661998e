"""Template culling, LP formulation, and the end-to-end deconstruction.

The selection problem is  min_alpha ||Phi y - Psi alpha||_1 + lam * sum(alpha)
with alpha in [0, 1]^T, where Phi is the sketch and Psi holds the
sketched template silhouettes.  The l1 terms are linearized with an
epigraph vector e (one entry per sketch row), giving a plain bounded LP:

    minimize    sum(e) + lam * sum(alpha)
    subject to  Psi alpha - e <= Phi y
               -Psi alpha - e <= -Phi y
                0 <= alpha <= 1,  e >= 0.

Before any of that, templates whose own silhouette sticks far outside
the observed foreground are culled: they could only ever hurt the fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraRig
from .errors import DimensionMismatchError
from .geometry import TemplateLibrary
from .rasterizer import MeasurementVector, scene_bits
from .simplex import LinearProgram, LpSolution, solve_lp
from .sketch import SketchMatrix, SketchedBasis, apply_sketch

__all__ = [
    "CullReport",
    "DeconstructionProblem",
    "cull_templates",
    "deconstruct",
    "formulate_lp",
    "solve_lp",
]


@dataclass(eq=False)
class CullReport:
    """Which templates survived the pre-pass.

    ``retained`` lists surviving ids in ascending order; ``dropped``
    pairs each culled id with its outside fraction (the share of the
    template's own silhouette pixels that fall outside the target
    foreground).
    """

    retained: list[int]
    dropped: list[tuple[int, float]]
    threshold: float

    @property
    def n_retained(self) -> int:
        return len(self.retained)

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)


def cull_templates(
    library: TemplateLibrary,
    rig: CameraRig,
    target: MeasurementVector,
    threshold: float,
) -> CullReport:
    """Drop templates whose silhouettes overreach the target foreground.

    A template is culled when more than ``threshold`` of its own
    silhouette pixels lie outside the target.  A template from the true
    scene always survives a noise-free target, since a union can only
    add pixels on top of its members.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    if target.n_bits != rig.n_bits:
        raise DimensionMismatchError(
            f"target has {target.n_bits} bits, rig renders {rig.n_bits}"
        )
    target_bits = target.to_bool()
    retained = []
    dropped = []
    for template in library.templates:
        bits = scene_bits([template], rig)
        total = int(bits.sum())
        outside = int((bits & ~target_bits).sum())
        fraction = outside / total if total else 0.0
        if fraction > threshold:
            dropped.append((template.id, fraction))
        else:
            retained.append(template.id)
    return CullReport(retained, dropped, threshold)


@dataclass(eq=False)
class DeconstructionProblem:
    """A sketched target, the sketched basis to explain it with, and lam."""

    sketched_target: np.ndarray
    basis: SketchedBasis
    lam: float

    def __post_init__(self):
        self.sketched_target = np.asarray(self.sketched_target, dtype=float).ravel()
        if self.sketched_target.size != self.basis.entries.shape[0]:
            raise DimensionMismatchError(
                f"target sketch has {self.sketched_target.size} rows, "
                f"basis has {self.basis.entries.shape[0]}"
            )
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lam must be a nonnegative real, got {self.lam}")


def formulate_lp(problem: DeconstructionProblem) -> LinearProgram:
    """Build the epigraph LP for a deconstruction problem.

    Variables are (alpha_1..alpha_T, e_1..e_D); there are 2D inequality
    rows.  A starting basis hint pairing each e_i with one slack makes
    the point alpha = 0, e = |Phi y| immediately feasible, so the solver
    skips its artificial phase.
    """
    psi = problem.basis.entries
    q = problem.sketched_target
    d, t = psi.shape
    if t == 0:
        raise ValueError("basis has no templates")
    eye = np.eye(d)
    a_ub = np.block([[psi, -eye], [-psi, -eye]])
    b_ub = np.concatenate([q, -q])
    c = np.concatenate([np.full(t, problem.lam), np.ones(d)])
    lower = np.zeros(t + d)
    upper = np.concatenate([np.ones(t), np.full(d, np.inf)])
    n = t + d
    hint = []
    for i in range(d):
        hint.append(t + i)  # e_i
        hint.append(n + i if q[i] >= 0 else n + d + i)  # partner slack
    return LinearProgram(
        c=c,
        a_ub=a_ub,
        b_ub=b_ub,
        lower=lower,
        upper=upper,
        n_primary=t,
        basis_hint=tuple(hint),
    )


def deconstruct(
    target: MeasurementVector,
    library: TemplateLibrary,
    rig: CameraRig,
    phi: SketchMatrix,
    lam: float = 1e-2,
    cull_threshold: float = 0.05,
    max_iters: int = 50000,
    tol: float = 1e-8,
) -> tuple[LpSolution, CullReport]:
    """Cull, sketch, formulate, and solve in one streaming pass.

    Template silhouettes are rendered once each: the render feeds both
    the cull statistic and (for survivors) the sketched basis column,
    then is discarded.  The returned solution's ``alpha`` covers the
    full library, with culled templates pinned at exactly 0.
    """
    if target.n_bits != rig.n_bits:
        raise DimensionMismatchError(
            f"target has {target.n_bits} bits, rig renders {rig.n_bits}"
        )
    if phi.n_cols != rig.n_bits:
        raise DimensionMismatchError(
            f"sketch expects {phi.n_cols} bits, rig renders {rig.n_bits}"
        )
    if not 0.0 <= cull_threshold <= 1.0:
        raise ValueError(f"cull threshold must be in [0, 1], got {cull_threshold}")

    target_bits = target.to_bool()
    retained: list[int] = []
    dropped: list[tuple[int, float]] = []
    columns: list[np.ndarray] = []
    for template in library.templates:
        bits = scene_bits([template], rig)
        total = int(bits.sum())
        outside = int((bits & ~target_bits).sum())
        fraction = outside / total if total else 0.0
        if fraction > cull_threshold:
            dropped.append((template.id, fraction))
        else:
            retained.append(template.id)
            columns.append(apply_sketch(phi, bits))
    report = CullReport(retained, dropped, cull_threshold)

    sketched_target = apply_sketch(phi, target_bits)
    full_alpha = np.zeros(len(library))
    if not retained:
        # Nothing to fit with; the best coefficient vector is all zero.
        objective = float(np.abs(sketched_target).sum())
        solution = LpSolution(
            alpha=full_alpha,
            objective=objective,
            status="optimal",
            x=full_alpha.copy(),
            iterations=0,
        )
        return solution, report

    basis = SketchedBasis(np.column_stack(columns), tuple(retained))
    problem = DeconstructionProblem(sketched_target, basis, lam)
    lp = formulate_lp(problem)
    solution = solve_lp(lp, max_iters=max_iters, tol=tol)
    indices = np.asarray(retained, dtype=int) - 1
    full_alpha[indices] = solution.alpha
    solution.alpha = full_alpha
    return solution, report
