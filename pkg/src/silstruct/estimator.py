"""Scikit-learn style front end for the whole pipeline.

Each sample is one flattened multi-view binary silhouette measurement;
``fit`` solves the sparse selection problem per sample, ``predict``
returns the selected template id tuples, and ``transform`` returns the
re-rendered silhouettes of those selections.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .geometry import compose_scene
from .rasterizer import render_scene
from .rounding import SearchConfig, round_max, round_search
from .seeding import derive_seed
from .sketch import build_sketch
from .solver import deconstruct
from .validation import as_measurement, check_binary_matrix


class StructureDeconstructor(BaseEstimator):
    """Recover template subsets from multi-view silhouette samples.

    Parameters mirror the library pipeline: a template library and
    camera rig define the rendering model, (d, k, seed) the sketch,
    lam the solver, and the remaining knobs the rounding stage.
    ``method`` selects "search" (subset search) or "max" (top-n);
    ``n_parts`` fixes the top-n size, defaulting to the search
    config's max_parts bound when absent.
    """

    def __init__(
        self,
        library=None,
        rig=None,
        d: int = 441,
        k: float = 0.01,
        lam: float = 0.01,
        cull_threshold: float = 0.05,
        method: str = "search",
        n_parts=None,
        alpha_threshold: float = 0.01,
        min_parts: int = 1,
        max_parts: int = 20,
        max_candidates: int = 5000,
        lambda_search: float = 0.01,
        cardinality_reward: bool = False,
        seed: int = 0,
        max_iters: int = 50000,
    ):
        self.library = library
        self.rig = rig
        self.d = d
        self.k = k
        self.lam = lam
        self.cull_threshold = cull_threshold
        self.method = method
        self.n_parts = n_parts
        self.alpha_threshold = alpha_threshold
        self.min_parts = min_parts
        self.max_parts = max_parts
        self.max_candidates = max_candidates
        self.lambda_search = lambda_search
        self.cardinality_reward = cardinality_reward
        self.seed = seed
        self.max_iters = max_iters

    def _check_ready(self):
        if self.library is None or self.rig is None:
            raise ValueError("library and rig must be set before fitting")
        if self.method not in ("search", "max"):
            raise ValueError(f"method must be 'search' or 'max', got {self.method!r}")

    def _solve_rows(self, x):
        x = check_binary_matrix(x)
        if x.shape[1] != self.rig.n_bits:
            raise ValueError(
                f"X has {x.shape[1]} features, rig expects {self.rig.n_bits}"
            )
        phi = build_sketch(self.d, self.rig.n_bits, self.k, derive_seed(self.seed, "sketch"))
        alphas = np.zeros((x.shape[0], len(self.library.templates)))
        estimates = []
        reports = []
        for i in range(x.shape[0]):
            target = as_measurement(x[i], self.rig)
            solution, cull = deconstruct(
                target,
                self.library,
                self.rig,
                phi,
                lam=self.lam,
                cull_threshold=self.cull_threshold,
                max_iters=self.max_iters,
            )
            if self.method == "search":
                config = SearchConfig(
                    alpha_threshold=self.alpha_threshold,
                    min_parts=self.min_parts,
                    max_parts=self.max_parts,
                    max_candidates=self.max_candidates,
                    lambda_search=self.lambda_search,
                    cardinality_reward=self.cardinality_reward,
                )
                estimate = round_search(solution, config, target, self.library, self.rig)
            else:
                n = self.n_parts if self.n_parts is not None else self.max_parts
                estimate = round_max(
                    solution, n, target, self.library, self.rig, self.lambda_search
                )
            alphas[i] = solution.alpha
            estimates.append(estimate)
            reports.append(cull)
        return phi, alphas, estimates, reports

    def fit(self, x, y=None):
        """Solve every sample; stores alphas_, estimates_, cull_reports_."""
        self._check_ready()
        x = check_binary_matrix(x)
        self.n_features_in_ = x.shape[1]
        self.phi_, self.alphas_, self.estimates_, self.cull_reports_ = self._solve_rows(x)
        return self

    def predict(self, x) -> list[tuple[int, ...]]:
        """Template id tuples selected for each sample of ``x``."""
        self._check_ready()
        _, _, estimates, _ = self._solve_rows(x)
        return [e.template_ids for e in estimates]

    def transform(self, x) -> np.ndarray:
        """Re-rendered silhouettes of the per-sample selections."""
        self._check_ready()
        _, _, estimates, _ = self._solve_rows(x)
        out = np.zeros((len(estimates), self.rig.n_bits), dtype=bool)
        for i, estimate in enumerate(estimates):
            scene = compose_scene(estimate.template_ids, self.library)
            out[i] = render_scene(scene, self.rig).to_bool()
        return out

    def fit_transform(self, x, y=None) -> np.ndarray:
        """Fit on ``x`` and return the re-rendered selections."""
        self.fit(x)
        out = np.zeros((len(self.estimates_), self.rig.n_bits), dtype=bool)
        for i, estimate in enumerate(self.estimates_):
            scene = compose_scene(estimate.template_ids, self.library)
            out[i] = render_scene(scene, self.rig).to_bool()
        return out
