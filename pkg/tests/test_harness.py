"""Plant generator, metrics, benchmark scene, sweep configs, CSV reports."""

from collections import Counter

import numpy as np
import pytest

from silstruct.camera import ring_rig
from silstruct.errors import DimensionMismatchError
from silstruct.geometry import compose_scene
from silstruct.harness import (
    _CSV_COLUMNS,
    ExperimentConfig,
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
from silstruct.rasterizer import from_bits, render_scene
from silstruct.rounding import StructureEstimate

FAST = dict(
    seed=11,
    views=2,
    image_width=100,
    image_height=80,
    t_templates=40,
    leaf_count=3,
    d=60,
    k=0.05,
    trials=2,
)


@pytest.fixture(scope="module")
def fast_report():
    configs = [
        ExperimentConfig(**FAST, capture_alpha=True),
        ExperimentConfig(**{**FAST, "k": 0.08}),
    ]
    return configs, run_sweep(configs)


class TestPlantModel:
    def test_deterministic(self):
        a = build_plant_model(3, seed=5, t_total=25)
        b = build_plant_model(3, seed=5, t_total=25)
        assert np.array_equal(a.leaf_params, b.leaf_params)
        assert a.true_ids() == b.true_ids()

    def test_seed_changes_parameters(self):
        a = build_plant_model(3, seed=5, t_total=25)
        b = build_plant_model(3, seed=6, t_total=25)
        assert not np.array_equal(a.leaf_params, b.leaf_params)

    def test_library_is_dense_and_full(self):
        model = build_plant_model(3, seed=5, t_total=25)
        library = model.library()
        assert [t.id for t in library.templates] == list(range(1, 26))

    def test_true_ids_sorted_unique_in_range(self):
        model = build_plant_model(4, seed=9, t_total=30)
        ids = model.true_ids()
        assert len(ids) == 4
        assert list(ids) == sorted(set(ids))
        assert all(1 <= i <= 30 for i in ids)
        assert [t.id for t in model.true_templates()] == list(ids)

    def test_leaf_count_validation(self):
        with pytest.raises(ValueError):
            build_plant_model(0, seed=1)
        with pytest.raises(ValueError):
            build_plant_model(5, seed=1, t_total=4)

    def test_param_array_shape_validated(self):
        with pytest.raises(ValueError):
            PlantModel(1, np.zeros(4), (0.0, 0.0, 0.06), [0])
        with pytest.raises(ValueError):
            PlantModel(0, np.zeros((3, 4)), (0.0, 0.0, 0.06), [])

    def test_zero_scale_perturbation_is_identity(self):
        model = build_plant_model(3, seed=5, t_total=25)
        clean = model.true_templates()
        same = model.perturbed_true_templates(0.0, seed=17)
        for a, b in zip(clean, same):
            assert np.array_equal(a.shape.vertices, b.shape.vertices)

    def test_perturbation_moves_leaves(self):
        model = build_plant_model(3, seed=5, t_total=25)
        clean = model.true_templates()
        moved = model.perturbed_true_templates(0.3, seed=17)
        assert any(
            not np.array_equal(a.shape.vertices, b.shape.vertices)
            for a, b in zip(clean, moved)
        )

    def test_perturbation_deterministic_per_seed(self):
        model = build_plant_model(3, seed=5, t_total=25)
        a = model.perturbed_true_templates(0.2, seed=17)
        b = model.perturbed_true_templates(0.2, seed=17)
        c = model.perturbed_true_templates(0.2, seed=18)
        for x, y in zip(a, b):
            assert np.array_equal(x.shape.vertices, y.shape.vertices)
        assert any(
            not np.array_equal(x.shape.vertices, y.shape.vertices)
            for x, y in zip(a, c)
        )

    def test_generate_plant(self):
        trues, library = generate_plant(3, seed=7, t_total=25)
        assert len(trues) == 3
        assert len(library.templates) == 25
        library_ids = {t.id for t in library.templates}
        assert {t.id for t in trues} <= library_ids


class TestDefaultRig:
    def test_dimensions(self):
        rig = default_rig(views=3, width=50, height=40)
        assert rig.n_views == 3
        assert rig.n_bits == 3 * 50 * 40
        assert rig.view_dims == ((50, 40),) * 3


class TestMetrics:
    def test_exact_estimate_scores_perfectly(self, block_library, block_rig):
        target = render_scene(compose_scene((1, 10), block_library), block_rig)
        assert fpe((1, 10), target, block_library, block_rig) == 1.0
        assert false_positive_rate((1, 10), target, block_library, block_rig) == 0.0

    def test_subset_coverage_matches_popcounts(self, block_library, block_rig):
        target = render_scene(compose_scene((1, 10), block_library), block_rig)
        part = render_scene(compose_scene((1,), block_library), block_rig)
        covered = np.count_nonzero(part.to_bool() & target.to_bool())
        expected = covered / target.count()
        assert fpe((1,), target, block_library, block_rig) == pytest.approx(expected)
        assert false_positive_rate((1,), target, block_library, block_rig) == 0.0

    def test_superset_false_positive_rate(self, block_library, block_rig):
        target = render_scene(compose_scene((1, 10), block_library), block_rig)
        rendered = render_scene(compose_scene((1, 10, 5), block_library), block_rig)
        outside = np.count_nonzero(rendered.to_bool() & ~target.to_bool())
        assert fpe((1, 10, 5), target, block_library, block_rig) == 1.0
        assert false_positive_rate(
            (1, 10, 5), target, block_library, block_rig
        ) == pytest.approx(outside / rendered.count())

    def test_zero_foreground_target(self, block_library, block_rig):
        empty = from_bits(np.zeros(block_rig.n_bits, dtype=bool), block_rig.view_dims)
        assert fpe((), empty, block_library, block_rig) == 1.0
        with pytest.raises(ValueError):
            fpe((1,), empty, block_library, block_rig)
        assert false_positive_rate((1,), empty, block_library, block_rig) == 1.0

    def test_empty_estimate_has_no_false_positives(self, block_library, block_rig):
        target = render_scene(compose_scene((1,), block_library), block_rig)
        assert false_positive_rate((), target, block_library, block_rig) == 0.0
        assert fpe((), target, block_library, block_rig) == 0.0

    def test_dimension_mismatch_rejected(self, block_library, block_rig):
        target = render_scene(compose_scene((1,), block_library), block_rig)
        other_rig = ring_rig(
            2, radius=9.0, elevation=3.0, target=(1.5, 1.5, 1.0), image_dims=(32, 24), focal=60.0
        )
        with pytest.raises(DimensionMismatchError):
            fpe((1,), target, block_library, other_rig)
        with pytest.raises(DimensionMismatchError):
            false_positive_rate((1,), target, block_library, other_rig)

    def test_estimate_forms_agree(self, block_library, block_rig):
        target = render_scene(compose_scene((1, 10), block_library), block_rig)
        rendered = render_scene(compose_scene((1,), block_library), block_rig)
        by_ids = fpe((1,), target, block_library, block_rig)
        by_estimate = fpe(
            StructureEstimate((1,), 0, 0.0), target, block_library, block_rig
        )
        by_measurement = fpe(rendered, target)
        assert by_ids == by_estimate == by_measurement

    def test_id_estimate_requires_library_and_rig(self, block_library, block_rig):
        target = render_scene(compose_scene((1,), block_library), block_rig)
        with pytest.raises(ValueError):
            fpe((1,), target)

    def test_recovery_fraction(self):
        assert recovery_fraction((1, 2, 3), (1, 2, 3)) == 1.0
        assert recovery_fraction((1,), (1, 2)) == 0.5
        assert recovery_fraction((), (1,)) == 0.0
        assert recovery_fraction((5, 6), (1, 2)) == 0.0
        assert recovery_fraction((1, 1), (1, 2)) == 0.5
        assert recovery_fraction(StructureEstimate((1, 2), 0, 0.0), (1, 2)) == 1.0
        with pytest.raises(ValueError):
            recovery_fraction((1,), ())


class TestBlockBenchmark:
    def test_library_composition(self):
        true_ids, library, rig = block_benchmark()
        assert len(library.templates) == 1752
        by_shape = Counter(t.shape.name for t in library.templates)
        assert by_shape == {"block1x1": 784, "arch4x4": 968}

    def test_true_ids(self):
        true_ids, library, rig = block_benchmark()
        assert len(true_ids) == 12
        assert list(true_ids) == sorted(set(true_ids))
        assert all(1 <= i <= 1752 for i in true_ids)

    def test_rig_dimensions(self):
        _, _, rig = block_benchmark()
        assert rig.n_views == 4
        assert rig.n_bits == 4 * 281 * 211

    def test_deterministic(self):
        a_ids, _, _ = block_benchmark()
        b_ids, _, _ = block_benchmark()
        assert a_ids == b_ids

    def test_scene_renders_nonempty(self):
        true_ids, library, rig = block_benchmark()
        scene = render_scene(compose_scene(true_ids, library), rig)
        assert scene.count() > 0


class TestExperimentConfig:
    def test_round_trips_through_dict(self):
        config = ExperimentConfig(**FAST, noise_fraction=0.04, cull_threshold=0.1)
        assert ExperimentConfig.from_dict(config.to_dict()) == config

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="banana"):
            ExperimentConfig.from_dict({"banana": 1})

    @pytest.mark.parametrize(
        "overrides",
        [
            {"trials": 0},
            {"method": "greedy"},
            {"views": 0},
            {"d": 0},
            {"leaf_count": 50, "t_templates": 40},
            {"noise_fraction": 1.5},
            {"noise_fraction": -0.1},
            {"parameter_noise": -0.1},
        ],
    )
    def test_validation(self, overrides):
        with pytest.raises(ValueError):
            ExperimentConfig(**{**FAST, **overrides})

    def test_effective_cull_threshold(self):
        assert ExperimentConfig(**FAST).effective_cull_threshold() == pytest.approx(0.05)
        explicit = ExperimentConfig(**FAST, noise_fraction=0.5, cull_threshold=0.3)
        assert explicit.effective_cull_threshold() == pytest.approx(0.3)
        noisy = ExperimentConfig(**{**FAST, "noise_fraction": 0.16})
        assert noisy.effective_cull_threshold() == pytest.approx(0.05 + 0.6 * 0.16)
        perturbed = ExperimentConfig(**FAST, parameter_noise=0.1)
        assert perturbed.effective_cull_threshold() == pytest.approx(0.2)
        capped = ExperimentConfig(**FAST, parameter_noise=1.0)
        assert capped.effective_cull_threshold() == pytest.approx(0.9)

    def test_rig_matches_dimensions(self):
        config = ExperimentConfig(**FAST)
        rig = config.rig()
        assert rig.n_views == 2
        assert rig.n_bits == 2 * 100 * 80


class TestRunTrial:
    def test_row_contract(self):
        row = run_trial(ExperimentConfig(**FAST), cell=3, trial=1)
        assert set(_CSV_COLUMNS) <= set(row)
        assert row["status"] == "ok"
        assert row["kind"] == "trial"
        assert (row["cell"], row["trial"]) == (3, 1)
        assert set(row["timings"]) == {"render", "sketch", "lp", "round"}
        assert all(t >= 0.0 for t in row["timings"].values())
        for name in ("fpe", "false_positive", "fpe_observed", "fpe_truth_observed", "recovery_fraction"):
            assert 0.0 <= row[name] <= 1.0
        assert isinstance(row["nnz_alpha"], int)
        assert row["n_selected"] >= 1
        assert row["realized_pixel_change"] == 0.0
        assert row["cull_threshold"] == pytest.approx(0.05)
        assert "alpha" not in row

    def test_noise_free_target_is_fully_explained_by_truth(self):
        row = run_trial(ExperimentConfig(**FAST), cell=0, trial=0)
        assert row["fpe_truth_observed"] == 1.0

    def test_capture_alpha(self):
        row = run_trial(ExperimentConfig(**FAST, capture_alpha=True), cell=0, trial=0)
        assert row["alpha"].shape == (FAST["t_templates"],)

    def test_deterministic(self):
        a = run_trial(ExperimentConfig(**FAST), cell=0, trial=0)
        b = run_trial(ExperimentConfig(**FAST), cell=0, trial=0)
        a.pop("timings")
        b.pop("timings")
        assert a == b

    def test_parameter_noise_changes_target(self):
        row = run_trial(ExperimentConfig(**FAST, parameter_noise=0.2), cell=0, trial=0)
        assert row["realized_pixel_change"] > 0.0
        assert row["cull_threshold"] == pytest.approx(0.05 + 1.5 * 0.2)

    def test_pixel_noise_erodes_truth_coverage(self):
        row = run_trial(ExperimentConfig(**{**FAST, "noise_fraction": 0.1}), cell=0, trial=0)
        assert 0.5 < row["fpe_truth_observed"] < 1.0


class TestRunSweep:
    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            run_sweep([])

    def test_rows_in_cell_then_trial_order(self, fast_report):
        configs, report = fast_report
        assert [(r["cell"], r["trial"]) for r in report.rows] == [
            (0, 0), (0, 1), (1, 0), (1, 1),
        ]
        assert all(r["status"] == "ok" for r in report.rows)

    def test_mean_row_aggregates(self, fast_report):
        configs, report = fast_report
        mean = report.mean_row(0)
        assert mean["kind"] == "mean"
        assert mean["trial"] == 2
        assert mean["status"] == "ok"
        rows = report.cell_rows(0)
        assert mean["error_bits"] == pytest.approx(
            np.mean([r["error_bits"] for r in rows])
        )

    def test_csv_layout(self, fast_report):
        configs, report = fast_report
        text = report.to_csv()
        lines = text.splitlines()
        assert lines[0] == ",".join(_CSV_COLUMNS)
        assert len(lines) == 1 + 4 + 2
        assert text.endswith("\n")
        text.encode("ascii")
        for line in lines[1:]:
            assert len(line.split(",")) == len(_CSV_COLUMNS)

    def test_csv_value_formatting(self, fast_report):
        configs, report = fast_report
        assert report._format(True) == "true"
        assert report._format(np.float64(1 / 3)) == repr(1 / 3)
        assert report._format(np.int64(3)) == "3"
        assert report._format("a,b\nc") == "a;b c"

    def test_write_csv_round_trip(self, fast_report, tmp_path):
        configs, report = fast_report
        path = tmp_path / "report.csv"
        report.write_csv(path)
        assert path.read_text(encoding="ascii") == report.to_csv()

    def test_reruns_and_thread_counts_are_byte_identical(self, fast_report):
        configs, report = fast_report
        again = run_sweep(configs, threads=3)
        assert again.to_csv() == report.to_csv()

    def test_failures_become_rows(self):
        bad = ExperimentConfig(**{**FAST, "d": 10**6, "trials": 1})
        report = run_sweep([bad])
        (row,) = report.rows
        assert row["status"] == "failed"
        assert row["message"] != ""
        mean = report.mean_row(0)
        assert mean["status"] == "failed"
        assert mean["trial"] == 0
        assert mean["error_bits"] == ""


class TestEmitFigures:
    def test_writes_expected_files(self, fast_report, tmp_path):
        configs, report = fast_report
        written = emit_figures(report, tmp_path)
        assert sorted(written) == [
            "fig_alpha_bar.txt",
            "fig_alpha_hist.txt",
            "fig_fpe_scatter.txt",
            "fig_recovery_vs_k.txt",
        ]
        for name in written:
            assert (tmp_path / name).exists()

    def test_file_shapes(self, fast_report, tmp_path):
        configs, report = fast_report
        emit_figures(report, tmp_path)
        bar = (tmp_path / "fig_alpha_bar.txt").read_text().splitlines()
        assert bar[0].startswith("#")
        assert len(bar) == 1 + FAST["t_templates"]
        hist = (tmp_path / "fig_alpha_hist.txt").read_text().splitlines()
        assert len(hist) == 1 + 20
        scatter = (tmp_path / "fig_fpe_scatter.txt").read_text().splitlines()
        assert len(scatter) == 1 + 4
        for line in bar[1:] + hist[1:] + scatter[1:]:
            x, y = line.split()
            float(x), float(y)

    def test_constant_grid_emits_no_sweep_figures(self, tmp_path):
        config = ExperimentConfig(**{**FAST, "trials": 1})
        report = run_sweep([config])
        written = emit_figures(report, tmp_path)
        assert written == ["fig_fpe_scatter.txt"]
