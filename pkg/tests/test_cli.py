import json

import numpy as np
import pytest

from filmetric import cli, dataset, metrics, optics, pairio


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    spec = {
        "total_count": 4,
        "frac_perlin": 0.5,
        "frac_gaussian": 0.5,
        "frac_experimental": 0.0,
        "master_seed": 5,
        "field_size": 32,
    }
    spec_path = root / "spec.json"
    spec_path.write_text(json.dumps(spec))
    out = root / "data"
    assert run("synth", "--spec", spec_path, "--out", out) == 0
    return out


class TestColormapCmd:
    def test_default_grid_and_rerun_identical(self, tmp_path):
        out1 = tmp_path / "a.txt"
        out2 = tmp_path / "b.txt"
        assert run("colormap", "--out", out1) == 0
        assert run("colormap", "--out", out2) == 0
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().splitlines()
        assert "count=5001" in lines[0]
        n_rows = sum(1 for ln in lines[1:] if ln and not ln.startswith("#"))
        assert n_rows == 5001
        assert (tmp_path / "a.png").exists()  # preview strip

    def test_monochromatic_autocorrelation_peak(self, tmp_path):
        wl = [380.0, 549.0, 550.0, 551.0, 780.0]
        def write_curve(name, vals):
            path = tmp_path / name
            path.write_text("".join(f"{w}\t{v}\n" for w, v in zip(wl, vals)))
            return path

        spike = write_curve("ill.txt", [0, 0, 1, 0, 0])
        flat = write_curve("flat.txt", [1, 1, 1, 1, 1])
        out = tmp_path / "mono.txt"
        assert run(
            "colormap", "--illuminant", spike, "--filter", flat,
            "--sensitivity-r", flat, "--sensitivity-g", flat, "--sensitivity-b", flat,
            "--grid-max", 3000, "--out", out,
        ) == 0
        cmap = optics.load_colormap(out)
        g = cmap.rgb[:, 1] - cmap.rgb[:, 1].mean()
        ac = np.correlate(g, g, mode="full")[g.size - 1:]
        lag = 150 + int(np.argmax(ac[150:260]))
        period = optics.thickness_period_nm(optics.FilmStack(), 550.0)
        assert abs(lag * cmap.grid_step - period) <= 1.5 * cmap.grid_step

    def test_bad_curve_file(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("not numbers here\n")
        assert run("colormap", "--illuminant", bad, "--out", tmp_path / "x.txt") == cli.EXIT_IO


class TestSynthCmd:
    def test_outputs_and_counts(self, small_dataset):
        manifest = dataset.read_manifest(small_dataset)
        assert manifest["family_counts"]["perlin"] == 2
        assert manifest["family_counts"]["gaussian"] == 2
        assert (small_dataset / "stats_mean_hist.csv").exists()
        assert (small_dataset / "stats_mean_hist.svg").exists()
        assert (small_dataset / "stats_span_hist.csv").exists()

    def test_missing_spec_is_io_error(self, tmp_path):
        assert run("synth", "--spec", tmp_path / "none.json", "--out", tmp_path / "o") == cli.EXIT_IO

    def test_bad_fractions_config_error(self, tmp_path):
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"total_count": 2, "frac_perlin": 0.9,
                                    "frac_gaussian": 0.1, "frac_experimental": 0.0}))
        assert run("synth", "--spec", spec, "--out", tmp_path / "o") == cli.EXIT_CONFIG

@pytest.fixture(scope="module")
def cmap_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cm") / "cmap.txt"
    assert run("colormap", "--out", path) == 0
    return path


class TestReconstructCmd:
    def test_single_image_happy_path(self, tmp_path, small_dataset, cmap_file):
        img = next((small_dataset / "items").glob("*_img.png"))
        out = tmp_path / "pred"
        assert run("reconstruct", "--input", img, "--colormap", cmap_file, "--out", out) == 0
        stem = img.name[: -len("_img.png")]
        assert (out / f"{stem}_pred.png").exists()
        summary = json.loads((out / f"{stem}_summary.json").read_text())
        assert summary["converged"] is True
        assert summary["seconds"] > 0

    def test_directory_with_compare(self, tmp_path, small_dataset, cmap_file):
        out = tmp_path / "preds"
        assert run(
            "reconstruct", "--input", small_dataset, "--colormap", cmap_file,
            "--out", out, "--mode", "both", "--compare", small_dataset,
        ) == 0
        summaries = sorted(out.glob("*_summary.json"))
        assert len(summaries) == 4
        first = json.loads(summaries[0].read_text())
        assert "metrics" in first and "rmse" in first["metrics"]

    def test_sequence_series(self, tmp_path, small_dataset, cmap_file):
        out = tmp_path / "series"
        assert run(
            "reconstruct", "--input", small_dataset, "--colormap", cmap_file,
            "--out", out, "--sequence",
        ) == 0
        rows = (out / "series.csv").read_text().splitlines()
        assert rows[0] == "index,frame,mean_nm,seconds_per_frame"
        assert len(rows) == 5
        assert (out / "series.svg").exists()

    def test_missing_input_io_error(self, tmp_path, cmap_file):
        assert run("reconstruct", "--input", tmp_path / "nope.png",
                   "--colormap", cmap_file, "--out", tmp_path / "o") == cli.EXIT_IO


class TestEvaluateCmd:
    def _write_pred_from_gt(self, src, dst, scale=1.0):
        dst.mkdir(parents=True, exist_ok=True)
        for gt in (src / "items").glob("*_gt.png"):
            stem = gt.name[: -len("_gt.png")]
            vals = pairio.load_field_png(gt) * scale
            pairio.save_field_png(np.clip(vals, 0, 5000), dst / f"{stem}_pred.png")

    def test_perfect_predictions_zero_metrics(self, tmp_path, small_dataset):
        pred = tmp_path / "perfect"
        self._write_pred_from_gt(small_dataset, pred)
        out = tmp_path / "eval"
        assert run("evaluate", "--pred", pred, "--gt", small_dataset, "--out", out) == 0
        agg = json.loads((out / "aggregate_perfect.json").read_text())
        assert agg["rmse"] == 0.0
        assert agg["silog"] == 0.0

    def test_dominance_selection(self, tmp_path, small_dataset):
        good = tmp_path / "good"
        bad = tmp_path / "bad"
        self._write_pred_from_gt(small_dataset, good, scale=1.0)
        self._write_pred_from_gt(small_dataset, bad, scale=1.3)
        out = tmp_path / "eval2"
        assert run("evaluate", "--pred", good, "--pred", bad,
                   "--gt", small_dataset, "--out", out) == 0
        selection = json.loads((out / "selection.json").read_text())
        assert selection["best"].endswith("good")

    def test_pooling_matches_concatenation_oracle(self, tmp_path, small_dataset):
        pred = tmp_path / "noisy"
        rngs = np.random.default_rng(0)
        pred.mkdir()
        cat_pred, cat_gt = [], []
        for gt_path in sorted((small_dataset / "items").glob("*_gt.png"))[:3]:
            stem = gt_path.name[: -len("_gt.png")]
            gt = pairio.load_field_png(gt_path)
            noisy = np.clip(gt + rngs.normal(0, 100, gt.shape), 0, 5000)
            pairio.save_field_png(noisy, pred / f"{stem}_pred.png")
            cat_pred.append(pairio.load_field_png(pred / f"{stem}_pred.png").ravel())
            cat_gt.append(gt.ravel())
        out = tmp_path / "eval3"
        assert run("evaluate", "--pred", pred, "--gt", small_dataset, "--out", out) == 0
        agg = json.loads((out / "aggregate_noisy.json").read_text())
        want = metrics.evaluate(np.concatenate(cat_pred), np.concatenate(cat_gt))
        assert agg["rmse"] == pytest.approx(want.rmse, rel=1e-9)
        assert agg["silog"] == pytest.approx(want.silog, rel=1e-9)

    def test_unpaired_is_io_error(self, tmp_path, small_dataset):
        pred = tmp_path / "orphan"
        pred.mkdir()
        pairio.save_field_png(np.full((32, 32), 100.0), pred / "zzz_pred.png")
        assert run("evaluate", "--pred", pred, "--gt", small_dataset,
                   "--out", tmp_path / "e") == cli.EXIT_IO

    def test_scaled_silog_style(self, tmp_path, small_dataset):
        pred = tmp_path / "p13"
        self._write_pred_from_gt(small_dataset, pred, scale=1.3)
        out = tmp_path / "eval4"
        assert run("evaluate", "--pred", pred, "--gt", small_dataset, "--out", out,
                   "--silog-style", "scaled") == 0
        agg = json.loads((out / "aggregate_p13.json").read_text())
        assert agg["silog_scaled"] == pytest.approx(100 * np.sqrt(agg["silog"]), rel=1e-12)


class TestSweepCmd:
    def test_grid_csv(self, tmp_path):
        out = tmp_path / "sweep"
        assert run("sweep", "--sizes", "2", "--mixes", "0.5", "--out", out,
                   "--test-count", "1") == 0
        rows = (out / "grid.csv").read_text().splitlines()
        assert rows[0].startswith("size,mix,n_test,classical_rmse_nm")
        assert len(rows) == 2
        assert (out / "n2_mix0.5" / "train" / "manifest.json").exists()


class TestPlumbing:
    def test_env_threads(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FILMETRIC_THREADS", "2")
        spec = tmp_path / "spec.json"
        spec.write_text(json.dumps({"total_count": 2, "master_seed": 3, "field_size": 32}))
        assert run("synth", "--spec", spec, "--out", tmp_path / "o") == 0

    def test_key_value_config(self, tmp_path):
        cfg = tmp_path / "stack.cfg"
        cfg.write_text("n_ambient = 1.0\nn_film = 1.4  # comment\nn_substrate = 1.5\n")
        assert run("colormap", "--stack", cfg, "--grid-max", 500,
                   "--out", tmp_path / "c.txt") == 0
