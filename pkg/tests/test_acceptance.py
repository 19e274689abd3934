"""End-to-end acceptance gates with their stated tolerances and time budgets.

Each test prints one PASS/FAIL line (visible with `pytest -s` or on failure)
so the whole gate reads as a checklist.
"""

import shutil
import time

import numpy as np
import pytest

from filmetric import dataset, metrics, optics, pairio, reconstruct as rc, synth
from filmetric.fieldgen import PerlinParams, ThicknessField, derive_seed, gen_perlin

from test_metrics import brute_force_report
from test_reconstruct import add_noise, guarantee_class_instance


def report(name: str, ok: bool, elapsed: float, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"{status}: {name} ({elapsed:.1f}s) {detail}".rstrip())


class TestAcceptance:
    def test_optics_identities(self, stock_stack):
        t0 = time.time()
        expected = ((1.0 - 1.42) / (1.0 + 1.42)) ** 2
        ok_zero = abs(optics.reflectance(stock_stack, 550.0, 0.0) - expected) < 1e-12

        ok_period = True
        stack = optics.FilmStack(incidence_angle_deg=8.0)
        for lam in (460.0, 550.0, 633.0):
            period = optics.thickness_period_nm(stack, lam)
            for h in (11.0, 400.0, 987.5, 2222.25, 4234.0):
                diff = abs(
                    optics.reflectance(stack, lam, h + period)
                    - optics.reflectance(stack, lam, h)
                )
                ok_period = ok_period and diff < 1e-10
        elapsed = time.time() - t0
        report("optics identities", ok_zero and ok_period and elapsed < 1.0, elapsed)
        assert ok_zero
        assert ok_period
        assert elapsed < 1.0

    def test_colormap_ambiguity_exists(self, broadband_colormap):
        t0 = time.time()
        rgb = broadband_colormap.rgb
        step = broadband_colormap.grid_step
        min_sep = int(np.ceil(100.0 / step)) + 1
        best = np.inf
        best_pair = None
        for sep in range(min_sep, rgb.shape[0]):
            diffs = np.abs(rgb[sep:] - rgb[:-sep]).max(axis=1)
            i = int(np.argmin(diffs))
            if diffs[i] < best:
                best = float(diffs[i])
                best_pair = (i, i + sep)
            if best < 0.0005:  # already far below threshold; scan is exhaustive enough
                break
        elapsed = time.time() - t0
        grid = broadband_colormap.thickness_grid_nm
        detail = (f"|rgb diff|={best:.2e} at h1={grid[best_pair[0]]:.0f} nm, "
                  f"h2={grid[best_pair[1]]:.0f} nm")
        ok = best < 0.01 and (grid[best_pair[1]] - grid[best_pair[0]]) > 100.0
        report("colormap many-to-one ambiguity", ok and elapsed < 10.0, elapsed, detail)
        assert ok
        assert elapsed < 10.0

    @pytest.mark.slow
    def test_dataset_distribution_and_thread_determinism(self, tmp_path):
        t0 = time.time()
        spec = dataset.DatasetSpec(total_count=5000, master_seed=314159)
        manifest_a = dataset.generate(spec, tmp_path / "a", threads=1)
        dataset.generate(spec, tmp_path / "b", threads=8)

        mins = np.array([p["field_min_nm"] for it in manifest_a["items"] for p in it["pairs"]])
        maxs = np.array([p["field_max_nm"] for it in manifest_a["items"] for p in it["pairs"]])
        spans = maxs - mins
        ok_range = bool((mins >= 0.0).all() and (maxs <= 4000.0).all())
        ok_span = bool((spans >= 250.0 - 1e-6).all() and (spans <= 2500.0 + 1e-6).all())

        def digest(root):
            return {
                str(p.relative_to(root)): pairio.sha256_file(p)
                for p in sorted(root.rglob("*")) if p.is_file()
            }

        ok_identical = digest(tmp_path / "a") == digest(tmp_path / "b")
        counts = manifest_a["family_counts"]
        ok_counts = counts == {"perlin": 2500, "gaussian": 2500, "experimental": 0}
        shutil.rmtree(tmp_path / "a")
        shutil.rmtree(tmp_path / "b")
        elapsed = time.time() - t0
        report(
            "dataset distribution + thread determinism",
            ok_range and ok_span and ok_identical and ok_counts and elapsed < 300.0,
            elapsed,
            f"spans [{spans.min():.0f}, {spans.max():.0f}] nm",
        )
        assert ok_range and ok_span
        assert ok_counts
        assert ok_identical
        assert elapsed < 300.0

    @pytest.mark.slow
    def test_roundtrip_reconstruction(self, broadband_colormap):
        t0 = time.time()
        cfg = rc.ReconstructConfig()
        clean_ok = noisy_ok = beats = total = 0
        seed = 0
        while total < 100:
            field = guarantee_class_instance(seed)
            seed += 1
            if field is None:
                continue
            total += 1
            img = synth.render(field, broadband_colormap)
            res = rc.reconstruct_regularized(img, broadband_colormap, cfg)
            rmse_clean = float(np.sqrt(((res.field.values - field.values) ** 2).mean()))
            clean_ok += rmse_clean < 30.0

            nimg = add_noise(img, seed=derive_seed(seed - 1, 13))
            cs = rc.candidates(nimg, broadband_colormap, cfg.k)
            res_n = rc.reconstruct_regularized(nimg, broadband_colormap, cfg, precomputed=cs)
            naive = rc.reconstruct_naive(nimg, broadband_colormap, precomputed=cs)
            rmse_noisy = float(np.sqrt(((res_n.field.values - field.values) ** 2).mean()))
            rmse_naive = float(np.sqrt(((naive.values - field.values) ** 2).mean()))
            noisy_ok += rmse_noisy < 150.0
            beats += rmse_noisy < rmse_naive
        elapsed = time.time() - t0
        ok = clean_ok >= 95 and noisy_ok >= 80 and beats >= 90 and elapsed < 600.0
        report(
            "round-trip reconstruction",
            ok,
            elapsed,
            f"clean<30nm: {clean_ok}/100, noisy<150nm: {noisy_ok}/100, reg beats naive: {beats}/100",
        )
        assert clean_ok >= 95
        assert noisy_ok >= 80
        assert beats >= 90
        assert elapsed < 600.0

    def test_metrics_oracle(self):
        t0 = time.time()
        rng = np.random.default_rng(777)
        ok = True
        for _ in range(50):
            shape = (int(rng.integers(2, 10)), int(rng.integers(2, 10)))
            gt = rng.uniform(1.0, 4800.0, shape)
            pred = np.abs(gt + rng.normal(0.0, 250.0, shape))
            mask = rng.random(shape) < 0.85
            mask.flat[0] = True
            rep = metrics.evaluate(pred, gt, mask)
            want = brute_force_report(pred, gt, mask)
            for name, val in want.items():
                got = getattr(rep, name)
                scale = max(abs(val), 1e-12)
                ok = ok and abs(got - val) / scale < 1e-9

        gt = np.linspace(100.0, 4000.0, 256).reshape(16, 16)
        rep = metrics.evaluate(1.1 * gt, gt)
        ln11 = float(np.log(1.1))
        ok_closed = (
            abs(rep.abs_rel - 0.1) < 1e-12
            and abs(rep.silog - 0.15 * ln11 * ln11) < 1e-12
        )
        elapsed = time.time() - t0
        report("metrics oracle", ok and ok_closed and elapsed < 10.0, elapsed)
        assert ok
        assert ok_closed
        assert elapsed < 10.0

    def test_clamp_protocol(self):
        t0 = time.time()
        rng = np.random.default_rng(4242)
        gt = rng.uniform(500.0, 3000.0, (24, 24))
        pred = gt + rng.normal(0.0, 80.0, (24, 24))
        spiked = pred.copy()
        spiked[7, 7] = 7321.0
        manual = pred.copy()
        manual[7, 7] = 5000.0
        a = metrics.evaluate(metrics.clamp_prediction(spiked), gt)
        b = metrics.evaluate(manual, gt)
        ok = a == b
        elapsed = time.time() - t0
        report("clamp-before-score protocol", ok, elapsed)
        assert ok

    @pytest.mark.slow
    def test_mean_thickness_series(self, broadband_colormap):
        t0 = time.time()
        unit = gen_perlin(PerlinParams(octaves=1, scale_px=300.0, seed=4), 256, 256)
        frames, truth = [], []
        for target in np.linspace(1000.0, 1900.0, 10):
            vals = unit.values * 260.0
            vals += target - vals.mean()
            truth.append(float(vals.mean()))
            frames.append(synth.render(ThicknessField(values=vals), broadband_colormap))
        series = rc.mean_thickness_series(frames, broadband_colormap)
        errs = [abs(got - want) for (_, got), want in zip(series, truth)]
        ok = max(errs) < 30.0
        elapsed = time.time() - t0
        report("mean-thickness series", ok, elapsed, f"max |err| = {max(errs):.2f} nm")
        assert ok
