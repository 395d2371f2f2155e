import json

import numpy as np
import pytest
from PIL import Image

from phasekit.cli import main
from phasekit.grid import CoherenceMap, PhaseImage, wrap
from phasekit.mdn import load_weights
from phasekit.raster import read_raster, write_raster

GOOD_SCENE = """
width=64
height=64
seed=3
bubble=32,32,10,3.0
bubble=12,50,6,-2.0
road=0,0,63,63,2,1.2
building=40,8,55,20,1.0
"""


@pytest.fixture
def scene_file(tmp_path):
    path = tmp_path / "scene.cfg"
    path.write_text(GOOD_SCENE)
    return path


def run_simulate(tmp_path, scene_file):
    out = {
        "truth": tmp_path / "truth.igrd",
        "wrapped": tmp_path / "wrapped.igrd",
        "coh": tmp_path / "coh.igrd",
    }
    code = main(["simulate", "--scene", str(scene_file),
                 "--out-truth", str(out["truth"]),
                 "--out-wrapped", str(out["wrapped"]),
                 "--out-coh", str(out["coh"])])
    assert code == 0
    return out


class TestSimulate:
    def test_writes_three_rasters_and_manifest(self, tmp_path, scene_file):
        out = run_simulate(tmp_path, scene_file)
        for p in out.values():
            assert p.exists()
        manifest = json.loads((tmp_path / "truth.igrd.manifest.json").read_text())
        assert manifest["seeds"] == {"scene": 3}
        assert len(manifest["outputs"]) == 3

    def test_empty_scene_zero_rasters(self, tmp_path):
        scene = tmp_path / "empty.cfg"
        scene.write_text("width=16\nheight=16\n")
        out = run_simulate(tmp_path, scene)
        assert np.all(read_raster(out["wrapped"]).data == 0.0)
        assert np.all(read_raster(out["coh"], expect="coherence").data == 1.0)

    def test_repeat_run_identical_files(self, tmp_path, scene_file):
        out1 = run_simulate(tmp_path, scene_file)
        blob = out1["wrapped"].read_bytes()
        out2 = run_simulate(tmp_path, scene_file)
        assert out2["wrapped"].read_bytes() == blob

    def test_malformed_bubble_exits_2(self, tmp_path, capsys):
        scene = tmp_path / "bad.cfg"
        scene.write_text("width=8\nheight=8\nbubble=1,2\n")
        code = main(["simulate", "--scene", str(scene),
                     "--out-truth", str(tmp_path / "t.igrd"),
                     "--out-wrapped", str(tmp_path / "w.igrd"),
                     "--out-coh", str(tmp_path / "c.igrd")])
        assert code == 2
        assert "line 3" in capsys.readouterr().err


class TestAddNoise:
    def test_gamma_one_identity(self, tmp_path, scene_file):
        out = run_simulate(tmp_path, scene_file)
        noisy = tmp_path / "noisy.igrd"
        code = main(["add-noise", "--in", str(out["wrapped"]), "--gamma", "1.0",
                     "--seed", "5", "--out", str(noisy)])
        assert code == 0
        assert np.array_equal(read_raster(noisy, expect="phase").data,
                              read_raster(out["wrapped"], expect="phase").data)

    def test_gamma_zero_exits_2(self, tmp_path, scene_file):
        out = run_simulate(tmp_path, scene_file)
        code = main(["add-noise", "--in", str(out["wrapped"]), "--gamma", "0",
                     "--out", str(tmp_path / "noisy.igrd")])
        assert code == 2

    def test_rerunning_manifest_command_reproduces_output(self, tmp_path, scene_file):
        out = run_simulate(tmp_path, scene_file)
        noisy = tmp_path / "noisy.igrd"
        assert main(["add-noise", "--in", str(out["wrapped"]), "--gamma", "0.7",
                     "--seed", "9", "--out", str(noisy)]) == 0
        blob = noisy.read_bytes()
        manifest = json.loads((tmp_path / "noisy.igrd.manifest.json").read_text())
        assert manifest["command"][0] == "phasekit"
        noisy.unlink()
        assert main(manifest["command"][1:]) == 0
        assert noisy.read_bytes() == blob

    def test_seed_determinism_and_coh_export(self, tmp_path, scene_file):
        out = run_simulate(tmp_path, scene_file)
        a, b = tmp_path / "a.igrd", tmp_path / "b.igrd"
        for path in (a, b):
            code = main(["add-noise", "--in", str(out["wrapped"]), "--gamma", "0.7",
                         "--seed", "9", "--out", str(path),
                         "--out-coh", str(tmp_path / "gamma.igrd")])
            assert code == 0
        assert a.read_bytes() == b.read_bytes()
        gamma = read_raster(tmp_path / "gamma.igrd", expect="coherence")
        assert np.all(gamma.data == np.float32(0.7))


def make_training_dir(tmp_path, n=2, size=48):
    data = tmp_path / "data"
    data.mkdir(exist_ok=True)
    rng = np.random.default_rng(0)
    for i in range(n):
        phase = PhaseImage(wrap(rng.uniform(-3, 3, (size, size))).astype(np.float32))
        write_raster(data / f"img{i}.igrd", phase)
    return data


class TestTrain:
    def test_zero_epochs_writes_init_weights(self, tmp_path):
        data = make_training_dir(tmp_path)
        out = tmp_path / "w.imdn"
        code = main(["train", "--data", str(data), "--epochs", "0", "--patches", "0",
                     "--out", str(out)])
        assert code == 0
        weights = load_weights(out)
        assert weights.patch_size == 21
        loss_csv = (tmp_path / "w.imdn.loss.csv").read_text().strip().split("\n")
        assert loss_csv == ["step,raw_loss,ema_loss"]

    def test_small_run_writes_logs(self, tmp_path):
        data = make_training_dir(tmp_path)
        out = tmp_path / "w.imdn"
        code = main(["train", "--data", str(data), "--epochs", "1", "--patches", "6400",
                     "--out", str(out), "--seed", "1"])
        assert code == 0
        lines = (tmp_path / "w.imdn.loss.csv").read_text().strip().split("\n")
        assert lines[0] == "step,raw_loss,ema_loss"
        assert len(lines) == 2  # step 100 == final step
        assert (tmp_path / "w.imdn.trainstate.npz").exists()

    def test_missing_data_dir_exits_2(self, tmp_path):
        code = main(["train", "--data", str(tmp_path / "nope"), "--epochs", "1",
                     "--patches", "64", "--out", str(tmp_path / "w.imdn")])
        assert code == 2

    def test_config_file_with_cli_override(self, tmp_path):
        data = make_training_dir(tmp_path)
        cfg = tmp_path / "train.cfg"
        cfg.write_text("epochs=1\npatches=128\nseed=7\nlr=0.002\n")
        out = tmp_path / "w.imdn"
        # CLI --seed wins over the config's seed=7
        code = main(["train", "--data", str(data), "--config", str(cfg),
                     "--seed", "1", "--out", str(out)])
        assert code == 0
        manifest = json.loads((tmp_path / "w.imdn.manifest.json").read_text())
        assert manifest["seeds"] == {"train": 1}
        assert manifest["config"]["lr"] == 0.002
        assert manifest["config"]["epochs"] == 1

    def test_bad_config_key_exits_2(self, tmp_path):
        data = make_training_dir(tmp_path)
        cfg = tmp_path / "train.cfg"
        cfg.write_text("epochs=1\npatches=128\nmomentum=0.9\n")
        code = main(["train", "--data", str(data), "--config", str(cfg),
                     "--out", str(tmp_path / "w.imdn")])
        assert code == 2

    def test_missing_epochs_exits_2(self, tmp_path):
        data = make_training_dir(tmp_path)
        code = main(["train", "--data", str(data), "--patches", "64",
                     "--out", str(tmp_path / "w.imdn")])
        assert code == 2

    def test_divergence_exits_4_with_last_good(self, tmp_path):
        # absurd lr overflows float32 weights within a few steps
        data = make_training_dir(tmp_path)
        out = tmp_path / "w.imdn"
        code = main(["train", "--data", str(data), "--epochs", "1", "--patches", str(64 * 200),
                     "--lr", "1e12", "--out", str(out)])
        assert code == 4
        assert out.exists()  # last good checkpoint was written

    def test_resume_matches_straight_run(self, tmp_path):
        data = make_training_dir(tmp_path)
        base = ["train", "--data", str(data), "--patches", "640", "--seed", "3"]
        straight = tmp_path / "straight.imdn"
        assert main(base + ["--epochs", "2", "--out", str(straight)]) == 0
        resumed = tmp_path / "resumed.imdn"
        assert main(base + ["--epochs", "1", "--out", str(resumed)]) == 0
        assert main(base + ["--epochs", "2", "--out", str(resumed), "--resume"]) == 0
        assert straight.read_bytes() == resumed.read_bytes()


@pytest.fixture
def pipeline(tmp_path):
    """scene -> noisy raster -> tiny trained weights, shared by filter tests."""
    scene = tmp_path / "scene.cfg"
    scene.write_text(GOOD_SCENE)
    out = run_simulate(tmp_path, scene)
    noisy = tmp_path / "noisy.igrd"
    assert main(["add-noise", "--in", str(out["wrapped"]), "--gamma", "0.7",
                 "--seed", "1", "--out", str(noisy),
                 "--out-coh", str(tmp_path / "gamma.igrd")]) == 0
    data = tmp_path / "data"
    data.mkdir()
    (data / "n0.igrd").write_bytes(noisy.read_bytes())
    weights = tmp_path / "w.imdn"
    assert main(["train", "--data", str(data), "--epochs", "1", "--patches", "640",
                 "--out", str(weights), "--seed", "2"]) == 0
    return {"tmp": tmp_path, "truth": out["wrapped"], "noisy": noisy,
            "weights": weights, "gamma": tmp_path / "gamma.igrd"}


class TestFilter:
    def test_goldstein_rejects_out_coh(self, pipeline):
        code = main(["filter", "--method", "goldstein", "--in", str(pipeline["noisy"]),
                     "--out-phase", str(pipeline["tmp"] / "g.igrd"),
                     "--out-coh", str(pipeline["tmp"] / "gc.igrd")])
        assert code == 2

    def test_geninsar_requires_weights(self, pipeline):
        code = main(["filter", "--method", "geninsar", "--in", str(pipeline["noisy"]),
                     "--out-phase", str(pipeline["tmp"] / "p.igrd")])
        assert code == 2

    def test_boxcar_window_one_is_identity(self, pipeline):
        outp = pipeline["tmp"] / "b1.igrd"
        code = main(["filter", "--method", "boxcar", "--window", "1",
                     "--in", str(pipeline["noisy"]), "--out-phase", str(outp)])
        assert code == 0
        got = read_raster(outp, expect="phase").data.astype(np.float64)
        want = read_raster(pipeline["noisy"], expect="phase").data.astype(np.float64)
        assert np.max(np.abs(wrap(got - want))) < 1e-5

    def test_boxcar_outputs_phase_and_coherence(self, pipeline):
        code = main(["filter", "--method", "boxcar", "--in", str(pipeline["noisy"]),
                     "--out-phase", str(pipeline["tmp"] / "bp.igrd"),
                     "--out-coh", str(pipeline["tmp"] / "bc.igrd")])
        assert code == 0
        coh = read_raster(pipeline["tmp"] / "bc.igrd", expect="coherence")
        assert coh.data.min() >= 0.0 and coh.data.max() <= 1.0

    def test_geninsar_filter_and_thread_invariance(self, pipeline):
        outs = []
        for threads in ("1", "4"):
            outp = pipeline["tmp"] / f"gen{threads}.igrd"
            code = main(["filter", "--method", "geninsar", "--in", str(pipeline["noisy"]),
                         "--weights", str(pipeline["weights"]),
                         "--out-phase", str(outp),
                         "--out-coh", str(pipeline["tmp"] / f"genc{threads}.igrd"),
                         "--threads", threads])
            assert code == 0
            outs.append(outp.read_bytes())
        assert outs[0] == outs[1]
        manifest = json.loads((pipeline["tmp"] / "gen1.igrd.manifest.json").read_text())
        assert manifest["config"]["method"] == "geninsar"
        assert manifest["wall_time_s"] > 0


class TestSample:
    def test_alpha_zero_count_three_identical(self, pipeline):
        prefix = str(pipeline["tmp"] / "s0_")
        code = main(["sample", "--weights", str(pipeline["weights"]),
                     "--in", str(pipeline["noisy"]), "--alpha", "0", "--count", "3",
                     "--seed", "4", "--out-prefix", prefix])
        assert code == 0
        blobs = [(pipeline["tmp"] / f"s0_{k}.igrd").read_bytes() for k in range(3)]
        assert blobs[0] == blobs[1] == blobs[2]
        filt = pipeline["tmp"] / "f.igrd"
        assert main(["filter", "--method", "geninsar", "--in", str(pipeline["noisy"]),
                     "--weights", str(pipeline["weights"]), "--out-phase", str(filt)]) == 0
        assert np.array_equal(read_raster(pipeline["tmp"] / "s0_0.igrd", expect="phase").data,
                              read_raster(filt, expect="phase").data)

    def test_default_alpha_five_distinct(self, pipeline):
        prefix = str(pipeline["tmp"] / "s1_")
        code = main(["sample", "--weights", str(pipeline["weights"]),
                     "--in", str(pipeline["noisy"]), "--count", "5",
                     "--seed", "4", "--out-prefix", prefix])
        assert code == 0
        blobs = {(pipeline["tmp"] / f"s1_{k}.igrd").read_bytes() for k in range(5)}
        assert len(blobs) == 5

    def test_seed_reproduces_set(self, pipeline):
        blobs = []
        for prefix in ("sa_", "sb_"):
            code = main(["sample", "--weights", str(pipeline["weights"]),
                         "--in", str(pipeline["noisy"]), "--count", "2",
                         "--seed", "11", "--out-prefix", str(pipeline["tmp"] / prefix)])
            assert code == 0
            blobs.append([(pipeline["tmp"] / f"{prefix}{k}.igrd").read_bytes() for k in range(2)])
        assert blobs[0] == blobs[1]


class TestEvaluate:
    def test_perfect_filter_row(self, pipeline, capsys):
        csv = pipeline["tmp"] / "r.csv"
        code = main(["evaluate", "--truth", str(pipeline["truth"]),
                     "--truth-coh", str(pipeline["gamma"]),
                     "--noisy", str(pipeline["noisy"]),
                     "--filtered", str(pipeline["truth"]),
                     "--est-coh", str(pipeline["gamma"]),
                     "--csv", str(csv)])
        assert code == 0
        row = csv.read_text().strip().split("\n")[1].split(",")
        assert float(row[1]) == 0.0  # phase rmse
        assert float(row[3]) == 100.0  # rrp

    def test_missing_est_coh_leaves_column_empty(self, pipeline):
        csv = pipeline["tmp"] / "r2.csv"
        code = main(["evaluate", "--truth", str(pipeline["truth"]),
                     "--truth-coh", str(pipeline["gamma"]),
                     "--noisy", str(pipeline["noisy"]),
                     "--filtered", str(pipeline["noisy"]),
                     "--csv", str(csv)])
        assert code == 0
        row = csv.read_text().strip().split("\n")[1].split(",")
        assert row[2] == ""

    def test_dim_mismatch_exits_2(self, pipeline, tmp_path):
        small = tmp_path / "small.igrd"
        write_raster(small, PhaseImage(np.zeros((8, 8), np.float32)))
        code = main(["evaluate", "--truth", str(pipeline["truth"]),
                     "--truth-coh", str(pipeline["gamma"]),
                     "--noisy", str(pipeline["noisy"]),
                     "--filtered", str(small)])
        assert code == 2

    def test_glob_mode(self, pipeline, tmp_path, capsys):
        for name in ("sceneA", "sceneB"):
            d = tmp_path / "batch" / name
            d.mkdir(parents=True)
            for src, dst in (("truth", "truth.igrd"), ("gamma", "truth_coh.igrd"),
                             ("noisy", "noisy.igrd"), ("noisy", "filtered.igrd")):
                (d / dst).write_bytes(pipeline[src].read_bytes() if src != "gamma"
                                      else pipeline["gamma"].read_bytes())
        code = main(["evaluate", "--glob", str(tmp_path / "batch" / "scene*"),
                     "--csv", str(tmp_path / "batch.csv")])
        assert code == 0
        out = capsys.readouterr().out
        assert "mean±std" in out
        lines = (tmp_path / "batch.csv").read_text().strip().split("\n")
        assert len(lines) == 3


class TestRender:
    def test_phase_png(self, pipeline):
        png = pipeline["tmp"] / "p.png"
        code = main(["render", "--in", str(pipeline["noisy"]), "--type", "phase",
                     "--out", str(png)])
        assert code == 0
        assert np.asarray(Image.open(png)).shape == (64, 64, 3)

    def test_coherence_png(self, pipeline):
        png = pipeline["tmp"] / "c.png"
        code = main(["render", "--in", str(pipeline["gamma"]), "--type", "coherence",
                     "--out", str(png)])
        assert code == 0
        img = np.asarray(Image.open(png))
        assert img.ndim == 2
        assert np.all(img == round(255 * 0.7))

    def test_channel_mismatch_exits_2(self, pipeline, tmp_path):
        from conftest import random_unit_field
        two = tmp_path / "two.igrd"
        write_raster(two, random_unit_field(np.random.default_rng(0), 8, 8))
        code = main(["render", "--in", str(two), "--type", "phase",
                     "--out", str(tmp_path / "x.png")])
        assert code == 2

    def test_out_of_range_coherence_exits_2(self, pipeline, tmp_path):
        phase = tmp_path / "ph.igrd"
        write_raster(phase, PhaseImage(np.full((8, 8), 2.0, np.float32)))
        code = main(["render", "--in", str(phase), "--type", "coherence",
                     "--out", str(tmp_path / "x.png")])
        assert code == 2


class TestFormatErrors:
    def test_truncated_raster_exits_3(self, pipeline, tmp_path):
        bad = tmp_path / "bad.igrd"
        bad.write_bytes(pipeline["noisy"].read_bytes()[:-7])
        code = main(["filter", "--method", "boxcar", "--in", str(bad),
                     "--out-phase", str(tmp_path / "o.igrd")])
        assert code == 3

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
