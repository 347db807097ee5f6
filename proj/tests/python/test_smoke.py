"""Smoke tests for the unmix extension module."""

import numpy as np
import pytest

import unmix


@pytest.fixture(scope="module")
def toy():
    return unmix.synth_toy(n_train=32, n_val=8, seed=11, size=8)


@pytest.fixture(scope="module")
def trainer():
    cfg = unmix.TrainConfig()
    cfg.batch_size = 4
    cfg.seed = 5
    unmix.set_num_threads(2)
    return unmix.Trainer(8, 8, 1, cfg, base_channels=8)


def test_synth_shapes_and_mixing(toy):
    mix = toy["train"]["mix"]
    gt_x = toy["train"]["gt_x"]
    gt_b = toy["train"]["gt_b"]
    assert mix.shape == (32, 8, 8, 1)
    np.testing.assert_array_equal(mix, 0.5 * gt_x + 0.5 * gt_b)
    assert mix.min() >= 0.0 and mix.max() <= 1.0


def test_synth_deterministic():
    a = unmix.synth_toy(8, 0, seed=3)
    b = unmix.synth_toy(8, 0, seed=3)
    np.testing.assert_array_equal(a["train"]["mix"], b["train"]["mix"])


def test_separate_additivity(trainer, toy):
    y = toy["val"]["mix"]
    x_hat, b_hat, mask = trainer.separate(y)
    np.testing.assert_allclose(x_hat + b_hat, y, atol=1e-6)
    assert mask.min() > 0.0 and mask.max() < 1.0


def test_remix_conservation(trainer, toy):
    y = toy["train"]["mix"]
    y1, y2 = y[:4], y[4:8]
    z1, z2 = trainer.remix(y1, y2)
    np.testing.assert_allclose(z1 + z2, y1 + y2, atol=1e-6)
    y1_bar, y2_bar = trainer.cycle(z1, z2)
    np.testing.assert_allclose(y1_bar + y2_bar, y1 + y2, atol=1e-6)


def test_train_step_reports_finite_losses(trainer, toy):
    y = toy["train"]["mix"]
    rep = trainer.train_step(y[:4], y[4:8])
    for v in (rep.l_c, rep.l_m, rep.l_e, rep.l_d):
        assert np.isfinite(v)
    assert 0.0 < rep.mean_mask < 1.0
    assert trainer.masker_updates == 4 * trainer.disc_updates


def test_metrics_closed_forms():
    a = np.full((16, 16, 1), 0.4, dtype=np.float32)
    b = a + 0.1
    assert unmix.psnr(a, b) == pytest.approx(20.0, abs=1e-4)
    assert unmix.psnr(a, a) == 100.0
    assert unmix.ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_evaluate_dict(trainer, toy):
    rep = trainer.evaluate(
        toy["val"]["mix"], toy["val"]["gt_x"], toy["val"]["gt_b"], 0.5, False
    )
    assert rep["n_examples"] == 8
    assert rep["assignment"] in ("direct", "swapped")
    assert np.isfinite(rep["psnr_mean"])


def test_checkpoint_roundtrip(tmp_path, trainer):
    path = str(tmp_path / "t.umx")
    trainer.save(path)
    loaded = unmix.Trainer.load(path)
    y = unmix.synth_toy(4, 0, seed=9)["train"]["mix"]
    np.testing.assert_array_equal(trainer.mask(y), loaded.mask(y))


def test_dimension_error_surfaces_as_python_exception(trainer):
    bad = np.zeros((4, 16, 16, 1), dtype=np.float32)
    with pytest.raises(unmix.DimensionError):
        trainer.mask(bad)
