import numpy as np
import pytest

from firecast.errors import EmptyDataError, FormatError, ValidationError
from firecast.loss import LossSpec
from firecast.segnet import SegNetConfig, forward, init_params
from firecast.train import (
    Checkpoint,
    TrainConfig,
    read_checkpoint,
    train,
    write_checkpoint,
)


def _threshold_dataset(n=32, size=16, seed=0):
    """Target = one input channel thresholded; learnable by one conv."""
    rng = np.random.default_rng(seed)
    x = rng.normal(0, 1, (n, size, size, 2)).astype(np.float32)
    from scipy.ndimage import uniform_filter

    smooth = uniform_filter(x[..., 0], size=5, axes=(1, 2))
    # keep a margin around the decision boundary so the task is cleanly
    # separable instead of hinging on pixels a hair from the threshold
    x[..., 0] = smooth + 0.15 * np.sign(smooth - 0.1)
    y = (x[..., 0] > 0.1).astype(np.float32)
    return x, y


class TestTrain:
    def test_learns_threshold_task(self):
        x, y = _threshold_dataset()
        net = SegNetConfig(in_channels=2, levels=1, base_width=8, head_pool=1, seed=0)
        cfg = TrainConfig(learning_rate=0.1, batch_size=8, max_epochs=30, seed=0)
        ckpt, history = train(x, y, np.arange(24), np.arange(24, 32), net, cfg)
        assert ckpt.val_iou > 0.95, f"val IoU {ckpt.val_iou:.3f} after 30 epochs"

    def test_deterministic(self):
        x, y = _threshold_dataset(n=12)
        net = SegNetConfig(in_channels=2, levels=1, base_width=2, head_pool=1, seed=1)
        cfg = TrainConfig(max_epochs=3, seed=5)
        a, hist_a = train(x, y, np.arange(8), np.arange(8, 12), net, cfg)
        b, hist_b = train(x, y, np.arange(8), np.arange(8, 12), net, cfg)
        assert a.epoch == b.epoch and a.val_iou == b.val_iou
        for name in a.params:
            np.testing.assert_array_equal(a.params[name], b.params[name])
        assert hist_a == hist_b

    def test_zero_learning_rate_keeps_init(self):
        x, y = _threshold_dataset(n=12)
        net = SegNetConfig(in_channels=2, levels=1, base_width=2, head_pool=1, seed=2)
        cfg = TrainConfig(learning_rate=0.0, max_epochs=3, seed=0)
        ckpt, history = train(x, y, np.arange(8), np.arange(8, 12), net, cfg)
        init = init_params(net)
        for name in init:
            np.testing.assert_array_equal(ckpt.params[name], init[name])
        assert len({rec.val_iou for rec in history}) == 1

    def test_checkpoint_is_max_of_history(self):
        x, y = _threshold_dataset(n=16)
        net = SegNetConfig(in_channels=2, levels=1, base_width=2, head_pool=1, seed=3)
        cfg = TrainConfig(learning_rate=0.05, max_epochs=8, seed=1)
        ckpt, history = train(x, y, np.arange(12), np.arange(12, 16), net, cfg)
        assert ckpt.val_iou == max(rec.val_iou for rec in history)
        firsts = [rec.epoch for rec in history if rec.val_iou == ckpt.val_iou]
        assert ckpt.epoch == firsts[0]

    def test_empty_split_raises(self):
        x, y = _threshold_dataset(n=8)
        net = SegNetConfig(in_channels=2, levels=1, base_width=2, head_pool=1)
        with pytest.raises(EmptyDataError, match="empty sample set"):
            train(x, y, np.arange(0), np.arange(8), net)
        with pytest.raises(EmptyDataError, match="empty sample set"):
            train(x, y, np.arange(8), np.arange(0), net)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(learning_rate=-1)
        with pytest.raises(ValidationError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValidationError):
            TrainConfig(momentum=1.0)

    def test_history_lines(self):
        x, y = _threshold_dataset(n=12)
        net = SegNetConfig(in_channels=2, levels=1, base_width=2, head_pool=1)
        _, history = train(x, y, np.arange(8), np.arange(8, 12), net, TrainConfig(max_epochs=2))
        assert history[0].line().startswith("epoch=1 train_loss=")
        assert "val_iou=" in history[1].line()


class TestCheckpointIO:
    def _ckpt(self):
        net = SegNetConfig(in_channels=3, levels=2, base_width=2, head_pool=2, seed=4)
        return Checkpoint(init_params(net), net, epoch=7, val_iou=0.625)

    def test_round_trip(self, tmp_path):
        ckpt = self._ckpt()
        path = tmp_path / "model.ckpt"
        write_checkpoint(path, ckpt)
        back = read_checkpoint(path)
        assert back.epoch == 7
        assert back.val_iou == 0.625
        assert back.net == ckpt.net
        assert set(back.params) == set(ckpt.params)
        for name in ckpt.params:
            np.testing.assert_array_equal(back.params[name], ckpt.params[name])

    def test_round_trip_preserves_forward(self, tmp_path):
        ckpt = self._ckpt()
        path = tmp_path / "model.ckpt"
        write_checkpoint(path, ckpt)
        back = read_checkpoint(path)
        x = np.random.default_rng(0).normal(0, 1, (1, 8, 8, 3)).astype(np.float32)
        np.testing.assert_array_equal(
            forward(ckpt.params, ckpt.net, x), forward(back.params, back.net, x)
        )

    def test_byte_stable(self, tmp_path):
        ckpt = self._ckpt()
        write_checkpoint(tmp_path / "a.ckpt", ckpt)
        write_checkpoint(tmp_path / "b.ckpt", ckpt)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"XXXX" + b"\x00" * 40)
        with pytest.raises(FormatError):
            read_checkpoint(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "model.ckpt"
        write_checkpoint(path, self._ckpt())
        cut = tmp_path / "c.ckpt"
        cut.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(FormatError):
            read_checkpoint(cut)
