"""Adam recurrence oracle and training-loop behavior tests."""

import numpy as np
import pytest

from tvpr import tensor as tn
from tvpr.config import SplitConfig, TrainConfig
from tvpr.data.synth import GeneratorConfig, generate_corpus
from tvpr.errors import ConfigError
from tvpr.tensor import Tensor
from tvpr.train import Adam, train_model


def param(value):
    return Tensor(np.asarray(value, dtype=np.float32), requires_grad=True)


def oracle_adam(grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar Adam trajectory from a fixed gradient sequence."""
    x, m, v = 0.0, 0.0, 0.0
    xs = []
    for t, g in enumerate(grads, 1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mh = m / (1 - beta1 ** t)
        vh = v / (1 - beta2 ** t)
        x -= lr * mh / (np.sqrt(vh) + eps)
        xs.append(x)
    return xs


class TestAdam:
    def test_first_step_is_minus_lr(self):
        # with bias correction, any constant gradient direction gives a first
        # step of exactly lr (up to eps)
        p = param([0.0, 0.0])
        p.grad = np.array([1.0, -1.0], dtype=np.float32)
        Adam([p], lr=0.1).step()
        np.testing.assert_allclose(p.data, [-0.1, 0.1], rtol=1e-5)

    def test_matches_scalar_recurrence(self):
        rng = np.random.default_rng(0)
        grads = rng.normal(size=12)
        p = param(0.0)
        adam = Adam([p], lr=0.01)
        got = []
        for g in grads:
            p.grad = np.asarray(g, dtype=np.float32)
            adam.step()
            got.append(float(p.data))
        np.testing.assert_allclose(got, oracle_adam(grads, 0.01), rtol=1e-4)

    def test_zero_lr_freezes(self):
        p = param([1.0])
        p.grad = np.array([5.0], dtype=np.float32)
        Adam([p], lr=0.0).step()
        np.testing.assert_array_equal(p.data, [1.0])

    def test_missing_grad_rejected(self):
        p = param([1.0])
        with pytest.raises(ConfigError, match="gradient"):
            Adam([p], lr=0.1).step()

    def test_moments_persist_across_steps(self):
        # second step with zero gradient still moves: momentum decays slowly
        p = param(0.0)
        adam = Adam([p], lr=0.1)
        p.grad = np.asarray(1.0, dtype=np.float32)
        adam.step()
        first = float(p.data)
        p.grad = np.asarray(0.0, dtype=np.float32)
        adam.step()
        assert float(p.data) < first

    def test_quadratic_descent(self):
        p = param(3.0)
        adam = Adam([p], lr=0.05)
        for _ in range(300):
            p.zero_grad()
            loss = (p * p)
            loss.backward()
            adam.step()
        assert abs(float(p.data)) < 0.05


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    entries = generate_corpus(
        GeneratorConfig(num_clips=4, frames=4, height=16, width=16, seed=0),
        out)
    return out / "manifest.jsonl", entries


def tiny_config(**kw):
    overrides = {"d_vis": 16, "patch": 8, "height": 16, "width": 16,
                 "vis_layers": 1, "vis_heads": 2,
                 "d_mo": 8, "mo_mid": 4, "mo_layers": 1, "mo_heads": 2,
                 "d_txt": 16, "txt_layers": 1, "txt_heads": 2,
                 "d_ffa": 16, "ffa_layers": 1, "ffa_heads": 2,
                 "d_rn": 16, "max_frames": 4,
                 "mo_dropout": 0.0, "txt_dropout": 0.0, "ffa_dropout": 0.0}
    args = dict(epochs=2, batch_size=4, seed=0, num_frames=4,
                learning_rate=1e-3, model_overrides=overrides,
                split=SplitConfig(ratios=(1.0, 0.0, 0.0)))
    args.update(kw)
    return TrainConfig(**args)


class TestTrainModel:
    def test_empty_entries_rejected(self, tiny_corpus):
        manifest, _ = tiny_corpus
        with pytest.raises(ConfigError, match="nonempty"):
            train_model(tiny_config(), [], manifest)

    def test_runs_and_reports_losses(self, tiny_corpus):
        manifest, entries = tiny_corpus
        model, losses = train_model(tiny_config(), entries, manifest)
        assert len(losses) == 2
        assert all(np.isfinite(losses))

    def test_loss_decreases_over_training(self, tiny_corpus):
        manifest, entries = tiny_corpus
        _, losses = train_model(tiny_config(epochs=25), entries, manifest)
        assert losses[-1] < losses[0]

    def test_same_seed_same_trajectory(self, tiny_corpus):
        manifest, entries = tiny_corpus
        _, a = train_model(tiny_config(epochs=3), entries, manifest)
        _, b = train_model(tiny_config(epochs=3), entries, manifest)
        assert a == b

    def test_different_seed_different_trajectory(self, tiny_corpus):
        manifest, entries = tiny_corpus
        _, a = train_model(tiny_config(epochs=3), entries, manifest)
        _, b = train_model(tiny_config(epochs=3, seed=1), entries, manifest)
        assert a != b

    def test_single_entry_exclusive_loss_skips_every_batch(self, tiny_corpus):
        manifest, entries = tiny_corpus
        _, losses = train_model(tiny_config(epochs=1), entries[:1], manifest)
        assert np.isnan(losses[0])

    def test_visual_only_trains(self, tiny_corpus):
        manifest, entries = tiny_corpus
        model, losses = train_model(tiny_config(ablation="visual_only"),
                                    entries, manifest)
        assert all(np.isfinite(losses))
        names = model.store.names()
        assert not any(name.startswith("motion/") for name in names)
        assert not any(name.startswith("fusion/encoder") for name in names)
        assert not any(name.startswith("fusion/ll_mo") for name in names)

    def test_motion_only_trains(self, tiny_corpus):
        manifest, entries = tiny_corpus
        model, losses = train_model(tiny_config(ablation="motion_only"),
                                    entries, manifest)
        assert all(np.isfinite(losses))
        assert not any(name.startswith("visual/") for name in model.store.names())

    def test_concat_ablation_trains(self, tiny_corpus):
        manifest, entries = tiny_corpus
        model, losses = train_model(tiny_config(ablation="vis_mo_concat"),
                                    entries, manifest)
        assert all(np.isfinite(losses))
        assert any("concat_proj" in name for name in model.store.names())
