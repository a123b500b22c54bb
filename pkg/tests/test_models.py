import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fd_input_gradient, max_rel_err
from nudge3d.errors import InvalidInput, ModelError
from nudge3d.models import (
    ModelParams,
    TrainConfig,
    cross_entropy_loss,
    evaluate_accuracy,
    forward_logits,
    init_model,
    input_gradient,
    load_model,
    model_from_bytes,
    model_to_bytes,
    param_gradient_and_step,
    predict_probs,
    save_model,
    train_model,
    write_training_log,
)
from nudge3d.pointcloud import Dataset, PointCloud, synth_dataset, synth_shape


def zero_model(arch="mini-pointnet", n_classes=4, **kw):
    m = init_model(arch, n_classes, seed=0, **kw)
    return ModelParams(m.arch, m.n_classes,
                       {k: np.zeros_like(v) for k, v in m.params.items()}, k=m.k)


def random_cloud(p=12, seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, size=(p, 3))


class TestForward:
    def test_zero_parameters_give_tied_logits(self):
        for arch, kw in (("mini-pointnet", {}), ("mini-dgcnn", {"k": 4})):
            m = zero_model(arch, **kw)
            logits = forward_logits(m, random_cloud())
            assert np.all(logits == logits[0])
            assert predict_probs(m, random_cloud()) == pytest.approx(np.full(4, 0.25))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        pts = random_cloud(20, seed=2)
        pn = init_model("mini-pointnet", 5, seed=1)
        dg = init_model("mini-dgcnn", 5, seed=1, k=6)
        for m in (pn, dg):
            base = m.logits(pts)
            for _ in range(5):
                perm = rng.permutation(20)
                assert np.abs(m.logits(pts[perm]) - base).max() < 1e-5

    def test_size_agnostic(self):
        m = init_model("mini-pointnet", 5, seed=1)
        for p in (4, 64, 300):
            assert m.logits(random_cloud(p)).shape == (5,)

    def test_probs_match_exp_normalize_oracle(self):
        m = init_model("mini-pointnet", 5, seed=2)
        pts = random_cloud(9, seed=5)
        logits = m.logits(pts)
        oracle = np.exp(logits) / np.exp(logits).sum()
        probs = predict_probs(m, pts)
        assert probs == pytest.approx(oracle, abs=1e-12)
        assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_shape_mismatch_rejected(self):
        m = init_model("mini-pointnet", 3, seed=0)
        bad = {k: v.copy() for k, v in m.params.items()}
        bad["mlp2.w"] = bad["mlp2.w"][:, :-1]
        with pytest.raises(ModelError):
            ModelParams("mini-pointnet", 3, bad)
        with pytest.raises(ModelError):
            init_model("resnet", 3, seed=0)

    def test_nonfinite_parameters_rejected(self):
        m = init_model("mini-pointnet", 3, seed=0)
        bad = {k: v.copy() for k, v in m.params.items()}
        bad["head2.b"][0] = np.nan
        with pytest.raises(ModelError):
            ModelParams("mini-pointnet", 3, bad)


class TestCrossEntropy:
    def test_uniform_logits(self):
        for c in (2, 5, 9):
            assert cross_entropy_loss(np.zeros(c), 0) == pytest.approx(np.log(c))

    def test_confident_correct(self):
        assert cross_entropy_loss(np.array([30.0, 0.0, 0.0]), 0) < 1e-3

    def test_matches_direct_formula(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            logits = rng.normal(scale=3, size=6)
            label = int(rng.integers(6))
            direct = -np.log(np.exp(logits[label]) / np.exp(logits).sum())
            assert cross_entropy_loss(logits, label) == pytest.approx(direct, abs=1e-6)

    def test_label_out_of_range(self):
        with pytest.raises(InvalidInput):
            cross_entropy_loss(np.zeros(3), 3)


class TestInputGradient:
    def test_zero_network_zero_gradient(self):
        for arch, kw in (("mini-pointnet", {}), ("mini-dgcnn", {"k": 3})):
            g = input_gradient(zero_model(arch, **kw), random_cloud(8), 1)
            assert np.array_equal(g, np.zeros((8, 3)))

    def test_matches_finite_differences(self):
        # seeded instance chosen away from ReLU kinks / graph-flip boundaries,
        # where a central difference is meaningful at both step sizes
        pts = np.random.default_rng(0).uniform(-1, 1, size=(8, 3))
        pn = init_model("mini-pointnet", 3, seed=100, hidden=(8, 8, 16, 8))
        dg = init_model("mini-dgcnn", 3, seed=200, k=4, hidden=(8, 16, 8))
        for m in (pn, dg):
            assert m.param_count <= 2000
            _, analytic, _ = m.loss_and_grads(pts, 1)
            assert max_rel_err(analytic, fd_input_gradient(m, pts, 1, 1e-3)) < 1e-3
            assert max_rel_err(analytic, fd_input_gradient(m, pts, 1, 1e-6)) < 1e-6

    def test_duplicated_points_route_gradient_to_first_copy(self):
        base = random_cloud(6, seed=9)
        doubled = np.repeat(base, 2, axis=0)  # [p0, p0, p1, p1, ...]
        m = init_model("mini-pointnet", 4, seed=3, hidden=(8, 8, 16, 8))
        g_base = m.input_gradient(base, 2)
        g_doubled = m.input_gradient(doubled, 2)
        assert np.array_equal(g_doubled[1::2], np.zeros_like(g_base))
        assert np.array_equal(g_doubled[0::2], g_base)

    def test_label_validated(self):
        m = init_model("mini-pointnet", 3, seed=0)
        with pytest.raises(InvalidInput):
            m.input_gradient(random_cloud(), 7)


class TestTraining:
    def _tiny_set(self, per_class=3, p=24, seed=0):
        return synth_dataset(per_class, p, seed=seed, jitter=0.02, split="train")

    def test_empty_batch_rejected(self):
        m = init_model("mini-pointnet", 5, seed=0, hidden=(8, 8, 16, 8))
        with pytest.raises(InvalidInput):
            param_gradient_and_step(m, [], TrainConfig(epochs=1))

    def test_zero_learning_rate_rejected(self):
        with pytest.raises(InvalidInput):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(InvalidInput):
            TrainConfig(epochs=0)

    def test_step_is_deterministic(self):
        batch = list(self._tiny_set().clouds[:6])
        m = init_model("mini-pointnet", 5, seed=4, hidden=(8, 8, 16, 8))
        cfg = TrainConfig(epochs=1, learning_rate=0.05)
        a, va, la = param_gradient_and_step(m, batch, cfg)
        b, vb, lb = param_gradient_and_step(m, batch, cfg)
        assert la == lb
        assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
        assert all(np.array_equal(va[k], vb[k]) for k in va)

    def test_overfits_single_sample(self):
        cloud = synth_shape(2, 24, seed=3, jitter=0.02)
        m = init_model("mini-pointnet", 5, seed=1, hidden=(8, 8, 16, 8))
        cfg = TrainConfig(epochs=1, learning_rate=0.05)
        velocity = None
        for _ in range(50):
            m, velocity, loss = param_gradient_and_step(m, [cloud], cfg, velocity)
        assert loss < 0.01

    def test_momentum_step_math(self):
        cloud = synth_shape(0, 16, seed=1, jitter=0.0)
        m = init_model("mini-pointnet", 5, seed=2, hidden=(8, 8, 16, 8))
        cfg = TrainConfig(epochs=1, learning_rate=0.1, momentum=0.9)
        _, _, grads = m.loss_and_grads(cloud.points, cloud.label)
        stepped, velocity, _ = param_gradient_and_step(m, [cloud], cfg)
        name = "head2.w"
        assert velocity[name] == pytest.approx(grads[name])
        assert stepped.params[name] == pytest.approx(m.params[name] - 0.1 * grads[name])

    def test_training_log_and_determinism(self, tmp_path):
        train = self._tiny_set()
        cfg = TrainConfig(epochs=1, learning_rate=0.02, batch_size=8, seed=7)
        model1, log1 = train_model("mini-pointnet", train, cfg, hidden=(8, 8, 16, 8))
        model2, log2 = train_model("mini-pointnet", train, cfg, hidden=(8, 8, 16, 8))
        assert len(log1) == 1
        assert np.isnan(log1[0]["test_acc"])  # no test set supplied
        assert model_to_bytes(model1) == model_to_bytes(model2)
        assert log1[0]["mean_loss"] == log2[0]["mean_loss"]
        assert log1[0]["train_acc"] == log2[0]["train_acc"]
        write_training_log(tmp_path / "log.csv", log1)
        lines = (tmp_path / "log.csv").read_text().strip().splitlines()
        assert lines[0] == "epoch,mean_loss,train_acc,test_acc"
        assert len(lines) == 2

    def test_unlabeled_cloud_rejected(self):
        ds = Dataset([PointCloud(random_cloud(8))], ["a"], split="train")
        with pytest.raises(InvalidInput):
            train_model("mini-pointnet", ds, TrainConfig(epochs=1))


class TestEvaluateAccuracy:
    def test_constant_predictor_on_balanced_set(self):
        ds = synth_dataset(4, 16, seed=0, jitter=0.0, split="test")
        m = zero_model("mini-pointnet", 5)
        m.params["head2.b"][0] = 1.0  # always predicts class 0, no tie
        assert evaluate_accuracy(m, ds) == pytest.approx(0.2)

    def test_tied_logits_count_as_incorrect(self):
        ds = synth_dataset(2, 16, seed=0, jitter=0.0, split="test")
        assert evaluate_accuracy(zero_model("mini-pointnet", 5), ds) == 0.0

    def test_empty_dataset_rejected(self):
        with pytest.raises(InvalidInput):
            evaluate_accuracy(zero_model(), Dataset([], ["a"], split="test"))

    def test_matches_manual_count(self, tiny_bundle):
        ds = Dataset(tiny_bundle.test.clouds[:10], tiny_bundle.test.class_names, split="test")
        manual = 0
        for cloud in ds:
            logits = tiny_bundle.model.logits(cloud.points)
            if (logits == logits.max()).sum() == 1 and int(np.argmax(logits)) == cloud.label:
                manual += 1
        assert evaluate_accuracy(tiny_bundle.model, ds) == pytest.approx(manual / 10)


class TestTrainedModel:
    def test_tiny_model_learns(self, tiny_bundle):
        assert tiny_bundle.log[-1]["test_acc"] >= 0.8

    def test_clean_sphere_classified(self, tiny_bundle):
        cloud = synth_shape(0, 64, seed=999, jitter=0.0)
        assert int(np.argmax(tiny_bundle.model.logits(cloud.points))) == 0


class TestCheckpoint:
    def test_roundtrip_bytes_and_values(self, tmp_path, tiny_bundle):
        model = tiny_bundle.model
        blob = model_to_bytes(model)
        back = model_from_bytes(blob)
        assert model_to_bytes(back) == blob
        assert back.arch == model.arch and back.k == model.k
        assert all(np.array_equal(back.params[k], model.params[k]) for k in model.params)

        path = tmp_path / "model.nnm"
        save_model(path, model)
        loaded = load_model(path)
        acc_mem = evaluate_accuracy(model, tiny_bundle.test)
        acc_disk = evaluate_accuracy(loaded, tiny_bundle.test)
        assert acc_mem == acc_disk

    def test_corrupt_checkpoint_rejected(self):
        blob = model_to_bytes(init_model("mini-pointnet", 3, seed=0, hidden=(4, 4, 8, 4)))
        with pytest.raises(InvalidInput):
            model_from_bytes(b"ZZZZ" + blob[4:])
        with pytest.raises(InvalidInput):
            model_from_bytes(blob[:-3])
        with pytest.raises(InvalidInput):
            model_from_bytes(blob + b"\x01")


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_gradient_matches_fd_property(seed):
    # h = 1e-6 keeps the window clear of kinks with overwhelming margin
    rng = np.random.default_rng(seed)
    p = int(rng.integers(5, 14))
    pts = rng.uniform(-1, 1, size=(p, 3))
    label = int(rng.integers(3))
    m = init_model("mini-pointnet", 3, seed=int(rng.integers(1 << 31)), hidden=(6, 6, 12, 6))
    _, analytic, _ = m.loss_and_grads(pts, label)
    assert max_rel_err(analytic, fd_input_gradient(m, pts, label, 1e-6)) < 1e-5
