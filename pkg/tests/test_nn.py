import math

import numpy as np
import pytest

from miobench import nn
from miobench.fusion import MioModel
from miobench.probes import CnnProbe, FcnProbe
from oracles import finite_difference_max_rel_error, integer_corpus_values


def dense_loop_oracle(weights, bias, x):
    out = np.empty(weights.shape[0], dtype=np.float32)
    for i in range(weights.shape[0]):
        acc = np.float32(0.0)
        for j in range(weights.shape[1]):
            acc = np.float32(acc + np.float32(weights[i, j] * x[j]))
        out[i] = np.float32(acc + bias[i])
    return out


def conv_loop_oracle(kernels, bias, x, padding):
    filters, channels, width = kernels.shape
    if padding == "same":
        left = (width - 1) // 2
        x = np.pad(x, ((0, 0), (left, width - 1 - left)))
    out_len = x.shape[1] - width + 1
    out = np.zeros((filters, out_len), dtype=np.float64)
    for f in range(filters):
        for t in range(out_len):
            acc = 0.0
            for c in range(channels):
                for k in range(width):
                    acc += float(kernels[f, c, k]) * float(x[c, t + k])
            out[f, t] = acc + float(bias[f])
    return out


def maxpool_loop_oracle(x, window):
    channels, length = x.shape
    out_len = length // window
    out = np.empty((channels, out_len), dtype=x.dtype)
    for c in range(channels):
        for t in range(out_len):
            out[c, t] = max(x[c, t * window : (t + 1) * window])
    return out


class TestDense:
    def test_identity(self):
        layer = nn.DenseLayer(np.eye(4, dtype=np.float32), np.zeros(4, np.float32))
        x = np.array([1.0, -2.0, 3.5, 0.0], dtype=np.float32)
        assert np.array_equal(nn.dense_forward(layer, x), x)

    def test_zero_weights_give_bias(self):
        layer = nn.DenseLayer(
            np.zeros((3, 5), dtype=np.float32),
            np.array([1.0, 2.0, 3.0], dtype=np.float32),
        )
        out = nn.dense_forward(layer, np.ones(5, dtype=np.float32))
        assert np.array_equal(out, layer.bias)

    def test_matches_loop_oracle_3_to_2_bit_exact(self):
        rng = np.random.default_rng(50)
        for _ in range(100):
            layer = nn.DenseLayer(
                rng.normal(size=(2, 3)).astype(np.float32),
                rng.normal(size=2).astype(np.float32),
            )
            x = rng.normal(size=3).astype(np.float32)
            assert np.array_equal(
                nn.dense_forward(layer, x),
                dense_loop_oracle(layer.weights, layer.bias, x),
            )

    def test_matches_loop_oracle_integer_exact_larger(self):
        # integer-valued tensors make every sum exact under any order
        rng = np.random.default_rng(51)
        for _ in range(25):
            layer = nn.DenseLayer(
                integer_corpus_values(rng, (6, 9)), integer_corpus_values(rng, 6)
            )
            x = integer_corpus_values(rng, 9)
            assert np.array_equal(
                nn.dense_forward(layer, x),
                dense_loop_oracle(layer.weights, layer.bias, x),
            )

    def test_dim_mismatch(self):
        layer = nn.DenseLayer(np.eye(3, dtype=np.float32), np.zeros(3, np.float32))
        with pytest.raises(ValueError, match="features"):
            nn.dense_forward(layer, np.ones(4, dtype=np.float32))


class TestConv1d:
    def test_identity_kernel_same_padding(self):
        layer = nn.Conv1dLayer(
            np.array([[[0.0, 1.0, 0.0]]], dtype=np.float32),
            np.zeros(1, np.float32),
            padding="same",
        )
        x = np.array([[1.0, 2.0, -3.0, 4.0, 5.0]], dtype=np.float32)
        assert np.array_equal(nn.conv1d_forward(layer, x), x)

    def test_hand_sum_valid(self):
        layer = nn.Conv1dLayer(
            np.ones((1, 1, 3), dtype=np.float32), np.zeros(1, np.float32),
            padding="valid",
        )
        out = nn.conv1d_forward(layer, np.array([[1.0, 2.0, 3.0, 4.0]], np.float32))
        assert np.array_equal(out, np.array([[6.0, 9.0]], dtype=np.float32))

    @pytest.mark.parametrize("padding", ["same", "valid"])
    def test_matches_loop_oracle_integer_exact(self, padding):
        rng = np.random.default_rng(52)
        for _ in range(20):
            layer = nn.Conv1dLayer(
                integer_corpus_values(rng, (3, 2, 3)),
                integer_corpus_values(rng, 3),
                padding=padding,
            )
            x = integer_corpus_values(rng, (2, 7))
            expect = conv_loop_oracle(layer.kernels, layer.bias, x, padding)
            assert np.array_equal(
                nn.conv1d_forward(layer, x).astype(np.float64), expect
            )

    def test_matches_loop_oracle_float_close(self):
        rng = np.random.default_rng(53)
        layer = nn.Conv1dLayer(
            rng.normal(size=(3, 2, 3)).astype(np.float32),
            rng.normal(size=3).astype(np.float32),
            padding="valid",
        )
        x = rng.normal(size=(2, 7)).astype(np.float32)
        expect = conv_loop_oracle(layer.kernels, layer.bias, x, "valid")
        np.testing.assert_allclose(nn.conv1d_forward(layer, x), expect, rtol=1e-6)

    def test_valid_output_length(self):
        rng = np.random.default_rng(54)
        layer = nn.Conv1dLayer(
            rng.normal(size=(2, 1, 4)).astype(np.float32),
            np.zeros(2, np.float32), padding="valid",
        )
        out = nn.conv1d_forward(layer, np.ones((1, 10), dtype=np.float32))
        assert out.shape == (2, 7)

    def test_too_short_for_valid(self):
        layer = nn.Conv1dLayer(
            np.ones((1, 1, 5), dtype=np.float32), np.zeros(1, np.float32),
            padding="valid",
        )
        with pytest.raises(ValueError, match="shorter"):
            nn.conv1d_forward(layer, np.ones((1, 3), dtype=np.float32))

    def test_stride_subsamples(self):
        layer = nn.Conv1dLayer(
            np.array([[[1.0]]], dtype=np.float32), np.zeros(1, np.float32),
            stride=2, padding="valid",
        )
        out = nn.conv1d_forward(layer, np.array([[0.0, 1, 2, 3, 4]], np.float32))
        assert np.array_equal(out, np.array([[0.0, 2.0, 4.0]], dtype=np.float32))


class TestMaxPool:
    def test_hand_case(self):
        out = nn.maxpool1d(np.array([[1.0, 3.0, 2.0, 5.0]]), 2)
        assert np.array_equal(out, np.array([[3.0, 5.0]]))

    def test_constant_input(self):
        out = nn.maxpool1d(np.full((2, 6), 7.0), 3)
        assert np.array_equal(out, np.full((2, 2), 7.0))

    def test_remainder_dropped(self):
        out = nn.maxpool1d(np.array([[1.0, 2.0, 3.0, 4.0, 9.0]]), 2)
        assert np.array_equal(out, np.array([[2.0, 4.0]]))

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(55)
        for _ in range(20):
            x = rng.normal(size=(3, 11)).astype(np.float32)
            assert np.array_equal(nn.maxpool1d(x, 3), maxpool_loop_oracle(x, 3))

    def test_window_longer_than_input(self):
        with pytest.raises(ValueError, match="exceeds"):
            nn.maxpool1d(np.ones((1, 3)), 4)

    def test_backward_routes_to_first_max_on_ties(self):
        x = np.array([[2.0, 2.0, 1.0, 1.0]])
        grad = nn.maxpool1d_backward(x, 2, np.array([[5.0, 7.0]]))
        assert np.array_equal(grad, np.array([[5.0, 0.0, 7.0, 0.0]]))


class TestActivations:
    def test_softmax_symmetry(self):
        assert np.array_equal(nn.softmax(np.zeros(2)), np.array([0.5, 0.5]))

    def test_softmax_overflow_safe(self):
        out = nn.softmax(np.array([1000.0, 0.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0) and out[1] == pytest.approx(0.0)

    def test_softmax_normalized_property(self):
        # exp underflows to an exact 0.0 once the spread passes ~745, so
        # strict positivity is only checkable below that; extreme inputs
        # still must stay finite, normalized, and inside [0, 1]
        rng = np.random.default_rng(56)
        for _ in range(50):
            z = rng.uniform(-300.0, 300.0, size=int(rng.integers(2, 6)))
            probs = nn.softmax(z)
            assert abs(probs.sum() - 1.0) <= 1e-6
            assert np.all(probs > 0) and np.all(probs <= 1.0)
        for _ in range(50):
            z = rng.uniform(-1e3, 1e3, size=int(rng.integers(2, 6)))
            probs = nn.softmax(z)
            assert np.all(np.isfinite(probs))
            assert abs(probs.sum() - 1.0) <= 1e-6
            assert np.all(probs >= 0) and np.all(probs <= 1.0)

    def test_cross_entropy_perfect_prediction(self):
        assert nn.cross_entropy(np.array([1.0, 0.0]), 0) == 0.0

    def test_cross_entropy_floor(self):
        loss = nn.cross_entropy(np.array([0.0, 1.0]), 0)
        assert loss == pytest.approx(-math.log(1e-12))

    def test_cross_entropy_label_range(self):
        with pytest.raises(ValueError, match="out of range"):
            nn.cross_entropy(np.array([0.5, 0.5]), 2)

    def test_relu_backward_gate(self):
        x = np.array([-1.0, 0.0, 2.0])
        grad = nn.relu_backward(x, np.ones(3))
        assert np.array_equal(grad, np.array([0.0, 0.0, 1.0]))


class TestFusedSoftmaxCrossEntropy:
    def test_zero_weight_output_layer_bias_gradient(self):
        probe = FcnProbe(in_dim=4, hidden_dim=3, init_seed=1)
        rng = np.random.default_rng(2)
        bias = rng.normal(size=2).astype(np.float32)
        probe.output.weights[:] = 0.0
        probe.output.bias[:] = bias
        x = rng.normal(size=(1, 4)).astype(np.float32)
        _, grads = probe.loss_and_grads(x, np.array([1]))
        expect = nn.softmax(bias.astype(np.float64)) - np.array([0.0, 1.0])
        np.testing.assert_allclose(grads[3], expect, rtol=1e-6)


class TestAdam:
    def test_first_step_magnitude(self):
        param = np.array([0.0], dtype=np.float64)
        state = nn.AdamState([param], learning_rate=0.1)
        nn.adam_step([param], [np.array([0.3])], state)
        assert state.step_count == 1
        assert param[0] == pytest.approx(-0.1, rel=1e-6)

    def test_zero_gradient_is_identity(self):
        params = [np.ones((2, 2), dtype=np.float32)]
        state = nn.AdamState(params)
        for _ in range(5):
            nn.adam_step(params, [np.zeros((2, 2), dtype=np.float32)], state)
        assert np.array_equal(params[0], np.ones((2, 2), dtype=np.float32))
        assert state.step_count == 5

    def test_quadratic_convergence_matches_scalar_reference(self):
        # independent transcription of the update equations
        def reference(w, lr, b1, b2, eps, steps):
            m = v = 0.0
            trace = []
            for t in range(1, steps + 1):
                g = 2.0 * w
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                w -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
                trace.append(w)
            return trace

        param = np.array([1.0], dtype=np.float64)
        state = nn.AdamState([param], learning_rate=0.1)
        trace = []
        for _ in range(100):
            nn.adam_step([param], [2.0 * param.copy()], state)
            trace.append(param[0])
        expect = reference(1.0, 0.1, 0.9, 0.999, 1e-8, 100)
        np.testing.assert_allclose(trace, expect, rtol=1e-10)
        assert abs(param[0]) < 0.1

    def test_buffers_match_parameter_shapes(self):
        params = [np.zeros((3, 4), np.float32), np.zeros(5, np.float32)]
        state = nn.AdamState(params)
        for p, m, v in zip(params, state.first_moment, state.second_moment):
            assert m.shape == p.shape and v.shape == p.shape


class TestInitialization:
    def test_glorot_bounds(self):
        rng = np.random.default_rng(3)
        sample = nn.glorot_uniform(rng, (50, 40), 40, 50)
        limit = math.sqrt(6.0 / 90.0)
        assert np.all(np.abs(sample) <= limit)

    def test_seeded_models_identical(self):
        a = CnnProbe(10, init_seed=9)
        b = CnnProbe(10, init_seed=9)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa, pb)

    def test_forward_determinism(self):
        probe = FcnProbe(6, init_seed=4)
        x = np.random.default_rng(0).normal(size=6).astype(np.float32)
        assert np.array_equal(probe.forward(x), probe.forward(x))


class TestGradientChecks:
    def test_fcn_probe(self):
        rng = np.random.default_rng(60)
        for draw in range(5):
            probe = FcnProbe(5, hidden_dim=3, init_seed=draw)
            err = finite_difference_max_rel_error(
                probe, (rng.normal(size=5),), [int(rng.integers(0, 2))]
            )
            assert err <= 1e-3

    def test_cnn_probe(self):
        rng = np.random.default_rng(61)
        for draw in range(5):
            probe = CnnProbe(6, filters=2, hidden_dim=3, init_seed=draw)
            err = finite_difference_max_rel_error(
                probe, (rng.normal(size=6),), [int(rng.integers(0, 2))]
            )
            assert err <= 1e-3

    def test_mio_model(self):
        rng = np.random.default_rng(62)
        for draw in range(5):
            model = MioModel(6, 4, proj_dim=3, filters=2, head_hidden=4,
                             init_seed=draw)
            err = finite_difference_max_rel_error(
                model,
                (rng.normal(size=6), rng.normal(size=4)),
                [int(rng.integers(0, 2))],
            )
            assert err <= 1e-3

    def test_batched_gradient_matches_sample_mean(self):
        # mean-over-batch contract: batch gradient equals the average of
        # per-sample gradients
        probe = FcnProbe(4, hidden_dim=3, init_seed=8)
        rng = np.random.default_rng(63)
        batch = rng.normal(size=(6, 4)).astype(np.float32)
        labels = rng.integers(0, 2, size=6)
        _, batch_grads = probe.loss_and_grads(batch, labels)
        summed = [np.zeros_like(p, dtype=np.float64) for p in probe.parameters()]
        for i in range(6):
            _, grads = probe.loss_and_grads(batch[i : i + 1], labels[i : i + 1])
            for acc, g in zip(summed, grads):
                acc += np.asarray(g, dtype=np.float64)
        for bg, acc in zip(batch_grads, summed):
            np.testing.assert_allclose(bg, acc / 6.0, rtol=1e-5, atol=1e-7)


class TestCheckpointContainer:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(70)
        tensors = [rng.normal(size=(3, 4)).astype(np.float32),
                   rng.normal(size=7).astype(np.float32)]
        path = tmp_path / "m.miom"
        nn.write_checkpoint(path, nn.ARCH_FCN, {"config": {"a": 1}}, tensors)
        arch, header, loaded = nn.read_checkpoint(path)
        assert arch == nn.ARCH_FCN
        assert header == {"config": {"a": 1}}
        for original, restored in zip(tensors, loaded):
            assert np.array_equal(original, restored)

    def test_write_deterministic(self, tmp_path):
        tensors = [np.arange(6, dtype=np.float32).reshape(2, 3)]
        nn.write_checkpoint(tmp_path / "a.miom", nn.ARCH_CNN, {"x": 1}, tensors)
        nn.write_checkpoint(tmp_path / "b.miom", nn.ARCH_CNN, {"x": 1}, tensors)
        assert (tmp_path / "a.miom").read_bytes() == (tmp_path / "b.miom").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.miom"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ValueError, match="magic"):
            nn.read_checkpoint(path)
