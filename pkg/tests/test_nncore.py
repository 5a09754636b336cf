import numpy as np
import pytest

from dopplerpose import nncore as nn
from dopplerpose.nncore import Tensor
from dopplerpose.nncore import tensor as ops


def rng64(seed):
    return np.random.default_rng(seed)


def t64(rng, shape, grad=False):
    return Tensor(rng.normal(size=shape), requires_grad=grad, dtype=np.float64)


class TestAutogradBasics:
    def test_linear_loss_gradient_exact(self):
        rng = rng64(0)
        w = t64(rng, (4,), grad=True)
        x = t64(rng, (4,))
        loss = ops.tsum(ops.mul(w, x))
        loss.backward()
        assert np.array_equal(w.grad, x.data)

    def test_unused_parameter_gets_no_gradient(self):
        rng = rng64(1)
        w = t64(rng, (3,), grad=True)
        unused = t64(rng, (3,), grad=True)
        loss = ops.tsum(ops.mul(w, w))
        loss.backward()
        assert unused.grad is None

    def test_backward_rejects_non_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ValueError):
            ops.mul(x, 2.0).backward()

    def test_broadcast_add_gradients(self):
        rng = rng64(2)
        a = t64(rng, (5, 3), grad=True)
        b = t64(rng, (3,), grad=True)
        loss = ops.tsum(ops.add(a, b))
        loss.backward()
        assert np.allclose(a.grad, 1.0)
        assert np.allclose(b.grad, 5.0)

    def test_diamond_graph_accumulates(self):
        x = Tensor(np.array([2.0]), requires_grad=True, dtype=np.float64)
        y = ops.add(ops.mul(x, x), ops.mul(x, 3.0))  # x^2 + 3x
        ops.tsum(y).backward()
        assert np.allclose(x.grad, 2 * 2.0 + 3.0)

    def test_no_grad_blocks_graph(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with nn.no_grad():
            y = ops.mul(x, 2.0)
        assert y.requires_grad is False
        assert y._backward is None

    @pytest.mark.parametrize("op,dfn", [
        (ops.tanh, lambda x: 1 - np.tanh(x) ** 2),
        (ops.sigmoid, lambda x: (1 / (1 + np.exp(-x))) * (1 - 1 / (1 + np.exp(-x)))),
        (ops.relu, lambda x: (x > 0).astype(float)),
        (ops.absolute, lambda x: np.sign(x)),
        (ops.exp, np.exp),
    ])
    def test_elementwise_derivatives(self, op, dfn):
        rng = rng64(3)
        x = t64(rng, (17,), grad=True)
        ops.tsum(op(x)).backward()
        assert np.allclose(x.grad, dfn(x.data), atol=1e-12)


class TestConv1d:
    def test_impulse_shift_against_sliding_dot_oracle(self):
        x = np.zeros((1, 1, 11))
        x[0, 0, 5] = 1.0
        w = np.zeros((1, 1, 5))
        w[0, 0, 0] = 1.0
        layer_out = ops.conv1d(Tensor(x, dtype=np.float64),
                               Tensor(w, dtype=np.float64), None,
                               stride=1, padding=2).data
        # independent oracle: direct sliding dot product
        xp = np.pad(x[0, 0], 2)
        oracle = np.array([xp[i:i + 5] @ w[0, 0] for i in range(11)])
        assert np.allclose(layer_out[0, 0], oracle)

    def test_random_conv_matches_naive(self):
        rng = rng64(4)
        x = rng.normal(size=(2, 3, 16))
        w = rng.normal(size=(5, 3, 4))
        b = rng.normal(size=5)
        out = ops.conv1d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64),
                         Tensor(b, dtype=np.float64), stride=2, padding=1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1)))
        w_out = (16 + 2 - 4) // 2 + 1
        oracle = np.zeros((2, 5, w_out))
        for n in range(2):
            for f in range(5):
                for o in range(w_out):
                    oracle[n, f, o] = np.sum(xp[n, :, 2 * o: 2 * o + 4] * w[f]) + b[f]
        assert np.allclose(out, oracle)

    def test_shape_mismatch_rejected(self):
        x = Tensor(np.zeros((1, 2, 8)))
        w = Tensor(np.zeros((3, 4, 3)))
        with pytest.raises(ValueError):
            ops.conv1d(x, w, None)
        with pytest.raises(ValueError):
            ops.conv1d(Tensor(np.zeros((1, 2, 3))), Tensor(np.zeros((3, 2, 5))), None)


class TestGradientChecks:
    """Every layer type against central finite differences (<= 1e-4 relative)."""

    TOL = 1e-4

    def _check(self, build, params):
        err = nn.check_gradients(build, params)
        assert err <= self.TOL, f"gradient mismatch: {err:.2e}"

    @pytest.mark.parametrize("seed", range(10))
    def test_linear(self, seed):
        rng = rng64(seed)
        layer = nn.Linear(6, 4, rng=rng, dtype=np.float64)
        x = t64(rng, (5, 6), grad=True)
        build = lambda: ops.tsum(ops.tanh(layer(x)))
        self._check(build, layer.params() + [x])

    @pytest.mark.parametrize("seed", range(10))
    def test_conv1d(self, seed):
        rng = rng64(100 + seed)
        layer = nn.Conv1d(2, 3, kernel=5, stride=2, padding=0, rng=rng, dtype=np.float64)
        x = t64(rng, (3, 2, 13), grad=True)
        build = lambda: ops.tsum(ops.tanh(layer(x)))
        self._check(build, layer.params() + [x])

    @pytest.mark.parametrize("seed", range(10))
    def test_batchnorm_training_mode(self, seed):
        rng = rng64(200 + seed)
        layer = nn.BatchNorm1d(4, dtype=np.float64)
        layer.gamma.data = rng.normal(size=4)
        layer.beta.data = rng.normal(size=4)
        x = t64(rng, (7, 4), grad=True)

        def build():
            # keep running stats untouched by the repeated FD evaluations
            layer.running_mean = np.zeros(4)
            layer.running_var = np.ones(4)
            return ops.tsum(ops.mul(layer(x, training=True), t64(rng64(0), (7, 4))))

        self._check(build, layer.params() + [x])

    @pytest.mark.parametrize("seed", range(10))
    def test_lstm_cell(self, seed):
        rng = rng64(300 + seed)
        layer = nn.LSTM(3, 4, num_layers=1, rng=rng, dtype=np.float64)
        x = t64(rng, (2, 4, 3), grad=True)
        build = lambda: ops.tsum(ops.tanh(layer(x)))
        self._check(build, layer.params() + [x])

    @pytest.mark.parametrize("seed", range(3))
    def test_bidirectional_two_layer_lstm(self, seed):
        rng = rng64(400 + seed)
        layer = nn.LSTM(3, 3, num_layers=2, bidirectional=True, rng=rng, dtype=np.float64)
        x = t64(rng, (2, 3, 3), grad=True)
        build = lambda: ops.tsum(layer(x))
        self._check(build, layer.params() + [x])

    @pytest.mark.parametrize("seed", range(3))
    def test_activations_via_input_grad(self, seed):
        # keep inputs away from the ReLU kink so central differences are valid
        rng = rng64(500 + seed)
        raw = rng.normal(size=(6, 5))
        x = Tensor(np.sign(raw) * (0.05 + np.abs(raw)), requires_grad=True,
                   dtype=np.float64)
        for act in (nn.ReLU(), nn.Tanh()):
            self._check(lambda: ops.tsum(ops.mul(act(x), x)), [x])


class TestLayerContracts:
    def test_linear_identity(self):
        layer = nn.Linear(4, 4, rng=rng64(0))
        layer.weight.data = np.eye(4, dtype=np.float32)
        layer.bias.data = np.zeros(4, dtype=np.float32)
        x = Tensor(np.arange(8, dtype=np.float32).reshape(2, 4))
        assert np.allclose(layer(x).data, x.data)

    def test_relu_values(self):
        out = nn.ReLU()(Tensor(np.array([-1.0, 0.0, 2.0])))
        assert np.array_equal(out.data, [0.0, 0.0, 2.0])

    def test_batchnorm_inference_is_affine(self):
        rng = rng64(7)
        layer = nn.BatchNorm1d(3)
        layer.running_mean = rng.normal(size=3).astype(np.float32)
        layer.running_var = rng.uniform(0.5, 2.0, size=3).astype(np.float32)
        x1 = Tensor(rng.normal(size=(4, 3)).astype(np.float32))
        x2 = Tensor(rng.normal(size=(4, 3)).astype(np.float32))
        a, b = 2.0, -0.7
        lhs = layer(Tensor(a * x1.data + b * x2.data + 1.0)).data
        rhs = (a * layer(x1).data + b * layer(x2).data
               + layer(Tensor(np.ones((4, 3), dtype=np.float32))).data
               - (a + b) * layer(Tensor(np.zeros((4, 3), dtype=np.float32))).data)
        assert np.allclose(lhs, rhs, atol=1e-5)

    def test_lstm_bidirectional_output_width(self):
        rng = rng64(8)
        layer = nn.LSTM(5, 6, num_layers=2, bidirectional=True, rng=rng)
        x = Tensor(rng.normal(size=(3, 7, 5)).astype(np.float32))
        out = layer(x)
        assert out.data.shape == (3, 7, 12)

    def test_lstm_rejects_wrong_width(self):
        layer = nn.LSTM(5, 6, rng=rng64(9))
        with pytest.raises(ValueError):
            layer(Tensor(np.zeros((2, 4, 3), dtype=np.float32)))

    def test_forward_deterministic_per_seed(self):
        x = Tensor(np.random.default_rng(1).normal(size=(2, 6, 5)).astype(np.float32))
        outs = []
        for _ in range(2):
            layer = nn.LSTM(5, 4, num_layers=2, bidirectional=True, rng=rng64(42))
            outs.append(layer(x).data)
        assert np.array_equal(outs[0], outs[1])


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        p = np.array([1.0, -2.0, 3.0])
        state = nn.AdamState(lr=0.01)
        out = nn.adam_step(state, [p], [np.zeros(3)])
        assert np.array_equal(out[0], p)

    def test_first_step_magnitude_is_lr(self):
        state = nn.AdamState(lr=0.05)
        g = np.array([0.3, -2.0, 0.001])
        out = nn.adam_step(state, [np.zeros(3)], [g])
        # bias correction makes the first update exactly lr * sign(g)
        assert np.allclose(out[0], -0.05 * np.sign(g), atol=1e-6)

    def test_quadratic_bowl_convergence(self):
        # scripted convergence oracle: minimize |w|^2 from |w| = 1
        w = Tensor(np.array([0.6, -0.8]), requires_grad=True, dtype=np.float64)
        opt = nn.Adam([w], lr=0.01)
        for _ in range(500):
            opt.zero_grad()
            loss = ops.tsum(ops.mul(w, w))
            loss.backward()
            opt.step()
        assert np.linalg.norm(w.data) < 1e-2

    def test_shape_mismatch_rejected(self):
        state = nn.AdamState()
        with pytest.raises(ValueError):
            nn.adam_step(state, [np.zeros(3)], [np.zeros(4)])


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        rng = rng64(11)
        layers = [nn.Linear(4, 3, rng=rng), nn.BatchNorm1d(3), nn.ReLU(),
                  nn.LSTM(3, 5, bidirectional=True, rng=rng)]
        params = [p for l in layers for p in l.params()]
        state = layers[1].state_arrays()
        path = tmp_path / "model.dpc"
        nn.save_checkpoint(path, kind="demo", specs=[l.spec() for l in layers],
                           params=params, meta={"seed": 11}, extra_state=state)
        kind, specs, arrays, st, meta = nn.load_checkpoint(path)
        assert kind == "demo"
        assert meta == {"seed": 11}
        assert len(arrays) == len(params)
        for a, p in zip(arrays, params):
            assert np.array_equal(a, p.data.astype(np.float32))
        rebuilt = [nn.build_layer(s, rng=rng64(0)) for s in specs]
        assert isinstance(rebuilt[0], nn.Linear)
        assert isinstance(rebuilt[3], nn.LSTM) and rebuilt[3].bidirectional
