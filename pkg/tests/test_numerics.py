import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import max_rel_err, numeric_gradient
from marlperf.comm import CommGraph
from marlperf.errors import CacheError, DimensionError, NumericError
from marlperf.numerics import (
    HAVE_COMPILED,
    GradStore,
    Layer,
    OptimizerState,
    ParamStore,
    adam_step,
    dense_backward,
    dense_forward,
    get_backend,
    gradcheck,
    graph_aggregate,
    graph_aggregate_backward,
    gru_cell_backward,
    gru_cell_forward,
    init_dense_layer,
    init_gru,
    init_mlp,
)


class TestDenseForward:
    def test_identity_passthrough(self):
        layer = Layer(np.eye(2), np.zeros(2))
        out, _ = dense_forward(np.array([[1.0, 0.0]]), layer, "identity")
        np.testing.assert_array_equal(out, [[1.0, 0.0]])

    def test_relu_clamps_at_boundary(self):
        layer = Layer(np.array([[1.0], [1.0]]), np.array([-2.0]))
        out, _ = dense_forward(np.array([[1.0, 1.0]]), layer, "relu")
        np.testing.assert_array_equal(out, [[0.0]])

    def test_softmax_rows_sum_to_one(self, rng):
        layer = init_dense_layer(4, 6, rng)
        x = rng.standard_normal((3, 4))
        out, _ = dense_forward(x, layer, "softmax")
        np.testing.assert_allclose(out.sum(axis=1), np.ones(3), atol=1e-12)
        assert (out >= 0).all() and (out <= 1).all()

    def test_shape_mismatch_names_both_shapes(self, rng):
        layer = init_dense_layer(4, 2, rng)
        with pytest.raises(DimensionError) as err:
            dense_forward(rng.standard_normal((3, 5)), layer, "relu")
        assert "(3, 5)" in str(err.value) and "(4, 2)" in str(err.value)


class TestDenseBackward:
    def test_outer_product_identity(self):
        layer = Layer(np.zeros((2, 1)), np.zeros(1))
        _, cache = dense_forward(np.array([[2.0, 3.0]]), layer, "identity")
        _, (gw, gb) = dense_backward(np.array([[1.0]]), cache)
        np.testing.assert_array_equal(gw, [[2.0], [3.0]])
        np.testing.assert_array_equal(gb, [1.0])

    def test_zero_grad_out_gives_zero_grads(self, rng):
        layer = init_dense_layer(3, 2, rng)
        _, cache = dense_forward(rng.standard_normal((4, 3)), layer, "tanh")
        gx, (gw, gb) = dense_backward(np.zeros((4, 2)), cache)
        assert not gx.any() and not gw.any() and not gb.any()

    @pytest.mark.parametrize("activation", ["identity", "tanh", "softmax", "sigmoid"])
    def test_matches_finite_differences(self, rng, activation):
        layer = init_dense_layer(3, 4, rng)
        x = rng.standard_normal((5, 3))
        probe = rng.standard_normal((5, 4))

        def loss_at(flat):
            w = flat[:12].reshape(3, 4)
            b = flat[12:]
            out, _ = dense_forward(x, Layer(w.copy(), b.copy()), activation)
            return float((out * probe).sum())

        out, cache = dense_forward(x, layer, activation)
        _, (gw, gb) = dense_backward(probe, cache)
        flat0 = np.concatenate([layer.weights.ravel(), layer.bias])
        numeric = numeric_gradient(loss_at, flat0)
        analytic = np.concatenate([gw.ravel(), gb])
        assert max_rel_err(analytic, numeric) < 1e-6

    def test_stale_cache_rejected(self, rng):
        layer = init_dense_layer(3, 2, rng)
        _, cache = dense_forward(rng.standard_normal((4, 3)), layer)
        with pytest.raises(CacheError):
            dense_backward(rng.standard_normal((5, 2)), cache)
        with pytest.raises(CacheError):
            dense_backward(rng.standard_normal((4, 2)), object())


class TestGruCell:
    def test_zero_params_zero_state(self):
        params = ParamStore(
            [Layer(np.zeros((5, 3)), np.zeros(3), "gru-gate") for _ in range(3)]
        )
        h, _ = gru_cell_forward(np.zeros((2, 2)), np.zeros((2, 3)), params)
        np.testing.assert_array_equal(h, np.zeros((2, 3)))

    def test_state_stays_in_open_unit_interval(self, rng):
        params = init_gru(4, 6, rng)
        h = rng.uniform(-0.99, 0.99, (8, 6))
        for _ in range(20):
            h, _ = gru_cell_forward(rng.standard_normal((8, 4)), h, params)
        assert (h > -1.0).all() and (h < 1.0).all()

    def test_backward_matches_finite_differences(self, rng):
        params = init_gru(3, 4, rng)
        x = rng.standard_normal((5, 3))
        h0 = rng.uniform(-0.8, 0.8, (5, 4))
        probe = rng.standard_normal((5, 4))

        def loss_and_grad(ps):
            h, cache = gru_cell_forward(x, h0, ps)
            _, _, grads = gru_cell_backward(probe, cache)
            return float((h * probe).sum()), grads.flat()

        assert gradcheck(loss_and_grad, params, eps=1e-5) < 1e-6

    def test_input_gradients_match_finite_differences(self, rng):
        params = init_gru(3, 4, rng)
        x = rng.standard_normal((2, 3))
        h0 = rng.uniform(-0.8, 0.8, (2, 4))
        probe = rng.standard_normal((2, 4))
        h, cache = gru_cell_forward(x, h0, params)
        gx, gh, _ = gru_cell_backward(probe, cache)

        def loss_x(flat):
            h2, _ = gru_cell_forward(flat.reshape(2, 3), h0, params)
            return float((h2 * probe).sum())

        def loss_h(flat):
            h2, _ = gru_cell_forward(x, flat.reshape(2, 4), params)
            return float((h2 * probe).sum())

        assert max_rel_err(gx.ravel(), numeric_gradient(loss_x, x.ravel())) < 1e-6
        assert max_rel_err(gh.ravel(), numeric_gradient(loss_h, h0.ravel())) < 1e-6


class TestGraphAggregate:
    def test_empty_adjacency_broadcasts_bias(self, rng):
        params = ParamStore([init_dense_layer(3, 2, rng, "graph-score")])
        params.layers[0].bias[...] = [0.5, -0.25]
        feats = rng.standard_normal((4, 3))
        out, _ = graph_aggregate(feats, CommGraph.empty(4), params, "identity")
        np.testing.assert_allclose(out, np.tile([0.5, -0.25], (4, 1)))

    def test_complete_graph_identical_features(self):
        params = ParamStore([Layer(np.eye(3), np.zeros(3), "graph-score")])
        f = np.array([0.3, -0.7, 1.1])
        feats = np.tile(f, (5, 1))
        out, _ = graph_aggregate(feats, CommGraph.complete(5), params, "identity")
        np.testing.assert_allclose(out, feats, atol=1e-15)

    def test_ring_matches_dense_algebra_oracle(self, rng):
        n, f, d = 4, 3, 2
        params = ParamStore([init_dense_layer(f, d, rng, "graph-score")])
        feats = rng.standard_normal((n, f))
        graph = CommGraph.ring(n)
        out, _ = graph_aggregate(feats, graph, params, "identity")

        # independent oracle: explicit mean over in-neighbors, then W, b
        expected = np.zeros((n, d))
        for i in range(n):
            nbrs = [j for j in range(n) if graph.edges[j, i]]
            agg = np.mean([feats[j] for j in nbrs], axis=0)
            expected[i] = agg @ params.layers[0].weights + params.layers[0].bias
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_permutation_equivariant_on_complete_graph(self, rng):
        params = ParamStore([init_dense_layer(3, 3, rng, "graph-score")])
        feats = rng.standard_normal((6, 3))
        graph = CommGraph.complete(6)
        out, _ = graph_aggregate(feats, graph, params, "tanh")
        perm = rng.permutation(6)
        out_p, _ = graph_aggregate(feats[perm], graph, params, "tanh")
        np.testing.assert_allclose(out_p, out[perm], atol=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        params = ParamStore([init_dense_layer(3, 2, rng, "graph-score")])
        feats = rng.standard_normal((5, 3))
        graph = CommGraph.ring(5)
        probe = rng.standard_normal((5, 2))

        def loss_and_grad(ps):
            out, cache = graph_aggregate(feats, graph, ps, "tanh")
            _, (gw, gb) = graph_aggregate_backward(probe, cache)
            return float((out * probe).sum()), GradStore(
                [Layer(gw, gb, "graph-score")]
            ).flat()

        assert gradcheck(loss_and_grad, params, eps=1e-5) < 1e-6

    def test_dimension_mismatch(self, rng):
        params = ParamStore([init_dense_layer(3, 2, rng, "graph-score")])
        with pytest.raises(DimensionError):
            graph_aggregate(rng.standard_normal((4, 3)), CommGraph.ring(5), params)


class TestAdam:
    def test_zero_gradient_is_identity(self, rng):
        params = init_mlp((3, 4, 2), rng)
        before = params.flat().copy()
        state = OptimizerState(params, lr=0.1)
        adam_step(params, GradStore.zeros_like(params), state)
        np.testing.assert_array_equal(params.flat(), before)
        assert state.step_count == 1

    def test_first_step_magnitude_is_learning_rate(self):
        params = ParamStore([Layer(np.array([[1.0]]), np.zeros(1))])
        grads = GradStore([Layer(np.array([[1.0]]), np.zeros(1))])
        state = OptimizerState(params, lr=0.1)
        adam_step(params, grads, state)
        assert abs((1.0 - params.layers[0].weights[0, 0]) - 0.1) < 1e-6

    def test_converges_on_quadratic(self):
        params = ParamStore([Layer(np.array([[0.0]]), np.zeros(1))])
        state = OptimizerState(params, lr=0.05)
        for _ in range(500):
            p = params.layers[0].weights[0, 0]
            grads = GradStore([Layer(np.array([[2.0 * (p - 3.0)]]), np.zeros(1))])
            adam_step(params, grads, state)
        assert abs(params.layers[0].weights[0, 0] - 3.0) < 0.01
        assert state.step_count == 500

    def test_non_finite_gradients_name_layer(self, rng):
        params = init_mlp((2, 3, 1), rng)
        grads = GradStore.zeros_like(params)
        grads.layers[1].weights[0, 0] = np.nan
        state = OptimizerState(params)
        with pytest.raises(NumericError) as err:
            adam_step(params, grads, state)
        assert "layer 1" in str(err.value)


class TestGradcheckOp:
    def test_linear_model_is_exact(self, rng):
        params = ParamStore([init_dense_layer(3, 1, rng)])
        x = rng.standard_normal((4, 3))

        def loss_and_grad(ps):
            out, cache = dense_forward(x, ps.layers[0], "identity")
            _, (gw, gb) = dense_backward(np.ones((4, 1)), cache)
            return float(out.sum()), GradStore([Layer(gw, gb)]).flat()

        assert gradcheck(loss_and_grad, params, eps=1e-4) < 1e-9

    def test_two_layer_tanh_mlp(self, rng):
        params = init_mlp((3, 5, 2), rng)
        x = rng.standard_normal((6, 3))
        probe = rng.standard_normal((6, 2))

        def loss_and_grad(ps):
            h1, c1 = dense_forward(x, ps.layers[0], "tanh")
            h2, c2 = dense_forward(h1, ps.layers[1], "tanh")
            grads = GradStore.zeros_like(ps)
            g1, (gw2, gb2) = dense_backward(probe, c2)
            _, (gw1, gb1) = dense_backward(g1, c1)
            grads.add_layer(0, gw1, gb1)
            grads.add_layer(1, gw2, gb2)
            return float((h2 * probe).sum()), grads.flat()

        assert gradcheck(loss_and_grad, params, eps=1e-5) < 1e-6

    def test_softmax_cross_entropy_head(self, rng):
        params = ParamStore([init_dense_layer(4, 3, rng)])
        x = rng.standard_normal((5, 4))
        targets = rng.integers(0, 3, size=5)

        def loss_and_grad(ps):
            probs, cache = dense_forward(x, ps.layers[0], "softmax")
            picked = probs[np.arange(5), targets]
            loss = float(-np.log(picked).mean())
            gprobs = np.zeros_like(probs)
            gprobs[np.arange(5), targets] = -1.0 / (picked * 5)
            _, (gw, gb) = dense_backward(gprobs, cache)
            return loss, GradStore([Layer(gw, gb)]).flat()

        assert gradcheck(loss_and_grad, params, eps=1e-5) < 1e-6


class TestLayerKindInvariant:
    """Every layer kind: analytic gradients vs central differences at
    100 random points."""

    def test_dense_hundred_random_points(self):
        worst = 0.0
        for seed in range(100):
            r = np.random.default_rng(seed)
            act = ("identity", "tanh", "softmax", "sigmoid")[seed % 4]
            params = ParamStore([init_dense_layer(3, 3, r)])
            x = r.standard_normal((4, 3))
            probe = r.standard_normal((4, 3))

            def loss_and_grad(ps):
                out, cache = dense_forward(x, ps.layers[0], act)
                _, (gw, gb) = dense_backward(probe, cache)
                return float((out * probe).sum()), GradStore([Layer(gw, gb)]).flat()

            worst = max(worst, gradcheck(loss_and_grad, params, eps=1e-5))
        assert worst < 1e-6

    def test_gru_gate_hundred_random_points(self):
        worst = 0.0
        for seed in range(100):
            r = np.random.default_rng(1000 + seed)
            params = init_gru(2, 3, r)
            x = r.standard_normal((3, 2))
            h0 = r.uniform(-0.8, 0.8, (3, 3))
            probe = r.standard_normal((3, 3))

            def loss_and_grad(ps):
                h, cache = gru_cell_forward(x, h0, ps)
                _, _, grads = gru_cell_backward(probe, cache)
                return float((h * probe).sum()), grads.flat()

            worst = max(worst, gradcheck(loss_and_grad, params, eps=1e-5))
        assert worst < 1e-6

    def test_graph_score_hundred_random_points(self):
        worst = 0.0
        for seed in range(100):
            r = np.random.default_rng(2000 + seed)
            params = ParamStore([init_dense_layer(3, 2, r, "graph-score")])
            feats = r.standard_normal((4, 3))
            edges = r.random((4, 4)) < 0.5
            np.fill_diagonal(edges, False)
            graph = CommGraph(4, edges, "predefined")
            probe = r.standard_normal((4, 2))

            def loss_and_grad(ps):
                out, cache = graph_aggregate(feats, graph, ps, "tanh")
                _, (gw, gb) = graph_aggregate_backward(probe, cache)
                return float((out * probe).sum()), GradStore(
                    [Layer(gw, gb, "graph-score")]
                ).flat()

            worst = max(worst, gradcheck(loss_and_grad, params, eps=1e-5))
        assert worst < 1e-6


@settings(max_examples=50, deadline=None)
@given(
    rows=st.integers(1, 6),
    cols=st.integers(2, 6),
    seed=st.integers(0, 10_000),
)
def test_softmax_rows_property(rows, cols, seed):
    r = np.random.default_rng(seed)
    layer = Layer(np.eye(cols), np.zeros(cols))
    x = r.standard_normal((rows, cols)) * 10
    out, _ = dense_forward(x, layer, "softmax")
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert (out >= 0).all() and (out <= 1).all()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_adam_zero_grad_identity_property(seed):
    r = np.random.default_rng(seed)
    params = init_mlp((2, 3), r)
    before = params.flat().copy()
    adam_step(params, GradStore.zeros_like(params), OptimizerState(params, lr=0.5))
    np.testing.assert_array_equal(params.flat(), before)


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled kernels not built")
class TestBackendParity:
    """The compiled extension and the NumPy twin agree to float
    reassociation tolerance on every kernel."""

    def test_kernels_agree(self, rng):
        pure, comp = get_backend("pure"), get_backend("compiled")
        x = rng.standard_normal((7, 5))
        w = rng.standard_normal((5, 4))
        b = rng.standard_normal(4)
        g = rng.standard_normal((7, 4))
        np.testing.assert_allclose(
            comp.affine(x, w, b), pure.affine(x, w, b), atol=1e-12
        )
        for a, c in zip(pure.affine_backward(g, x, w), comp.affine_backward(g, x, w)):
            np.testing.assert_allclose(c, a, atol=1e-12)
        z = rng.standard_normal((6, 9))
        for name in ("relu", "tanh", "sigmoid", "softmax_rows"):
            np.testing.assert_allclose(
                getattr(comp, name)(z), getattr(pure, name)(z), atol=1e-12
            )
        adj = (rng.random((6, 6)) < 0.4).astype(np.float64)
        np.fill_diagonal(adj, 0.0)
        f = rng.standard_normal((6, 3))
        np.testing.assert_allclose(
            comp.neighbor_mean(f, adj), pure.neighbor_mean(f, adj), atol=1e-12
        )
        np.testing.assert_allclose(
            comp.neighbor_mean_backward(f, adj),
            pure.neighbor_mean_backward(f, adj),
            atol=1e-12,
        )

    def test_adam_kernel_agrees(self, rng):
        pure, comp = get_backend("pure"), get_backend("compiled")
        p1 = rng.standard_normal(11)
        g = rng.standard_normal(11)
        m1, v1 = np.zeros(11), np.zeros(11)
        p2, m2, v2 = p1.copy(), m1.copy(), v1.copy()
        for t in (1, 2, 3):
            pure.adam_update(p1, g, m1, v1, 0.01, 0.9, 0.999, 1e-8, t)
            comp.adam_update(p2, g, m2, v2, 0.01, 0.9, 0.999, 1e-8, t)
        np.testing.assert_allclose(p2, p1, atol=1e-12)
