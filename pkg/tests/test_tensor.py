"""Tensor engine: forward oracles by hand arithmetic, per-op gradient audits
against central differences (tolerance 1e-6), and shape/error contracts."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import videosemnet.tensor as T
from videosemnet.errors import (
    BatchSizeError,
    ConfigError,
    ContractError,
    DegenerateInputError,
    DimensionError,
    NumericDomainError,
)

GRAD_TOL = 1e-6


def _check(build, params):
    """Gradient-audit a scalar graph builder over a dict of named arrays."""
    store = T.ParameterStore()
    for name, value in params.items():
        store.add(name, T.Tensor(np.asarray(value, dtype=np.float64), requires_grad=True))
    err = T.grad_check(lambda: build(store), store)
    assert err < GRAD_TOL, f"max relative error {err:.3e}"


# -- forward oracles ---------------------------------------------------


def test_matmul_hand_example():
    out = T.matmul(T.Tensor([[1.0, 2.0], [3.0, 4.0]]), T.Tensor([1.0, 1.0]))
    assert np.allclose(out.data, [3.0, 7.0])


def test_matmul_shapes_rank_combinations():
    m = T.Tensor(np.arange(6.0).reshape(2, 3))
    v3, v2 = T.Tensor(np.ones(3)), T.Tensor(np.ones(2))
    assert T.matmul(m, v3).data.shape == (2,)
    assert T.matmul(v2, m).data.shape == (3,)
    assert T.matmul(m, T.transpose(m)).data.shape == (2, 2)


def test_matmul_dimension_errors():
    with pytest.raises(DimensionError):
        T.matmul(T.Tensor(np.ones((2, 3))), T.Tensor(np.ones(2)))
    with pytest.raises(DimensionError):
        T.matmul(T.Tensor(np.ones((2, 2, 2))), T.Tensor(np.ones(2)))


def test_softmax_hand_example():
    out = T.softmax(T.Tensor([np.log(3.0), 0.0]))
    assert np.allclose(out.data, [0.75, 0.25])


def test_softmax_large_inputs_no_overflow():
    out = T.softmax(T.Tensor([1e9, 0.0]))
    assert np.all(np.isfinite(out.data))
    assert np.allclose(out.data, [1.0, 0.0])


def test_softmax_rejects_nan():
    with pytest.raises(NumericDomainError):
        T.softmax(T.Tensor([np.nan, 0.0]))
    with pytest.raises(DimensionError):
        T.softmax(T.Tensor(np.ones((2, 2))))


def test_conv1d_hand_example():
    x = T.Tensor([[1.0], [2.0], [3.0]])
    w = T.Tensor(np.ones((3, 1, 1)))
    b = T.Tensor([0.0])
    out = T.conv1d(x, w, b)
    assert np.allclose(out.data[:, 0], [3.0, 6.0, 5.0])


def test_conv1d_rejects_even_kernel():
    with pytest.raises(ConfigError):
        T.conv1d(T.Tensor(np.ones((4, 1))), T.Tensor(np.ones((2, 1, 1))), T.Tensor([0.0]))


def test_conv1d_rejects_channel_mismatch():
    with pytest.raises(DimensionError):
        T.conv1d(T.Tensor(np.ones((4, 2))), T.Tensor(np.ones((3, 1, 1))), T.Tensor([0.0]))


def test_maxpool_hand_example():
    out = T.maxpool1d(T.Tensor([[1.0], [3.0], [2.0], [5.0]]), window=2)
    assert np.allclose(out.data[:, 0], [3.0, 5.0])


def test_maxpool_drops_trailing_element():
    out = T.maxpool1d(T.Tensor([[1.0], [3.0], [9.0]]), window=2)
    assert np.allclose(out.data[:, 0], [3.0])


def test_maxpool_too_short():
    with pytest.raises(DimensionError):
        T.maxpool1d(T.Tensor([[1.0]]), window=2)


def test_batchnorm_hand_example():
    state = T.BatchNormState(1)
    out = T.batchnorm(
        T.Tensor([[0.0], [2.0]]), T.Tensor([1.0]), T.Tensor([0.0]), state, training=True
    )
    # population variance convention: std = sqrt(1 + eps)
    assert np.allclose(out.data[:, 0], [-1.0, 1.0], atol=1e-4)


def test_batchnorm_updates_running_stats_with_momentum():
    state = T.BatchNormState(1)
    T.batchnorm(T.Tensor([[0.0], [2.0]]), T.Tensor([1.0]), T.Tensor([0.0]), state, training=True)
    assert np.allclose(state.mean, 0.9 * 0.0 + 0.1 * 1.0)
    assert np.allclose(state.var, 0.9 * 1.0 + 0.1 * 1.0)


def test_batchnorm_eval_mode_uses_running_stats():
    state = T.BatchNormState(1)
    state.mean[:] = 5.0
    state.var[:] = 4.0
    out = T.batchnorm(T.Tensor([[7.0]]), T.Tensor([1.0]), T.Tensor([0.0]), state, training=False)
    assert np.allclose(out.data, (7.0 - 5.0) / np.sqrt(4.0 + state.eps))


def test_batchnorm_train_requires_two_rows():
    state = T.BatchNormState(1)
    with pytest.raises(BatchSizeError):
        T.batchnorm(T.Tensor([[1.0]]), T.Tensor([1.0]), T.Tensor([0.0]), state, training=True)


def test_cosine_similarity_values():
    a, b = T.Tensor([1.0, 0.0]), T.Tensor([0.0, 2.0])
    assert float(T.cosine_similarity(a, b).data) == pytest.approx(0.0)
    assert float(T.cosine_similarity(a, a).data) == pytest.approx(1.0)


def test_cosine_zero_vector_strict_raises():
    with pytest.raises(DegenerateInputError):
        T.cosine_similarity(T.Tensor([0.0, 0.0]), T.Tensor([1.0, 0.0]))


def test_cosine_eps_guard_clamps():
    out = T.cosine_similarity(T.Tensor([0.0, 0.0]), T.Tensor([1.0, 0.0]), eps=1e-8)
    assert float(out.data) == pytest.approx(0.0)


def test_backward_requires_scalar():
    with pytest.raises(ContractError):
        T.Tensor(np.ones(3), requires_grad=True).backward()


def test_backward_accumulates_through_shared_node():
    x = T.Tensor([2.0], requires_grad=True)
    y = T.add(T.mul(x, 3.0), T.mul(x, 4.0))
    T.tsum(y).backward()
    assert np.allclose(x.grad, [7.0])


def test_detach_cuts_history():
    x = T.Tensor([1.0], requires_grad=True)
    d = T.mul(x, 2.0).detach()
    T.tsum(T.mul(d, 3.0)).backward()
    assert x.grad is None


# -- per-op gradient audits (< 1e-6) -----------------------------------


def test_grad_add_mul_broadcast(rng):
    _check(
        lambda s: T.tsum(T.mul(T.add(s["a"], s["b"]), s["c"])),
        {"a": rng.standard_normal((3, 4)), "b": rng.standard_normal(4), "c": rng.standard_normal((3, 4))},
    )


def test_grad_matmul_all_rank_combos(rng):
    _check(
        lambda s: T.tsum(T.matmul(s["m"], s["n"])),
        {"m": rng.standard_normal((3, 4)), "n": rng.standard_normal((4, 2))},
    )
    _check(
        lambda s: T.tsum(T.matmul(s["m"], s["v"])),
        {"m": rng.standard_normal((3, 4)), "v": rng.standard_normal(4)},
    )
    _check(
        lambda s: T.tsum(T.matmul(s["v"], s["m"])),
        {"v": rng.standard_normal(3), "m": rng.standard_normal((3, 4))},
    )
    _check(
        lambda s: T.tsum(T.matmul(s["u"], s["v"])),
        {"u": rng.standard_normal(5), "v": rng.standard_normal(5)},
    )


def test_grad_tanh_matmul_chain(rng):
    # the spec's canonical chain: tanh of a matrix-vector product
    _check(
        lambda s: T.tsum(T.tanh(T.matmul(s["w"], s["x"]))),
        {"w": rng.standard_normal((4, 3)), "x": rng.standard_normal(3)},
    )


def test_grad_transpose_sum_mean(rng):
    _check(
        lambda s: T.tsum(T.mul(T.transpose(s["m"]), 2.0)),
        {"m": rng.standard_normal((3, 4))},
    )
    _check(lambda s: T.tmean(s["m"], axis=0).__matmul__(T.Tensor(np.ones(4))), {"m": rng.standard_normal((3, 4))})


def test_grad_concat_stack_slice_row(rng):
    _check(
        lambda s: T.tsum(T.tanh(T.concat([s["a"], s["b"]]))),
        {"a": rng.standard_normal(3), "b": rng.standard_normal(2)},
    )
    _check(
        lambda s: T.tsum(T.tanh(T.stack_rows([s["a"], s["b"]]))),
        {"a": rng.standard_normal(3), "b": rng.standard_normal(3)},
    )
    _check(
        lambda s: T.tsum(T.tanh(T.rows_slice(s["m"], 1, 3))),
        {"m": rng.standard_normal((4, 3))},
    )
    _check(lambda s: T.tsum(T.tanh(T.row(s["m"], 1))), {"m": rng.standard_normal((4, 3))})


def test_grad_set_row_gather_rows(rng):
    _check(
        lambda s: T.tsum(T.tanh(T.set_row(s["m"], 2, s["v"]))),
        {"m": rng.standard_normal((4, 3)), "v": rng.standard_normal(3)},
    )
    _check(
        lambda s: T.tsum(T.tanh(T.gather_rows(s["t"], [0, 2, 2, 1]))),
        {"t": rng.standard_normal((4, 3))},
    )


def test_grad_relu_softmax_cosine(rng):
    # keep relu inputs away from the kink at 0
    x = rng.standard_normal(6)
    x[np.abs(x) < 0.1] = 0.5
    _check(lambda s: T.tsum(T.relu(s["x"])), {"x": x})
    _check(lambda s: T.tsum(T.mul(T.softmax(s["x"]), s["w"])), {"x": rng.standard_normal(5), "w": rng.standard_normal(5)})
    _check(
        lambda s: T.cosine_similarity(s["a"], s["b"]),
        {"a": rng.standard_normal(6) + 2.0, "b": rng.standard_normal(6) + 2.0},
    )


def test_grad_conv1d(rng):
    _check(
        lambda s: T.tsum(T.tanh(T.conv1d(s["x"], s["w"], s["b"]))),
        {
            "x": rng.standard_normal((6, 3)),
            "w": rng.standard_normal((3, 3, 2)),
            "b": rng.standard_normal(2),
        },
    )


def test_grad_maxpool(rng):
    # well-separated values so h-perturbations cannot flip the argmax
    x = rng.permutation(np.arange(12.0)).reshape(6, 2)
    _check(lambda s: T.tsum(T.tanh(T.mul(s["x"], 0.1))), {"x": x})
    _check(lambda s: T.tsum(T.maxpool1d(T.mul(s["x"], 0.1), window=2)), {"x": x})


def test_grad_batchnorm_train_and_eval(rng):
    state = T.BatchNormState(3)

    def build_train(s):
        return T.tsum(T.tanh(T.batchnorm(s["x"], s["g"], s["b"], state, training=True)))

    _check(build_train, {"x": rng.standard_normal((5, 3)), "g": rng.standard_normal(3) + 1.0, "b": rng.standard_normal(3)})

    def build_eval(s):
        return T.tsum(T.tanh(T.batchnorm(s["x"], s["g"], s["b"], state, training=False)))

    _check(build_eval, {"x": rng.standard_normal((5, 3)), "g": rng.standard_normal(3) + 1.0, "b": rng.standard_normal(3)})


# -- property tests ----------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6))
def test_softmax_normalizes(rows, seed):
    x = np.random.default_rng(seed).standard_normal(rows)
    out = T.softmax(T.Tensor(x))
    assert out.data.sum() == pytest.approx(1.0)
    assert np.all(out.data >= 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 1000))
def test_unbroadcast_matches_numpy_broadcast(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal(4)
    out = T.add(T.Tensor(a, requires_grad=True), T.Tensor(b, requires_grad=True))
    assert np.allclose(out.data, a + b)


# -- parameter store ---------------------------------------------------


def test_store_rejects_duplicate_names():
    store = T.ParameterStore()
    store.add("w", T.Tensor([1.0]))
    with pytest.raises(ConfigError):
        store.add("w", T.Tensor([2.0]))


def test_store_trainable_flag_and_zero_grads(rng):
    store = T.ParameterStore()
    w = store.create("w", (3,), rng)
    store.create("frozen", (3,), rng, trainable=False)
    assert [n for n, _ in store.trainable_items()] == ["w"]
    w.grad = np.ones(3)
    store.zero_grads()
    assert w.grad is None
