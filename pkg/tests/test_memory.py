"""Age-based external memory: hand oracles for read/context/write, the
exhaustive state-machine suite, and trace round-trips."""

import numpy as np
import pytest

import videosemnet.tensor as T
from videosemnet import memory
from videosemnet.audit import run_memtrace
from videosemnet.errors import ConfigError


def zero_store(dim):
    """All-zero memory parameters; attention collapses to uniform."""
    store = T.ParameterStore()
    for name in memory.PARAM_NAMES:
        shape = (dim,) if name == "mem_att_score" else (dim, dim)
        store.add(name, T.Tensor(np.zeros(shape), requires_grad=True))
    return store


def seeded_store(dim, seed=0):
    store = T.ParameterStore()
    memory.register_params(store, dim, np.random.default_rng(seed))
    return store


# -- read --------------------------------------------------------------


def test_read_softmax_hand_example():
    """Score vector u picked so pre-tanh scores are [ln 3, 0]: w=[0.75,0.25],
    hard read returns M(0) exactly."""
    d = 1
    store = zero_store(d)
    state = memory.reset(2, d)
    state.matrix = T.Tensor(np.array([[4.0], [0.0]]))
    # scores = tanh(M @ Wm^T + base) @ u with Wm = I-ish scaling
    store["mem_att_memory"].data[:] = [[1.0]]
    theta = np.log(3.0) / np.tanh(4.0)
    store["mem_att_score"].data[:] = [theta]
    v, w = memory.read(state, T.Tensor(np.zeros(d)), store, mode="hard")
    assert np.allclose(w.data, [0.75, 0.25])
    assert np.array_equal(v.data, state.matrix.data[0])


def test_soft_read_is_weighted_mixture():
    d = 2
    store = seeded_store(d)
    state = memory.reset(3, d, policy="seeded_random", seed=1)
    v, w = memory.read(state, T.Tensor(np.ones(d)), store, mode="soft")
    assert np.allclose(v.data, state.matrix.data.T @ w.data)


def test_hard_read_returns_exact_row():
    d = 3
    store = seeded_store(d)
    state = memory.reset(4, d, policy="seeded_random", seed=2)
    v, w = memory.read(state, T.Tensor(np.ones(d)), store, mode="hard")
    assert any(np.array_equal(v.data, row) for row in state.matrix.data)


def test_read_increments_all_ages():
    store = seeded_store(2)
    state = memory.reset(3, 2)
    memory.read(state, T.Tensor(np.zeros(2)), store)
    assert np.array_equal(state.ages, [1, 1, 1])


def test_read_rejects_bad_mode():
    with pytest.raises(ConfigError):
        memory.read(memory.reset(2, 2), T.Tensor(np.zeros(2)), seeded_store(2), mode="fuzzy")


# -- context update ----------------------------------------------------


def test_context_update_hand_example():
    """W_v^beta = I, other maps zero, v = 0.5 everywhere -> C' = tanh(0.5)."""
    d = 3
    store = zero_store(d)
    store["mem_ctx_read"].data[:] = np.eye(d)
    state = memory.reset(2, d)
    c = memory.update_context(state, T.Tensor(np.full(d, 0.5)), T.Tensor(np.zeros(d)), store)
    assert np.allclose(c.data, np.tanh(0.5))
    assert state.context is c


# -- write -------------------------------------------------------------


def test_write_targets_oldest_and_zeroes_age():
    d = 2
    store = seeded_store(d)
    state = memory.reset(3, d)
    state.ages[:] = [5, 2, 1]
    state.context = T.Tensor(np.ones(d))
    p = memory.write(state, store)
    assert p == 0
    assert np.array_equal(state.ages, [0, 2, 1])
    assert np.allclose(state.matrix.data[0], store["mem_write_proj"].data @ np.ones(d))


def test_write_offset_wraps():
    d = 2
    store = seeded_store(d)
    state = memory.reset(3, d)
    state.ages[:] = [5, 2, 1]

    class FixedRng:
        def integers(self, lo, hi):
            return 2

    p = memory.write(state, store, rng=FixedRng(), r_max=2)
    assert p == 2


def test_write_r_max_contracts():
    store = seeded_store(2)
    state = memory.reset(3, 2)
    with pytest.raises(ConfigError):
        memory.write(state, store, r_max=3)
    with pytest.raises(ConfigError):
        memory.write(state, store, r_max=1)  # rng required


def test_reset_policies():
    z = memory.reset(3, 2, policy="zero")
    assert np.all(z.matrix.data == 0) and np.all(z.ages == 0)
    r1 = memory.reset(3, 2, policy="seeded_random", seed=9)
    r2 = memory.reset(3, 2, policy="seeded_random", seed=9)
    assert np.array_equal(r1.matrix.data, r2.matrix.data)
    with pytest.raises(ConfigError):
        memory.reset(3, 2, policy="noisy")


# -- state-machine suite (exhaustive for m <= 8, r_max = 0) ------------


@pytest.mark.parametrize("slots", [1, 2, 3, 5, 8])
@pytest.mark.parametrize("mode", ["hard", "soft"])
def test_state_machine_invariants(slots, mode):
    dim = 4
    store = seeded_store(dim, seed=slots)
    state = memory.reset(slots, dim, policy="seeded_random", seed=slots)
    rng = np.random.default_rng(slots)
    prev_ages = state.ages.copy()
    for step in range(4 * slots + 8):
        summary = T.Tensor(rng.standard_normal(dim))
        v, w = memory.read(state, summary, store, mode=mode)
        # ages strictly increment on every read (between writes)
        assert np.array_equal(state.ages, prev_ages + 1)
        if mode == "hard":
            assert any(np.array_equal(v.data, row) for row in state.matrix.data)
        memory.update_context(state, v, summary, store)
        pre_write_ages = state.ages.copy()
        p = memory.write(state, store)
        # write target always has maximal pre-write age
        assert pre_write_ages[p] == pre_write_ages.max()
        # exactly one zero age after each full cycle
        assert int((state.ages == 0).sum()) == 1
        assert state.ages[p] == 0
        prev_ages = state.ages.copy()
    # after enough cycles every location has been written
    assert state.ages.max() < 4 * slots + 8


def test_memtrace_determinism_and_replay():
    a = run_memtrace(dim=4, slots=4, steps=16, seed=5, read_mode="hard")
    b = run_memtrace(dim=4, slots=4, steps=16, seed=5, read_mode="hard")
    assert [r.to_json() for r in a] == [r.to_json() for r in b]
    c = run_memtrace(dim=4, slots=4, steps=16, seed=6, read_mode="hard")
    assert [r.to_json() for r in a] != [r.to_json() for r in c]


def test_trace_round_trip(tmp_path):
    trace = run_memtrace(dim=3, slots=3, steps=8, seed=1, read_mode="soft")
    path = tmp_path / "trace.jsonl"
    memory.dump_trace(trace, path)
    back = memory.load_trace(path)
    assert back == [__import__("json").loads(r.to_json()) for r in trace]


def test_detach_preserves_values_cuts_graph():
    d = 2
    store = seeded_store(d)
    state = memory.reset(2, d)
    s = T.Tensor(np.ones(d), requires_grad=True)
    memory.cycle(state, s, store)
    before = state.matrix.data.copy()
    state.detach()
    assert np.array_equal(state.matrix.data, before)
    assert state.matrix._backward is None and state.context._backward is None
