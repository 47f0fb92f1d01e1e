"""MLP policy: forward pass, init statistics, mutation, binary I/O."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from raceline.policy import (
    DEFAULT_LAYER_SIZES,
    MAGIC,
    MlpPolicy,
    forward,
    load_policy,
    mutate,
    random_init,
    save_policy,
)


def _zero_policy(sizes=DEFAULT_LAYER_SIZES):
    weights = tuple(
        np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])
    )
    biases = tuple(np.zeros(o) for o in sizes[1:])
    return MlpPolicy(layer_sizes=sizes, weights=weights, biases=biases)


def _numpy_forward(policy, x):
    h = np.asarray(x, dtype=float)
    for w, b in zip(policy.weights, policy.biases):
        h = np.tanh(w @ h + b)
    return h


class TestForward:
    def test_zero_network_outputs_zero(self):
        cmd = forward(_zero_policy(), np.ones(7))
        assert cmd.steer == 0.0
        assert cmd.throttle == 0.0

    def test_single_path_by_hand(self):
        # One active unit per layer: x -> tanh(2x) -> tanh(-h) -> tanh(0.5h + 0.25).
        sizes = (1, 1, 1, 2)
        w = (np.array([[2.0]]), np.array([[-1.0]]), np.array([[0.5], [0.0]]))
        b = (np.zeros(1), np.zeros(1), np.array([0.25, -0.75]))
        policy = MlpPolicy(layer_sizes=sizes, weights=w, biases=b)
        cmd = forward(policy, np.array([0.3]))
        h = math.tanh(-math.tanh(2.0 * 0.3))
        assert cmd.steer == pytest.approx(math.tanh(0.5 * h + 0.25), abs=1e-12)
        assert cmd.throttle == pytest.approx(math.tanh(-0.75), abs=1e-12)

    def test_matches_numpy_route(self):
        rng = np.random.default_rng(0)
        for seed in range(100):
            policy = random_init(seed)
            x = rng.uniform(0.0, 1.0, size=7)
            cmd = forward(policy, x)
            expect = _numpy_forward(policy, x)
            assert cmd.steer == pytest.approx(expect[0], abs=1e-9)
            assert cmd.throttle == pytest.approx(expect[1], abs=1e-9)

    def test_forward_deterministic(self):
        policy = random_init(3)
        x = np.linspace(0.0, 1.0, 7)
        a = forward(policy, x)
        b = forward(policy, x)
        assert (a.steer, a.throttle) == (b.steer, b.throttle)

    def test_wrong_input_length_rejected(self):
        with pytest.raises(ValueError, match="inputs"):
            forward(random_init(0), np.ones(6))

    @settings(deadline=None, max_examples=50)
    @given(st.lists(st.floats(-10.0, 10.0), min_size=7, max_size=7))
    def test_outputs_bounded_by_tanh(self, xs):
        cmd = forward(random_init(11), np.array(xs))
        assert -1.0 <= cmd.steer <= 1.0
        assert -1.0 <= cmd.throttle <= 1.0


class TestInit:
    def test_default_shapes(self):
        policy = random_init(0)
        assert policy.layer_sizes == (7, 16, 16, 2)
        assert policy.n_inputs == 7
        assert [w.shape for w in policy.weights] == [(16, 7), (16, 16), (2, 16)]
        assert policy.n_params == 7 * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2

    def test_biases_zero_weights_scaled_by_fan_in(self):
        per_layer = [[], [], []]
        for seed in range(1000):
            policy = random_init(seed)
            for i, (w, b) in enumerate(zip(policy.weights, policy.biases)):
                assert np.all(b == 0.0)
                per_layer[i].append(w.ravel())
        for i, fan_in in enumerate((7, 16, 16)):
            flat = np.concatenate(per_layer[i])
            expect = 1.0 / math.sqrt(fan_in)
            assert abs(flat.std() - expect) / expect < 0.1
            assert abs(flat.mean()) < 0.1 * expect

    def test_deterministic_in_seed(self):
        a = random_init(5)
        b = random_init(5)
        assert np.array_equal(a.params_flat(), b.params_flat())
        assert not np.array_equal(a.params_flat(), random_init(6).params_flat())

    def test_params_readonly(self):
        policy = random_init(0)
        with pytest.raises(ValueError):
            policy.weights[0][0, 0] = 1.0


class TestMutate:
    def test_zero_sigma_returns_same_object(self):
        policy = random_init(0)
        assert mutate(policy, 0.0, 42) is policy

    def test_input_untouched(self):
        policy = random_init(0)
        before = policy.params_flat().copy()
        mutate(policy, 0.5, 1)
        assert np.array_equal(policy.params_flat(), before)

    def test_perturbation_scale(self):
        policy = random_init(0, layer_sizes=(7, 96, 96, 2))
        assert policy.n_params == 10274
        delta = mutate(policy, 0.1, 7).params_flat() - policy.params_flat()
        assert 0.09 <= delta.std() <= 0.11
        assert abs(delta.mean()) < 0.01

    def test_mutations_uncorrelated_across_parameters(self):
        # Pairwise correlation over 1,000 mutation draws: the mean |rho|
        # of a true independent sampler concentrates near sqrt(2/(pi*n))
        # ~ 0.025, and the largest of the ~12k pairs near 0.13.
        policy = random_init(0, layer_sizes=(7, 8, 8, 2))
        base = policy.params_flat()
        deltas = np.stack(
            [mutate(policy, 0.1, seed).params_flat() - base for seed in range(1000)]
        )
        corr = np.corrcoef(deltas, rowvar=False)
        off = corr[~np.eye(corr.shape[0], dtype=bool)]
        assert np.mean(np.abs(off)) < 0.05
        assert np.max(np.abs(off)) < 0.25

    def test_deterministic_in_seed(self):
        policy = random_init(0)
        a = mutate(policy, 0.1, 9)
        b = mutate(policy, 0.1, 9)
        assert np.array_equal(a.params_flat(), b.params_flat())

    def test_bad_sigma_rejected(self):
        policy = random_init(0)
        with pytest.raises(ValueError):
            mutate(policy, -0.1, 0)
        with pytest.raises(ValueError):
            mutate(policy, float("nan"), 0)


class TestValidation:
    def test_layer_count_enforced(self):
        with pytest.raises(ValueError, match="4 layer sizes"):
            MlpPolicy(
                layer_sizes=(7, 16, 2),
                weights=(np.zeros((16, 7)), np.zeros((2, 16))),
                biases=(np.zeros(16), np.zeros(2)),
            )

    def test_output_width_enforced(self):
        sizes = (7, 8, 8, 3)
        with pytest.raises(ValueError, match="output width"):
            MlpPolicy(
                layer_sizes=sizes,
                weights=tuple(
                    np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])
                ),
                biases=tuple(np.zeros(o) for o in sizes[1:]),
            )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            MlpPolicy(
                layer_sizes=(7, 16, 16, 2),
                weights=(np.zeros((16, 8)), np.zeros((16, 16)), np.zeros((2, 16))),
                biases=(np.zeros(16), np.zeros(16), np.zeros(2)),
            )

    def test_non_finite_rejected(self):
        w = [np.zeros((16, 7)), np.zeros((16, 16)), np.zeros((2, 16))]
        w[1][3, 3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            MlpPolicy(
                layer_sizes=(7, 16, 16, 2),
                weights=tuple(w),
                biases=(np.zeros(16), np.zeros(16), np.zeros(2)),
            )


class TestIO:
    def test_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "p.bin"
        policy = random_init(123)
        save_policy(path, policy)
        back = load_policy(path)
        assert back.layer_sizes == policy.layer_sizes
        assert np.array_equal(back.params_flat(), policy.params_flat())
        first = path.read_bytes()
        save_policy(path, back)
        assert path.read_bytes() == first
        assert first.startswith(MAGIC)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE!" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_policy(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "t.bin"
        save_policy(path, random_init(0))
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ValueError, match="trailing"):
            load_policy(path)

    def test_truncated_rejected(self, tmp_path):
        path = tmp_path / "short.bin"
        save_policy(path, random_init(0))
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 9])
        with pytest.raises(ValueError):
            load_policy(path)
