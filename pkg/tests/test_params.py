import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedqp.params import (
    LayeredParams,
    ShapeMismatchError,
    axpy,
    check_compatible,
    dot,
    load_params,
    norm_sq,
    params_equal,
    params_norm,
    save_params,
    subtract,
    zeros_like,
)

from oracles import loop_axpy, loop_dot

finite_floats = st.floats(
    allow_nan=False, allow_infinity=False, min_value=-1e100, max_value=1e100
)
vectors = st.lists(finite_floats, min_size=0, max_size=40).map(
    lambda v: np.array(v, dtype=np.float64)
)


def lp(**layers) -> LayeredParams:
    return LayeredParams(layers.items())


class TestDot:
    def test_orthogonal(self):
        assert dot(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_value_matches_loop_oracle(self):
        x = np.array([1.0, 2.0, 3.0])
        assert dot(x, x) == 14.0
        assert dot(x, x) == loop_dot(x.tolist(), x.tolist())

    def test_empty(self):
        assert dot(np.array([]), np.array([])) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            dot(np.array([1.0]), np.array([1.0, 2.0]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            dot(np.array([np.nan]), np.array([1.0]))

    @given(vectors, vectors)
    def test_symmetric_exactly(self, x, y):
        n = min(x.size, y.size)
        x, y = x[:n], y[:n]
        assert dot(x, y) == dot(y, x)

    @given(vectors, vectors)
    def test_matches_loop_oracle(self, x, y):
        n = min(x.size, y.size)
        x, y = x[:n], y[:n]
        assert dot(x, y) == loop_dot(x.tolist(), y.tolist())


class TestNormSq:
    def test_zeros(self):
        assert norm_sq(np.zeros(3)) == 0.0

    def test_hand_value(self):
        assert norm_sq(np.array([3.0, 4.0])) == 25.0

    @given(vectors)
    def test_equals_dot_self_and_nonnegative(self, x):
        n = norm_sq(x)
        assert n == dot(x, x)
        assert n >= 0.0


class TestAxpy:
    def test_zero_scaling_returns_y(self):
        x = lp(W=np.array([5.0, -7.0]))
        y = lp(W=np.array([1.0, 2.0]))
        out = axpy(0.0, x, y)
        assert np.array_equal(out.layer("W"), y.layer("W"))

    def test_additive_inverse(self):
        x = lp(W=np.array([1.5, -2.5]), b=np.array([0.25]))
        neg = lp(W=-x.layer("W"), b=-x.layer("b"))
        out = axpy(1.0, x, neg)
        for arr in out.arrays:
            assert np.all(arr == 0.0)

    def test_hand_arithmetic(self):
        x = lp(L1=np.array([1.0, 2.0]))
        y = lp(L1=np.array([3.0, 4.0]))
        out = axpy(2.0, x, y)
        assert out.layer("L1").tolist() == [5.0, 8.0]
        assert out.layer("L1").tolist() == loop_axpy(2.0, [1.0, 2.0], [3.0, 4.0])

    def test_inputs_unmodified(self):
        x = lp(W=np.array([1.0]))
        y = lp(W=np.array([2.0]))
        axpy(3.0, x, y)
        assert x.layer("W")[0] == 1.0 and y.layer("W")[0] == 2.0

    def test_shape_mismatch_names_first_offending_layer(self):
        x = lp(W=np.array([1.0, 2.0]), b=np.array([1.0]))
        y = lp(W=np.array([1.0, 2.0]), b=np.array([1.0, 2.0]))
        with pytest.raises(ShapeMismatchError, match="'b'"):
            axpy(1.0, x, y)
        z = lp(V=np.array([1.0, 2.0]), b=np.array([1.0]))
        with pytest.raises(ShapeMismatchError, match="W"):
            axpy(1.0, x, z)

    @settings(max_examples=60)
    @given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e3, max_value=1e3),
           st.lists(st.floats(allow_nan=False, allow_infinity=False,
                              min_value=-1e3, max_value=1e3),
                    min_size=1, max_size=30))
    def test_bit_for_bit_vs_scalar_loop(self, a, values):
        x = lp(W=np.array(values))
        y = lp(W=np.array(list(reversed(values))))
        out = axpy(a, x, y)
        expect = np.array(loop_axpy(a, x.layer("W").tolist(), y.layer("W").tolist()))
        assert out.layer("W").tobytes() == expect.tobytes()


class TestLayeredParams:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            lp(W=np.array([1.0, np.inf]))

    def test_rejects_non_flat(self):
        with pytest.raises(ValueError, match="flat"):
            LayeredParams([("W", np.ones((2, 2)))])

    def test_arrays_are_read_only(self):
        p = lp(W=np.array([1.0]))
        with pytest.raises(ValueError):
            p.layer("W")[0] = 2.0

    def test_layer_lookup_and_order(self):
        p = lp(W2=np.array([1.0]), W1=np.array([2.0]))
        assert p.names == ("W2", "W1")
        assert p.layer("W1")[0] == 2.0
        with pytest.raises(KeyError):
            p.layer("missing")

    def test_check_compatible_layer_count(self):
        with pytest.raises(ShapeMismatchError, match="count"):
            check_compatible(lp(W=np.array([1.0])), lp(W=np.array([1.0]), b=np.array([1.0])))

    def test_subtract_and_zeros_like(self):
        a = lp(W=np.array([3.0]))
        b = lp(W=np.array([1.0]))
        assert subtract(a, b).layer("W")[0] == 2.0
        assert np.all(zeros_like(a).layer("W") == 0.0)

    def test_params_norm(self):
        p = lp(W=np.array([3.0]), b=np.array([4.0]))
        assert params_norm(p) == 5.0

    def test_params_equal(self):
        a = lp(W=np.array([1.0]))
        assert params_equal(a, lp(W=np.array([1.0])))
        assert not params_equal(a, lp(W=np.array([2.0])))
        assert not params_equal(a, lp(V=np.array([1.0])))


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.normal(size=17)
        arr[0] = -0.0
        arr[1] = 5e-324  # smallest denormal
        arr[2] = 1.7976931348623157e308
        p = LayeredParams([("W1", arr), ("b1", rng.normal(size=3)), ("empty", np.array([]))])
        path = tmp_path / "params.bin"
        save_params(path, p)
        q = load_params(path)
        assert q.names == p.names
        for a, b in zip(p.arrays, q.arrays):
            assert a.tobytes() == b.tobytes()

    def test_order_stable_across_round_trips(self, tmp_path):
        p = lp(z=np.array([1.0]), a=np.array([2.0]), m=np.array([3.0]))
        path = tmp_path / "p.bin"
        save_params(path, p)
        assert load_params(path).names == ("z", "a", "m")

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError, match="magic"):
            load_params(path)
