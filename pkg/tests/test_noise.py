import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisesearch.errors import DegenerateInputError, NumericError, ShapeError
from noisesearch.noise import (
    NoiseTensor,
    TensorShape,
    from_batched,
    gaussian_normalize,
    normalize_array,
    sample_standard_noise,
    to_batched,
)


class TestTensorShape:
    def test_default_view_folds_trailing_square_axes(self):
        assert TensorShape((4, 16, 16)).batched_view == (4, 16)
        assert TensorShape((8, 64, 64)).batched_view == (8, 64)
        assert TensorShape((2, 3, 16, 16)).batched_view == (6, 16)

    def test_non_square_trailing_axes_have_no_default_view(self):
        assert TensorShape((4, 16, 8)).batched_view is None
        assert TensorShape((1024,)).batched_view is None

    def test_explicit_view_overrides_default(self):
        # (14,32,32,32) has 458752 elements = 7 * 256^2
        s = TensorShape((14, 32, 32, 32), batched_view=(7, 256))
        assert s.batched_view == (7, 256)
        s = TensorShape((8, 16, 16, 16), batched_view=(8, 64))
        assert s.batched_view == (8, 64)

    def test_view_element_count_must_match(self):
        with pytest.raises(ShapeError):
            TensorShape((4, 16, 16), batched_view=(4, 15))

    def test_view_bounds(self):
        with pytest.raises(ShapeError):
            TensorShape((4,), batched_view=(4, 1))  # N_s >= 2
        with pytest.raises(ShapeError):
            TensorShape((0, 16, 16))

    def test_size(self):
        assert TensorShape((4, 16, 16)).size == 1024
        assert TensorShape((1,)).size == 1

    def test_require_batched_view(self):
        with pytest.raises(ShapeError):
            TensorShape((7,)).require_batched_view()
        assert TensorShape((4, 16, 16)).require_batched_view() == (4, 16)


class TestNoiseTensor:
    def test_wrong_size_rejected(self):
        with pytest.raises(ShapeError):
            NoiseTensor(TensorShape((4,)), np.zeros(5))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            NoiseTensor(TensorShape((2,)), np.array([1.0, np.nan]))

    def test_values_frozen(self):
        t = NoiseTensor(TensorShape((3,)), np.ones(3))
        with pytest.raises(ValueError):
            t.values[0] = 2.0

    def test_float64_flat(self):
        t = NoiseTensor(TensorShape((2, 2)), np.ones((2, 2), dtype=np.float32))
        assert t.values.dtype == np.float64
        assert t.values.shape == (4,)

    def test_with_values_tracks_lineage(self):
        t = NoiseTensor(TensorShape((3,)), np.ones(3), seed_lineage=("x",))
        t2 = t.with_values(np.zeros(3), note="y")
        assert t2.seed_lineage == ("x", "y")


def test_sample_standard_noise_deterministic():
    shape = TensorShape((4, 16, 16))
    a = sample_standard_noise(shape, np.random.default_rng(5))
    b = sample_standard_noise(shape, np.random.default_rng(5))
    assert np.array_equal(a.values, b.values)
    assert a.seed_lineage == ("standard_normal",)


class TestGaussianNormalize:
    def test_zero_mean_unit_std(self):
        rng = np.random.default_rng(0)
        t = NoiseTensor(TensorShape((100,)), 3.0 * rng.standard_normal(100) + 7.0)
        n = gaussian_normalize(t)
        assert abs(n.values.mean()) < 1e-12
        assert abs(n.values.std() - 1.0) < 1e-12

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        t = NoiseTensor(TensorShape((50,)), rng.standard_normal(50) * 2.5)
        once = gaussian_normalize(t)
        twice = gaussian_normalize(once)
        assert np.allclose(once.values, twice.values, atol=1e-12)

    def test_variance_mode(self):
        rng = np.random.default_rng(2)
        v = rng.standard_normal(64) * 4.0
        t = NoiseTensor(TensorShape((64,)), v)
        n = gaussian_normalize(t, mode="variance")
        assert np.allclose(n.values, (v - v.mean()) / v.var(), atol=1e-12)

    def test_constant_tensor_rejected(self):
        t = NoiseTensor(TensorShape((10,)), np.full(10, 3.0))
        with pytest.raises(DegenerateInputError):
            gaussian_normalize(t)

    def test_unknown_mode_rejected(self):
        t = NoiseTensor(TensorShape((4,)), np.arange(4.0))
        with pytest.raises(ValueError):
            gaussian_normalize(t, mode="minmax")

    def test_array_form_matches(self):
        rng = np.random.default_rng(3)
        v = rng.standard_normal(32)
        t = NoiseTensor(TensorShape((32,)), v)
        assert np.array_equal(gaussian_normalize(t).values, normalize_array(v))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=4, max_size=64))
def test_gn_properties_hypothesis(values):
    v = np.asarray(values)
    if v.var() <= 1e-10:
        return
    t = NoiseTensor(TensorShape((len(values),)), v)
    n = gaussian_normalize(t)
    assert abs(n.values.mean()) < 1e-9
    assert abs(n.values.std() - 1.0) < 1e-9
    again = gaussian_normalize(n)
    assert np.allclose(n.values, again.values, atol=1e-9)


def test_batched_roundtrip_bit_exact():
    shape = TensorShape((4, 16, 16))
    t = sample_standard_noise(shape, np.random.default_rng(9))
    b = to_batched(t)
    assert b.shape == (4, 16, 16)
    back = from_batched(b, shape)
    assert np.array_equal(back.values, t.values)


def test_from_batched_shape_check():
    shape = TensorShape((4, 16, 16))
    with pytest.raises(ShapeError):
        from_batched(np.zeros((4, 16, 15)), shape)
