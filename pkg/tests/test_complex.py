import numpy as np
import pytest

from cdsnet import tensor as T
from cdsnet.complex import (
    EPS_MAG,
    ComplexScalar,
    ComplexTensor,
    complex_conv2d,
    complex_conv2d_reference,
    complex_scale,
    conj_mul,
    eq_maxpool,
    magnitude,
    phase,
)
from cdsnet.tensor import ContractError, DimensionError, Tensor
from oracles import naive_conv2d, rel_err


def rand_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_s(rng):
    return np.exp(rng.uniform(np.log(0.1), np.log(10))) * np.exp(1j * rng.uniform(0, 2 * np.pi))


class TestComplexScale:
    def test_identity(self, rng):
        x = ComplexTensor.from_numpy(rand_complex(rng, (2, 3, 4, 4)))
        np.testing.assert_array_equal(complex_scale(x, 1 + 0j).numpy(), x.numpy())

    def test_multiplication_by_i_rotates(self):
        out = complex_scale(ComplexTensor.from_numpy(np.array([1 + 0j])), 1j)
        np.testing.assert_allclose(out.numpy(), [0 + 1j])

    def test_matches_numpy_complex_arithmetic(self, rng):
        z = rand_complex(rng, (3, 5))
        out = complex_scale(ComplexTensor.from_numpy(z, dtype=np.float64), ComplexScalar(2, 3))
        np.testing.assert_allclose(out.numpy(), (2 + 3j) * z, rtol=1e-12)

    def test_scalar_must_be_finite(self):
        with pytest.raises(ContractError):
            ComplexScalar(np.inf, 0.0)

    def test_polar(self):
        s = ComplexScalar.polar(2.0, np.pi / 2)
        assert abs(s) == pytest.approx(2.0)
        assert complex(s) == pytest.approx(2j)


class TestComplexTensor:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            ComplexTensor(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_magnitude_squared_by_construction(self, rng):
        z = rand_complex(rng, (4, 4))
        x = ComplexTensor.from_numpy(z, dtype=np.float64)
        m = magnitude(x, eps=0.0).data
        np.testing.assert_allclose(m**2, z.real**2 + z.imag**2, rtol=1e-14)


class TestComplexConv:
    def test_reduces_to_real_conv(self, rng):
        x = rng.standard_normal((2, 4, 6, 6))
        w = rng.standard_normal((6, 2, 3, 3))
        out = complex_conv2d(ComplexTensor.from_numpy(x, np.float64), ComplexTensor.from_numpy(w, np.float64), groups=2, padding=1)
        np.testing.assert_allclose(out.re.data, naive_conv2d(x, w, groups=2, padding=1), rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(out.im.data, 0)

    def test_unit_imaginary_kernel(self, rng):
        z = rand_complex(rng, (2, 1, 4, 4))
        x = ComplexTensor.from_numpy(z, np.float64)
        w = ComplexTensor.from_numpy(np.array([[[[1j]]]]), np.float64)
        out = complex_conv2d(x, w)
        np.testing.assert_allclose(out.re.data, -z.imag)
        np.testing.assert_allclose(out.im.data, z.real)

    @pytest.mark.parametrize("groups,stride,padding", [(1, 1, 1), (2, 2, 1), (4, 1, 0)])
    def test_fused_matches_four_real_convs(self, rng, groups, stride, padding):
        x = ComplexTensor.from_numpy(rand_complex(rng, (2, 4, 7, 7)), np.float64)
        w = ComplexTensor.from_numpy(rand_complex(rng, (8, 4 // groups, 3, 3)), np.float64)
        a = complex_conv2d(x, w, groups, stride, padding).numpy()
        b = complex_conv2d_reference(x, w, groups, stride, padding).numpy()
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)

    def test_matches_complex_loop_oracle(self, rng):
        z = rand_complex(rng, (1, 2, 5, 5))
        k = rand_complex(rng, (3, 2, 3, 3))
        expected = naive_conv2d(z, k, padding=1)
        out = complex_conv2d(ComplexTensor.from_numpy(z, np.float64), ComplexTensor.from_numpy(k, np.float64), padding=1)
        np.testing.assert_allclose(out.numpy(), expected, rtol=1e-12, atol=1e-12)

    def test_equivariance_f32(self, rng):
        w = ComplexTensor.from_numpy(rand_complex(rng, (6, 4, 3, 3)))
        worst = 0.0
        for _ in range(50):
            x = ComplexTensor.from_numpy(rand_complex(rng, (2, 4, 6, 6)))
            s = random_s(rng)
            lhs = complex_conv2d(complex_scale(x, s), w, padding=1).numpy()
            rhs = s * complex_conv2d(x, w, padding=1).numpy()
            worst = max(worst, rel_err(lhs, rhs))
        assert worst <= 1e-5

    def test_additivity(self, rng):
        w = ComplexTensor.from_numpy(rand_complex(rng, (3, 2, 3, 3)))
        x = ComplexTensor.from_numpy(rand_complex(rng, (2, 2, 5, 5)))
        y = ComplexTensor.from_numpy(rand_complex(rng, (2, 2, 5, 5)))
        lhs = complex_conv2d(x + y, w).numpy()
        rhs = complex_conv2d(x, w).numpy() + complex_conv2d(y, w).numpy()
        assert rel_err(lhs, rhs) <= 1e-5

    def test_shape_error(self, rng):
        x = ComplexTensor.from_numpy(rand_complex(rng, (1, 3, 4, 4)))
        w = ComplexTensor.from_numpy(rand_complex(rng, (2, 2, 3, 3)))
        with pytest.raises(DimensionError):
            complex_conv2d(x, w)


class TestConjMul:
    def test_self_conjugation(self, rng):
        z = rand_complex(rng, (3, 3))
        x = ComplexTensor.from_numpy(z, np.float64)
        out = conj_mul(x, x)
        np.testing.assert_allclose(out.re.data, np.abs(z) ** 2, rtol=1e-14)
        np.testing.assert_array_equal(out.im.data, 0)

    def test_hand_example(self):
        out = conj_mul(ComplexTensor.from_numpy(np.array([1 + 1j])), ComplexTensor.from_numpy(np.array([1 - 1j])))
        np.testing.assert_array_equal(out.numpy(), [0 + 2j])

    def test_phase_cancellation_law(self, rng):
        for _ in range(20):
            x = ComplexTensor.from_numpy(rand_complex(rng, (4, 4)))
            y = ComplexTensor.from_numpy(rand_complex(rng, (4, 4)))
            s = random_s(rng)
            lhs = conj_mul(complex_scale(x, s), complex_scale(y, s)).numpy()
            rhs = abs(s) ** 2 * conj_mul(x, y).numpy()
            assert rel_err(lhs, rhs) <= 1e-5

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            conj_mul(ComplexTensor(np.zeros(2)), ComplexTensor(np.zeros(3)))


class TestMagnitudePhase:
    def test_three_four_five(self):
        x = ComplexTensor.from_numpy(np.array([3 + 4j]), np.float64)
        assert magnitude(x).item() == pytest.approx(5.0, abs=1e-12)
        assert phase(x).item() == pytest.approx(np.arctan2(4, 3))

    def test_origin(self):
        x = ComplexTensor(Tensor(np.zeros(1), requires_grad=True, dtype=np.float64), Tensor(np.zeros(1), requires_grad=True, dtype=np.float64))
        assert magnitude(x).item() == pytest.approx(np.sqrt(EPS_MAG))
        p = phase(x)
        assert p.item() == 0.0
        T.backward(T.sum(p) + T.sum(magnitude(x)))
        assert np.all(np.isfinite(x.re.grad))

    def test_magnitude_scales_with_abs_s(self, rng):
        x = ComplexTensor.from_numpy(rand_complex(rng, (5, 5)))
        for _ in range(10):
            s = random_s(rng)
            assert rel_err(magnitude(complex_scale(x, s)).data, abs(s) * magnitude(x).data) <= 1e-4


class TestEqMaxPool:
    def test_hand_window(self):
        z = np.array([[[[1 + 0j, 0 + 3j], [2 + 0j, 1 + 1j]]]])
        out = eq_maxpool(ComplexTensor.from_numpy(z), 2)
        np.testing.assert_array_equal(out.numpy(), [[[[0 + 3j]]]])

    def test_single_element_window_is_identity(self, rng):
        x = ComplexTensor.from_numpy(rand_complex(rng, (2, 3, 4, 4)))
        np.testing.assert_array_equal(eq_maxpool(x, 1).numpy(), x.numpy())

    def test_tie_breaks_to_first_index(self):
        z = np.array([[[[1j, 1 + 0j], [-1 + 0j, 0.5 + 0j]]]])
        out = eq_maxpool(ComplexTensor.from_numpy(z), 2)
        np.testing.assert_array_equal(out.numpy(), [[[[1j]]]])

    def test_selection_equivariant(self, rng):
        z = rand_complex(rng, (2, 3, 8, 8))
        x = ComplexTensor.from_numpy(z, np.float64)
        s = 0.3 - 2.1j
        base = eq_maxpool(x, 2).numpy()
        scaled = eq_maxpool(complex_scale(x, s), 2).numpy()
        np.testing.assert_allclose(scaled, s * base, rtol=1e-12)

    def test_indivisible_window(self, rng):
        with pytest.raises((ContractError, DimensionError)):
            eq_maxpool(ComplexTensor.from_numpy(rand_complex(rng, (1, 1, 5, 5))), 2)
