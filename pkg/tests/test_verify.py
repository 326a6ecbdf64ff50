import numpy as np

from cdsnet import tensor as T
from cdsnet.tensor import Tensor
from cdsnet.verify import (
    GRAD_TOL,
    LawResult,
    end_to_end_invariance,
    equivariance_laws,
    format_laws,
    format_report,
    gradcheck,
    gradient_laws,
    random_scalar,
    relative_error,
)


def _wrong_square(a):
    # forward a^2, backward claims 2.01 a
    return T._make(a.data**2, (a,), lambda g: (2.01 * g * a.data,))


class TestGradcheck:
    def test_correct_op_passes(self, rng):
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True, dtype=np.float64)
        err, kept, excluded = gradcheck(lambda: T.square(a), [a], rng)
        assert err <= GRAD_TOL and kept == 12 and excluded == 0

    def test_wrong_backward_caught(self, rng):
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True, dtype=np.float64)
        err, _, _ = gradcheck(lambda: _wrong_square(a), [a], rng)
        assert err > 1e-3

    def test_kink_straddling_coordinate_excluded(self, rng):
        a = Tensor(np.array([[1.0, -2.0, 3e-6]]), requires_grad=True, dtype=np.float64)
        err, kept, excluded = gradcheck(lambda: T.relu(a), [a], rng)
        assert excluded == 1 and kept == 2 and err <= GRAD_TOL

    def test_selected_cases_pass(self):
        for r in gradient_laws(instances=2, names=["conv2d", "complex_conv2d", "ComplexBatchNorm[batch]", "cross_entropy"]):
            assert r.passed, r.line()


class TestLaws:
    def test_all_layer_laws_pass(self):
        results = equivariance_laws(trials=20, e2e_trials=0)
        assert len(results) == 7 and all(r.passed for r in results), format_report(results)

    def test_bias_injection_fails_named_law(self):
        results = {r.law: r for r in equivariance_laws(trials=5, test_bias=0.1 + 0.2j, e2e_trials=0)}
        assert not results["econv_equivariance"].passed
        assert results["conjugate_scaling"].passed

    def test_end_to_end_f64(self):
        r = end_to_end_invariance(trials=3, batch=2, precision="f64")
        assert r.passed, r.line()

    def test_formats(self):
        results = format_laws()
        assert all(r.passed for r in results), format_report(results)

    def test_report_line(self):
        line = LawResult("x", 3, 2e-7, 1e-6, 1, 0.5, "note").line()
        assert line.startswith("PASS") and "x" in line and "note" in line
        assert LawResult("x", 3, 2e-5, 1e-6, 1, 0.5).line().startswith("FAIL")


class TestHelpers:
    def test_random_scalar_range(self, rng):
        mags = [abs(random_scalar(rng)) for _ in range(500)]
        assert 0.1 <= min(mags) and max(mags) <= 10

    def test_relative_error(self):
        assert relative_error(np.array([1.0, 1.0]), np.array([1.0, 1.0])) == 0.0
        assert abs(relative_error(np.array([2.0]), np.array([1.0])) - 1.0) < 1e-15
