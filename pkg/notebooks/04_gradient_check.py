"""
Checking gradients with central differences
===========================================

Every op in the autodiff engine is checked against a two-sided finite
difference in double precision.  ReLU and max-type ops have kinks; a
coordinate whose perturbation flips an activation pattern has no
meaningful finite difference, so it is excluded and counted.
"""

import numpy as np

from cdsnet import tensor as T
from cdsnet.tensor import Tensor
from cdsnet.verify import format_report, gradcheck, gradient_laws

rng = np.random.default_rng(0)

###############################################################################
# A smooth composite
# ------------------

a = Tensor(rng.uniform(0.5, 2, (3, 4)), requires_grad=True, dtype=np.float64)
b = Tensor(rng.uniform(0.5, 2, (3, 4)), requires_grad=True, dtype=np.float64)
err, kept, excluded = gradcheck(lambda: T.log(a * b + 1.0) / T.sqrt(b), [a, b], rng)
print(f"composite: rel. error {err:.2e} over {kept} coordinates")

###############################################################################
# A kink
# ------
# The third entry sits 3e-6 from zero, inside the 1e-5 difference step.

x = Tensor(np.array([[1.0, -2.0, 3e-6]]), requires_grad=True, dtype=np.float64)
err, kept, excluded = gradcheck(lambda: T.relu(x), [x], rng)
print(f"relu: rel. error {err:.2e}, kept {kept}, excluded {excluded}")

###############################################################################
# A planted bug
# -------------
# An op whose backward is off by half a percent is caught at once.

bad = lambda t: T._make(t.data**2, (t,), lambda g: (2.01 * g * t.data,))  # noqa: E731
err, _, _ = gradcheck(lambda: bad(a), [a], rng)
print(f"wrong square: rel. error {err:.2e}")

###############################################################################
# Library cases
# -------------
# The full suite (``cdsnet verify --suite gradients``) covers every op and
# layer; two instances of a few cases are shown here.

print(format_report(gradient_laws(instances=2, names=["complex_conv2d", "ResBlock", "cross_entropy"])))
