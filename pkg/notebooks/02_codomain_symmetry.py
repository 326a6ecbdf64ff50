"""
Co-domain symmetry, layer by layer
==================================

Multiplying an input by a complex scalar s changes its overall magnitude and
rotates its global phase.  Each CDS layer has a fixed response to that
change, and chaining them makes the logits of CDS-Large independent of s.
"""

import numpy as np

from cdsnet import nn
from cdsnet.complex import ComplexTensor, complex_scale
from cdsnet.encodings import sliding_encode
from cdsnet.layers import ComplexBatchNorm, ConjugateLayer, CReLU, Econv, EqMaxPool
from cdsnet.models import build_cds_large, parameter_count
from cdsnet.tensor import no_grad

rng = np.random.default_rng(0)
x = ComplexTensor.from_numpy(rng.standard_normal((2, 4, 8, 8)) + 1j * rng.standard_normal((2, 4, 8, 8)))
s = 3.0 * np.exp(1.1j)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


###############################################################################
# Equivariant layers carry s through
# ----------------------------------

econv = Econv(4, 6, rng=rng)
pool = EqMaxPool(2)
print("Econv     f(sx) vs s f(x):", rel(econv(complex_scale(x, s)).numpy(), s * econv(x).numpy()))
print("EqMaxPool f(sx) vs s f(x):", rel(pool(complex_scale(x, s)).numpy(), s * pool(x).numpy()))

###############################################################################
# The conjugate layer turns s into |s|^2
# --------------------------------------
# It multiplies the features by the conjugate of a 1x1 equivariant map of
# themselves, so the phase of s cancels.

conj = ConjugateLayer(4, rng=rng)
print("conjugate f(sx) vs |s|^2 f(x):", rel(conj(complex_scale(x, s)).numpy(), abs(s) ** 2 * conj(x).numpy()))

###############################################################################
# Radial batch norm removes the remaining positive scale
# ------------------------------------------------------

bn = ComplexBatchNorm(4).set_mode(nn.BATCH_STATS)
print("CBN f(a x) vs f(x), a = 9:", rel(bn(complex_scale(x, 9.0)).numpy(), bn(x).numpy()))
print("CReLU f(a x) vs a f(x):   ", rel(CReLU()(complex_scale(x, 9.0)).numpy(), 9.0 * CReLU()(x).numpy()))

###############################################################################
# The whole network
# -----------------
# CDS-Large in double precision, batch statistics, random reflectances.

model = build_cds_large(dtype=np.float64).set_mode(nn.BATCH_STATS)
print("CDS-Large parameters:", parameter_count(model))
z = sliding_encode(rng.uniform(0, 1, (4, 8, 32, 32)))
with no_grad():
    base = model(z).data
    for s in (0.1, 2j, 7 - 3j):
        print(f"s = {s!s:>8}: logits rel. change", rel(model(complex_scale(z, s)).data, base))

###############################################################################
# The same check runs from the command line as part of the release gate::
#
#     cdsnet verify --suite equivariance
