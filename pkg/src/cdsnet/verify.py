"""Property suites: co-domain symmetry laws, finite-difference gradients, format round trips.

Each law reports the worst error over its trials together with the seed of
the worst trial, so a failure can be replayed with ``default_rng([seed, trial])``.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import nn
from . import tensor as T
from .complex import (
    ComplexTensor,
    complex_conv2d,
    complex_scale,
    conj_mul,
    eq_maxpool,
    magnitude,
    phase,
)
from .encodings import reduce_average, reduce_binned, sliding_encode
from .errors import FormatError
from .layers import ComplexBatchNorm, ComplexHead, ConjugateLayer, CReLU, Econv, EqMaxPool, ResBlock
from .tensor import Tensor

__all__ = [
    "LawResult",
    "SUITES",
    "relative_error",
    "gradcheck",
    "run_suite",
    "equivariance_laws",
    "gradient_laws",
    "format_laws",
    "end_to_end_invariance",
    "random_scalar",
    "format_report",
]

FD_EPS = 1e-5
GRAD_TOL = 1e-6
LAW_TOL = 1e-5
E2E_TOL = 1e-3


@dataclass
class LawResult:
    law: str
    trials: int
    worst_error: float
    tolerance: float
    worst_seed: int
    seconds: float = 0.0
    note: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.worst_error <= self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.note})" if self.note else ""
        return (
            f"{status}  {self.law:<34} trials={self.trials:<4d} worst={self.worst_error:.3e} "
            f"tol={self.tolerance:.0e} seed={self.worst_seed} [{self.seconds:.1f}s]{extra}"
        )


def format_report(results: list) -> str:
    return "\n".join(r.line() for r in results)


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b||, or the absolute norm when ``b`` is zero."""
    a = np.asarray(a, dtype=np.complex128 if np.iscomplexobj(a) or np.iscomplexobj(b) else np.float64)
    b = np.asarray(b, dtype=a.dtype)
    num = np.linalg.norm((a - b).ravel())
    den = np.linalg.norm(b.ravel())
    return float(num / den) if den > 0 else float(num)


def random_scalar(rng: np.random.Generator, lo: float = 0.1, hi: float = 10.0) -> complex:
    """|s| log-uniform in [lo, hi], phase uniform."""
    r = np.exp(rng.uniform(np.log(lo), np.log(hi)))
    return complex(r * np.exp(1j * rng.uniform(0, 2 * np.pi)))


def _complex_input(rng, shape, dtype=np.float32, scale=1.0) -> ComplexTensor:
    return ComplexTensor(
        Tensor((scale * rng.standard_normal(shape)).astype(dtype)),
        Tensor((scale * rng.standard_normal(shape)).astype(dtype)),
    )


def _run_law(name, trials, seed, tol, trial_fn, note="") -> LawResult:
    t0 = time.perf_counter()
    worst, worst_seed = -1.0, seed
    with T.no_grad():
        for t in range(trials):
            err = trial_fn(np.random.default_rng([seed, t]))
            if err > worst:
                worst, worst_seed = err, t
    return LawResult(name, trials, worst, tol, worst_seed, time.perf_counter() - t0, note)


# --------------------------------------------------------------------------
# symmetry laws


def _econv_trial(test_bias):
    def trial(rng):
        groups = int(rng.choice([1, 2]))
        cin = groups * int(rng.integers(1, 4))
        cout = groups * int(rng.integers(1, 4))
        k = int(rng.choice([1, 3]))
        layer = Econv(cin, cout, k, groups=groups, rng=rng, test_bias=test_bias)
        x = _complex_input(rng, (2, cin, 6, 6))
        s = random_scalar(rng)
        return relative_error(layer(complex_scale(x, s)).numpy(), s * layer(x).numpy())

    return trial


def _conjugate_trial(rng):
    c = int(rng.integers(1, 5))
    layer = ConjugateLayer(c, rng=rng)
    x = _complex_input(rng, (2, c, 5, 5))
    s = random_scalar(rng)
    return relative_error(layer(complex_scale(x, s)).numpy(), abs(s) ** 2 * layer(x).numpy())


def _conjugate_phase_trial(rng):
    # phase of the output ignores a global rotation of the input
    c = int(rng.integers(1, 5))
    layer = ConjugateLayer(c, rng=rng)
    x = _complex_input(rng, (2, c, 5, 5))
    theta = rng.uniform(0, 2 * np.pi)
    a = layer(x).numpy()
    b = layer(complex_scale(x, np.exp(1j * theta))).numpy()
    keep = np.abs(a) > 1e-2 * np.abs(a).max()
    return float(np.max(np.abs(np.angle(b[keep] * np.conj(a[keep])))))


def _crelu_trial(rng):
    x = _complex_input(rng, (2, 3, 5, 5))
    alpha = float(np.exp(rng.uniform(np.log(0.1), np.log(10))))
    f = CReLU()
    return relative_error(f(complex_scale(x, alpha)).numpy(), alpha * f(x).numpy())


def _cbn_layer(rng, c):
    layer = ComplexBatchNorm(c)
    layer.log_gain.data = rng.normal(0, 0.3, c).astype(np.float32)
    layer.set_mode(nn.BATCH_STATS)
    return layer


def _cbn_scale_trial(rng):
    c = int(rng.integers(1, 6))
    layer = _cbn_layer(rng, c)
    x = _complex_input(rng, (3, c, 4, 4))
    alpha = float(np.exp(rng.uniform(np.log(0.1), np.log(10))))
    return relative_error(layer(complex_scale(x, alpha)).numpy(), layer(x).numpy())


def _cbn_phase_trial(rng):
    c = int(rng.integers(1, 6))
    layer = _cbn_layer(rng, c)
    x = _complex_input(rng, (3, c, 4, 4))
    u = np.exp(1j * rng.uniform(0, 2 * np.pi))
    return relative_error(layer(complex_scale(x, u)).numpy(), u * layer(x).numpy())


def _pool_trial(rng):
    window = int(rng.choice([2, 4]))
    x = _complex_input(rng, (2, 3, 8, 8))
    s = random_scalar(rng)
    a = eq_maxpool(complex_scale(x, s), window).numpy()
    b = s * eq_maxpool(x, window).numpy()
    return relative_error(a, b)


def end_to_end_invariance(
    trials: int = 50,
    seed: int = 0,
    batch: int = 16,
    precision: str = "f32",
    model=None,
    inputs: Optional[np.ndarray] = None,
) -> LawResult:
    """logits(s * x) == logits(x) for the CDS-Large network in batch-statistics mode.

    ``inputs`` defaults to random reflectances in [0, 1]; they are
    sliding-encoded and the complex scalar is applied to the encoded batch.
    """
    from .models import build_cds_large

    dtype = np.float64 if precision == "f64" else np.float32
    rng = np.random.default_rng([seed, 10**6])
    if model is None:
        model = build_cds_large(seed=seed, dtype=dtype)
    model.set_mode(nn.BATCH_STATS)
    if inputs is None:
        inputs = rng.uniform(0, 1, size=(batch, 8, 32, 32))
    z = sliding_encode(Tensor(np.asarray(inputs, dtype=dtype)))
    t0 = time.perf_counter()
    with T.no_grad():
        base = model(z).data
    worst, worst_seed = -1.0, 0
    with T.no_grad():
        for t in range(trials):
            s = random_scalar(np.random.default_rng([seed, t]))
            err = relative_error(model(complex_scale(z, s)).data, base)
            if err > worst:
                worst, worst_seed = err, t
    return LawResult(
        f"end_to_end_invariance[{precision}]",
        trials,
        worst,
        E2E_TOL,
        worst_seed,
        time.perf_counter() - t0,
        f"CDS-Large, batch {len(inputs)}, batch statistics",
    )


def equivariance_laws(trials: int = 200, seed: int = 0, test_bias: Optional[complex] = None, e2e_trials: int = 50, e2e_precision: str = "f64", e2e_batch: int = 8) -> list:
    results = [
        _run_law("econv_equivariance", trials, seed, LAW_TOL, _econv_trial(test_bias), "f(s x) = s f(x), |s| in [0.1, 10]"),
        _run_law("conjugate_scaling", trials, seed, LAW_TOL, _conjugate_trial, "f(s x) = |s|^2 f(x)"),
        _run_law("conjugate_phase_cancellation", trials, seed, LAW_TOL, _conjugate_phase_trial, "radians"),
        _run_law("crelu_positive_homogeneity", trials, seed, LAW_TOL, _crelu_trial, "f(a x) = a f(x), a > 0"),
        _run_law("cbn_scale_invariance", trials, seed, LAW_TOL, _cbn_scale_trial, "batch statistics"),
        _run_law("cbn_phase_equivariance", trials, seed, LAW_TOL, _cbn_phase_trial, "batch statistics"),
        _run_law("eqmaxpool_equivariance", trials, seed, LAW_TOL, _pool_trial, "f(s x) = s f(x)"),
    ]
    if e2e_trials:
        results.append(end_to_end_invariance(e2e_trials, seed, e2e_batch, e2e_precision))
    return results


# --------------------------------------------------------------------------
# finite-difference gradients


def _project(out, r):
    if isinstance(out, ComplexTensor):
        return float(np.sum(out.re.data * r[0]) + np.sum(out.im.data * r[1]))
    return float(np.sum(out.data * r))


def _projection_weights(out, rng):
    if isinstance(out, ComplexTensor):
        return rng.standard_normal(out.shape), rng.standard_normal(out.shape)
    return rng.standard_normal(out.shape)


def _seed_grad(out, r):
    if isinstance(out, ComplexTensor):
        loss = T.sum(out.re * Tensor(r[0], dtype=out.dtype)) + T.sum(out.im * Tensor(r[1], dtype=out.dtype))
    else:
        loss = T.sum(out * Tensor(r, dtype=out.dtype)) if out.ndim else out * float(r)
    T.backward(loss)


def gradcheck(
    forward: Callable[[], object],
    leaves: list,
    rng: np.random.Generator,
    eps: float = FD_EPS,
    max_coords: Optional[int] = None,
) -> tuple[float, int, int]:
    """Compare analytic and central-difference gradients of <forward(), R>.

    ``leaves`` are the tensors (inputs and parameters) the closure reads; their
    data is perturbed in place.  A coordinate whose +-eps evaluations switch a
    ReLU mask or a max selection straddles a kink and is excluded.  Returns
    (relative error over all kept coordinates, kept count, excluded count).
    With ``max_coords`` only that many random coordinates are differenced.
    """
    for leaf in leaves:
        leaf.grad = None
        leaf.requires_grad = True
    with T.activation_patterns() as base_pattern:
        out = forward()
    r = _projection_weights(out, rng)
    _seed_grad(out, r)
    analytic = [np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy() for leaf in leaves]

    coords = [(i, j) for i, leaf in enumerate(leaves) for j in range(leaf.data.size)]
    if max_coords is not None and len(coords) > max_coords:
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[p] for p in sorted(pick)]
    ga, gn, excluded = [], [], 0
    with T.no_grad():
        for i, j in coords:
            flat = leaves[i].data.reshape(-1)
            orig = flat[j]
            flat[j] = orig + eps
            with T.activation_patterns() as p_up:
                up = _project(forward(), r)
            flat[j] = orig - eps
            with T.activation_patterns() as p_down:
                down = _project(forward(), r)
            flat[j] = orig
            if p_up != base_pattern or p_down != base_pattern:
                excluded += 1
                continue
            ga.append(analytic[i].reshape(-1)[j])
            gn.append((up - down) / (2 * eps))
    ga, gn = np.array(ga), np.array(gn)
    den = max(np.linalg.norm(ga), np.linalg.norm(gn))
    err = float(np.linalg.norm(ga - gn) / den) if den > 1e-10 else float(np.linalg.norm(ga - gn))
    return err, len(ga), excluded


def _t(rng, shape, lo=None):
    x = rng.standard_normal(shape)
    if lo is not None:
        x = np.sign(x) * (np.abs(x) + lo)
    return Tensor(x, requires_grad=True, dtype=np.float64)


def _pos(rng, shape):
    return Tensor(rng.uniform(0.5, 2.0, shape), requires_grad=True, dtype=np.float64)


def _spaced(rng, shape):
    # distinct values so max-type selections sit far from ties
    n = int(np.prod(shape))
    return Tensor((rng.permutation(n) * 0.1 + rng.uniform(0, 0.01, n)).reshape(shape) - n * 0.05, requires_grad=True, dtype=np.float64)


def _ct(rng, shape):
    return ComplexTensor(_t(rng, shape), _t(rng, shape))


def _module_case(module, x_leaves, call, mode=nn.BATCH_STATS):
    module.astype(np.float64)
    module.set_mode(mode)
    return call, list(x_leaves) + module.parameters()


# Each case builder returns (forward closure, leaves, max_coords or None).
def _cases() -> dict:
    c = {}

    def binary(op, b_maker=_t):
        def make(rng):
            a, b = _t(rng, (3, 4)), b_maker(rng, (3, 4))
            return (lambda: op(a, b)), [a, b], None

        return make

    c["add"] = binary(T.add)
    c["sub"] = binary(T.sub)
    c["mul"] = binary(T.mul)
    c["div"] = binary(T.div, lambda rng, s: _t(rng, s, lo=0.5))

    def batch_add(rng):
        a, b = _t(rng, (3, 4)), _t(rng, (4,))
        return (lambda: a + b), [a, b], None

    c["add_batch_broadcast"] = batch_add

    def unary(op, maker=_t):
        def make(rng):
            a = maker(rng, (3, 4))
            return (lambda: op(a)), [a], None

        return make

    c["neg"] = unary(T.neg)
    c["relu"] = unary(T.relu, lambda rng, s: _t(rng, s, lo=0.05))
    c["exp"] = unary(T.exp)
    c["log"] = unary(T.log, _pos)
    c["sqrt"] = unary(T.sqrt, _pos)
    c["square"] = unary(T.square)
    c["sum"] = unary(lambda a: T.sum(a, axis=1))
    c["mean"] = unary(lambda a: T.mean(a, axis=0))
    c["max"] = unary(lambda a: T.max(a, axis=1), _spaced)
    c["reshape"] = unary(lambda a: T.reshape(a, (4, 3)))

    def shape_case(rng):
        a, b = _t(rng, (2, 3, 2, 2)), _t(rng, (2, 1, 2, 2))
        return (lambda: T.slice_channels(T.concat_channels([a, b]), 1, 4)), [a, b], None

    c["concat_slice_channels"] = shape_case

    def bcast(rng):
        a = _t(rng, (3, 1, 1))
        return (lambda: T.broadcast_to(a, (3, 2, 2))), [a], None

    c["broadcast_to"] = bcast

    def mm(rng):
        a, b = _t(rng, (3, 4)), _t(rng, (4, 2))
        return (lambda: T.matmul(a, b)), [a, b], None

    c["matmul"] = mm

    def conv(rng):
        x, w = _t(rng, (2, 4, 5, 5)), _t(rng, (6, 2, 3, 3))
        stride = int(rng.choice([1, 2]))
        return (lambda: T.conv2d(x, w, groups=2, stride=stride, padding=1)), [x, w], None

    c["conv2d"] = conv

    def mpool(rng):
        x = _spaced(rng, (2, 2, 4, 4))
        return (lambda: T.maxpool2d(x, 2)), [x], None

    c["maxpool2d"] = mpool

    def ce(rng):
        x = _t(rng, (5, 4))
        y = rng.integers(0, 4, 5)
        return (lambda: T.cross_entropy(x, y)), [x], None

    c["cross_entropy"] = ce

    # complex ops
    def cconv(rng):
        x, w = _ct(rng, (2, 4, 4, 4)), _ct(rng, (4, 2, 3, 3))
        return (lambda: complex_conv2d(x, w, groups=2, padding=1)), [x.re, x.im, w.re, w.im], None

    c["complex_conv2d"] = cconv

    def cmul(rng):
        x, y = _ct(rng, (2, 3, 2, 2)), _ct(rng, (2, 3, 2, 2))
        return (lambda: conj_mul(x, y)), [x.re, x.im, y.re, y.im], None

    c["conj_mul"] = cmul

    def cscale(rng):
        x = _ct(rng, (2, 3, 2, 2))
        s = random_scalar(rng)
        return (lambda: complex_scale(x, s)), [x.re, x.im], None

    c["complex_scale"] = cscale

    def cmag(rng):
        x = _ct(rng, (2, 3, 2, 2))
        return (lambda: magnitude(x)), [x.re, x.im], None

    c["magnitude"] = cmag

    def cphase(rng):
        x = _ct(rng, (2, 3, 2, 2))
        for part in (x.re, x.im):
            part.data = np.sign(part.data) * (np.abs(part.data) + 0.2)
        return (lambda: phase(x)), [x.re, x.im], None

    c["phase"] = cphase

    def cpool(rng):
        mag = _spaced(rng, (2, 2, 4, 4)).data
        mag = mag - mag.min() + 0.5
        th = rng.uniform(0, 2 * np.pi, mag.shape)
        x = ComplexTensor(Tensor(mag * np.cos(th), dtype=np.float64), Tensor(mag * np.sin(th), dtype=np.float64))
        return (lambda: eq_maxpool(x, 2)), [x.re, x.im], None

    c["eq_maxpool"] = cpool

    # CDS layers
    def layer(builder, shape, mode=nn.BATCH_STATS, max_coords=None):
        def make(rng):
            module = builder(rng)
            x = _ct(rng, shape)
            fwd, leaves = _module_case(module, [x.re, x.im], lambda: module(x), mode)
            return fwd, leaves, max_coords

        return make

    c["Econv"] = layer(lambda rng: Econv(4, 4, 3, groups=2, rng=rng), (2, 4, 4, 4))
    c["Econv_stride2_k1"] = layer(lambda rng: Econv(2, 4, 1, stride=2, rng=rng), (2, 2, 4, 4))
    c["ConjugateLayer"] = layer(lambda rng: ConjugateLayer(3, rng=rng), (2, 3, 3, 3))

    def cbn(rng):
        m = ComplexBatchNorm(3)
        m.log_gain.data = rng.normal(0, 0.3, 3).astype(np.float32)
        return m

    c["ComplexBatchNorm[batch]"] = layer(cbn, (3, 3, 3, 3))

    def cbn_running(rng):
        m = cbn(rng)
        m._buffers["running_ms"] = rng.uniform(0.5, 2.0, 3).astype(np.float32)
        return m

    c["ComplexBatchNorm[running]"] = layer(cbn_running, (3, 3, 3, 3), nn.RUNNING_STATS)
    c["CReLU"] = layer(lambda rng: CReLU(), (2, 3, 3, 3))
    c["ResBlock"] = layer(lambda rng: ResBlock(4, 2, hidden=4, rng=rng), (3, 4, 4, 4))

    def eqpool_layer(rng):
        m = EqMaxPool(2)
        mag = _spaced(rng, (2, 2, 4, 4)).data
        mag = mag - mag.min() + 0.5
        th = rng.uniform(0, 2 * np.pi, mag.shape)
        x = ComplexTensor(Tensor(mag * np.cos(th), dtype=np.float64), Tensor(mag * np.sin(th), dtype=np.float64))
        return (lambda: m(x)), [x.re, x.im], None

    c["EqMaxPool"] = eqpool_layer

    def head(rng):
        m = ComplexHead(3, 4, rng=rng)
        x = _ct(rng, (2, 3, 1, 1))
        fwd, leaves = _module_case(m, [x.re, x.im], lambda: m(x))
        return fwd, leaves, None

    c["ComplexHead"] = head

    # real layers
    def real_layer(builder, shape, maker=_t, mode=nn.BATCH_STATS):
        def make(rng):
            module = builder(rng)
            x = maker(rng, shape)
            fwd, leaves = _module_case(module, [x], lambda: module(x), mode)
            return fwd, leaves, None

        return make

    c["Conv2d"] = real_layer(lambda rng: nn.Conv2d(4, 2, 3, stride=2, padding=1, bias=True, rng=rng), (2, 4, 5, 5))

    def bn(rng):
        m = nn.BatchNorm2d(3)
        m.weight.data = rng.uniform(0.5, 1.5, m.weight.shape).astype(np.float32)
        m.bias.data = rng.normal(0, 0.1, m.bias.shape).astype(np.float32)
        return m

    c["BatchNorm2d[batch]"] = real_layer(bn, (3, 3, 3, 3))
    c["Linear"] = real_layer(lambda rng: nn.Linear(4, 3, rng=rng), (5, 4))
    c["GlobalAvgPool"] = real_layer(lambda rng: nn.GlobalAvgPool(), (2, 3, 4, 4))
    c["MaxPool2d"] = real_layer(lambda rng: nn.MaxPool2d(2), (2, 2, 4, 4), _spaced)

    def encoding(fn):
        def make(rng):
            x = _t(rng, (2, 8, 3, 3))
            return (lambda: fn(x)), [x], None

        return make

    c["sliding_encode"] = encoding(sliding_encode)
    c["reduce_average"] = encoding(reduce_average)
    c["reduce_binned"] = encoding(reduce_binned)

    # whole-model spot check with the loss attached
    def cds_model(rng):
        from .models import build_cds

        model = build_cds(input_channels=7, num_classes=4, width_multiplier=1 / 16, seed=int(rng.integers(1 << 30)), dtype=np.float64)
        model.set_mode(nn.BATCH_STATS)
        x = Tensor(rng.uniform(0, 1, (3, 8, 32, 32)), dtype=np.float64)
        y = rng.integers(0, 4, 3)
        return (lambda: T.cross_entropy(model(sliding_encode(x)), y)), [x] + model.parameters(), 40

    c["cds_network+cross_entropy"] = cds_model
    return c


def gradient_laws(instances: int = 20, seed: int = 0, names: Optional[list] = None) -> list:
    """Finite-difference check of every op, layer and the loss in f64.

    Instances where more than 5% of the differenced coordinates straddle a
    kink are redrawn; excluded coordinates and redraws are reported.
    """
    results = []
    cases = _cases()
    for name in names or list(cases):
        make = cases[name]
        t0 = time.perf_counter()
        worst, worst_seed, redrawn, skipped = -1.0, 0, 0, 0
        for i in range(instances):
            for attempt in range(20):
                rng = np.random.default_rng([seed, i, attempt])
                fwd, leaves, max_coords = make(rng)
                err, kept, excluded = gradcheck(fwd, leaves, rng, max_coords=max_coords)
                if excluded <= 0.05 * (kept + excluded):
                    break
                redrawn += 1
            skipped += excluded
            if err > worst:
                worst, worst_seed = err, i
        notes = []
        if skipped:
            notes.append(f"{skipped} kink-straddling coords excluded")
        if redrawn:
            notes.append(f"{redrawn} instances redrawn")
        results.append(LawResult(f"grad:{name}", instances, worst, GRAD_TOL, worst_seed, time.perf_counter() - t0, ", ".join(notes)))
    return results


# --------------------------------------------------------------------------
# formats


def _law_bool(name, ok: bool, note: str = "", seconds: float = 0.0) -> LawResult:
    return LawResult(name, 1, 0.0 if ok else 1.0, 0.0, 0, seconds, note)


def format_laws(seed: int = 0) -> list:
    from .data import DatasetManifest, ChipDataset, load_dataset, read_msc, save_dataset, write_msc
    from .models import ModelConfig, build_model, load_checkpoint, model_forward, save_checkpoint

    rng = np.random.default_rng(seed)
    results = []
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        px = rng.uniform(0, 1, (5, 8, 32, 32)).astype(np.float32)
        lb = rng.integers(0, 10, 5)
        write_msc(tmp / "a.msc", px, lb)
        px2, lb2 = read_msc(tmp / "a.msc")
        results.append(_law_bool("msc_roundtrip_bitwise", px2.tobytes() == px.tobytes() and np.array_equal(lb, lb2)))

        raw = (tmp / "a.msc").read_bytes()
        rec = 2 + 4 * 8 * 32 * 32
        (tmp / "t.msc").write_bytes(raw[: 16 + 2 * rec + 7])
        try:
            read_msc(tmp / "t.msc")
            ok, note = False, "no error raised"
        except FormatError as exc:
            ok, note = exc.offset == 16 + 2 * rec, f"offset {exc.offset}"
        results.append(_law_bool("msc_truncation_detected", ok, note))

        (tmp / "m.msc").write_bytes(b"MSCHIP02" + raw[8:])
        try:
            read_msc(tmp / "m.msc")
            ok = False
        except FormatError as exc:
            ok = exc.offset is not None
        results.append(_law_bool("msc_version_mismatch_detected", ok))

        manifest = DatasetManifest(class_names=[f"c{i}" for i in range(10)], class_counts={}, seed=seed)
        ds = ChipDataset({"train": px, "val": px[:2]}, {"train": lb, "val": lb[:2]}, manifest)
        save_dataset(tmp / "ds", ds)
        back = load_dataset(tmp / "ds")
        same = back.manifest.to_json() == ds.manifest.to_json() and all(
            back.pixels[s].tobytes() == ds.pixels[s].tobytes() for s in ("train", "val")
        )
        results.append(_law_bool("dataset_manifest_roundtrip", same))

        cfg = ModelConfig.from_spec("cds-small", seed=seed)
        model = build_model(cfg)
        save_checkpoint(tmp / "m.ckpt", model)
        loaded = load_checkpoint(tmp / "m.ckpt")
        model.set_mode(nn.BATCH_STATS)
        loaded.set_mode(nn.BATCH_STATS)
        with T.no_grad():
            a = model_forward(model, px[:2]).data
            b = model_forward(loaded, px[:2]).data
        results.append(_law_bool("checkpoint_roundtrip_bitwise", a.tobytes() == b.tobytes()))

        blob = (tmp / "m.ckpt").read_bytes()
        (tmp / "bad.ckpt").write_bytes(blob[:-3])
        try:
            load_checkpoint(tmp / "bad.ckpt")
            ok = False
        except FormatError as exc:
            ok = exc.offset is not None
        results.append(_law_bool("checkpoint_truncation_detected", ok))
    return results


SUITES = ("equivariance", "gradients", "formats", "all")


def run_suite(
    suite: str, seed: int = 0, test_bias: Optional[complex] = None, trials: int = 200, instances: int = 20, e2e_trials: int = 50
) -> list:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITES}")
    results = []
    if suite in ("equivariance", "all"):
        results += equivariance_laws(trials, seed, test_bias, e2e_trials=e2e_trials)
    if suite in ("gradients", "all"):
        results += gradient_laws(instances, seed)
    if suite in ("formats", "all"):
        results += format_laws(seed)
    return results
