import numpy as np
import pytest

from cdsnet import nn
from cdsnet.complex import ComplexTensor
from cdsnet.errors import ContractError, FormatError
from cdsnet.layers import Econv
from cdsnet.models import (
    CDS_SMALL_WIDTH,
    ModelConfig,
    build_cds_large,
    build_model,
    load_checkpoint,
    model_forward,
    parameter_count,
    read_checkpoint,
    save_checkpoint,
)

# (layer type, out shape) per row of the CDS-Large table, 7-channel input
TABLE = [
    ("Econv", (64, 32, 32)),
    ("ConjugateLayer", (64, 32, 32)),
    ("Econv", (64, 32, 32)),
    ("ComplexBatchNorm", (64, 32, 32)),
    ("CReLU", (64, 32, 32)),
    ("Econv", (128, 32, 32)),
    ("ComplexBatchNorm", (128, 32, 32)),
    ("CReLU", (128, 32, 32)),
    ("EqMaxPool", (128, 16, 16)),
    ("ResBlock", (128, 16, 16)),
    ("Econv", (256, 16, 16)),
    ("ComplexBatchNorm", (256, 16, 16)),
    ("CReLU", (256, 16, 16)),
    ("EqMaxPool", (256, 8, 8)),
    ("Econv", (512, 8, 8)),
    ("ComplexBatchNorm", (512, 8, 8)),
    ("CReLU", (512, 8, 8)),
    ("EqMaxPool", (512, 4, 4)),
    ("ResBlock", (512, 4, 4)),
    ("EqMaxPool", (512, 1, 1)),
    ("ComplexHead", (10,)),
]


@pytest.fixture(scope="module")
def cds_large():
    return build_cds_large().set_mode(nn.BATCH_STATS)


class TestCDSLarge:
    def test_shape_trace_matches_table(self, cds_large):
        x = ComplexTensor(np.random.default_rng(0).random((2, 7, 32, 32)).astype(np.float32))
        rows = cds_large.trace(x)
        assert [(r[1], r[3][1:]) for r in rows] == TABLE
        assert rows[0][2] == (2, 7, 32, 32)

    def test_parameter_count_near_reference(self, cds_large):
        assert abs(parameter_count(cds_large) - 1.75e6) / 1.75e6 <= 0.10

    def test_grouped_econv_param_formula(self, cds_large):
        econv3 = cds_large.econv3
        assert parameter_count(econv3) == 2 * 128 * 32 * 3 * 3 == 73728

    def test_fc_param_count(self, cds_large):
        assert parameter_count(cds_large.fc) == 10250

    def test_all_convs_stride_one_same_padding(self, cds_large):
        for _, m in _modules(cds_large):
            if isinstance(m, Econv):
                assert m.stride == 1 and m.padding == m.kernel_size // 2


def _modules(module, prefix=""):
    for name, child in module.children():
        yield prefix + name, child
        yield from _modules(child, prefix + name + ".")


class TestConfig:
    def test_cds_small_defaults(self):
        cfg = ModelConfig.from_spec("cds-small")
        assert cfg.width_multiplier == CDS_SMALL_WIDTH
        n = parameter_count(build_model(cfg))
        assert 40_000 < n < 90_000

    def test_baseline_spec(self):
        cfg = ModelConfig.from_spec("baseline:binned-average")
        assert cfg.architecture == "baseline-cnn" and cfg.stem == "binned-average"

    @pytest.mark.parametrize(
        "kw",
        [
            dict(architecture="cds-large", stem="average"),
            dict(architecture="baseline-cnn", stem="none"),
            dict(architecture="resnet"),
            dict(width_multiplier=0),
        ],
    )
    def test_invalid_combinations(self, kw):
        with pytest.raises(ContractError):
            ModelConfig(**kw)

    def test_dict_round_trip(self):
        cfg = ModelConfig.from_spec("cds-small", seed=3)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


STEMS = ["conv1x1", "8band", "deep-8band", "average", "binned-average"]


class TestBaselines:
    @pytest.mark.parametrize("stem", STEMS)
    def test_logit_shape(self, rng, stem):
        model = build_model(ModelConfig(architecture="baseline-cnn", stem=stem)).set_mode(nn.BATCH_STATS)
        out = model_forward(model, rng.random((2, 8, 32, 32)).astype(np.float32))
        assert out.shape == (2, 10)

    def test_8band_stem_geometry(self):
        conv = build_model(ModelConfig(architecture="baseline-cnn", stem="8band")).stem_conv
        assert (conv.kernel_size, conv.stride, conv.padding) == (7, 2, 3)
        assert conv.weight.shape[1] == 8

    def test_deep_stem_has_three_k3_convs(self):
        model = build_model(ModelConfig(architecture="baseline-cnn", stem="deep-8band"))
        convs = [m for n, m in model.layers if n.startswith("stem") and isinstance(m, nn.Conv2d)]
        assert len(convs) == 3
        assert all(c.kernel_size == 3 for c in convs)
        assert convs[0].stride == 2
        between = [type(m).__name__ for n, m in model.layers if n.startswith("stem")]
        assert between == ["Conv2d", "BatchNorm2d", "ReLU", "Conv2d", "BatchNorm2d", "ReLU", "Conv2d"]

    def test_average_stem_permutation_invariant(self, rng):
        model = build_model(ModelConfig(architecture="baseline-cnn", stem="average")).set_mode(nn.BATCH_STATS)
        x = rng.random((2, 8, 32, 32)).astype(np.float32)
        a = model_forward(model, x).data
        b = model_forward(model, x[:, rng.permutation(8)]).data
        np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)


class TestCheckpoint:
    def test_round_trip_bitwise_forward(self, tmp_path, rng):
        model = build_model(ModelConfig.from_spec("cds-small", seed=5))
        model.set_mode(nn.RUNNING_STATS)
        x = rng.random((3, 8, 32, 32)).astype(np.float32)
        save_checkpoint(tmp_path / "m.ckpt", model, extra={"step": 7})
        loaded = load_checkpoint(tmp_path / "m.ckpt").set_mode(nn.RUNNING_STATS)
        assert loaded.checkpoint_extra == {"step": 7}
        assert model_forward(model, x).data.tobytes() == model_forward(loaded, x).data.tobytes()

    def test_buffers_survive(self, tmp_path):
        model = build_model(ModelConfig.from_spec("cds-small"))
        model.cbn2._buffers["running_ms"][...] = 3.5
        save_checkpoint(tmp_path / "m.ckpt", model)
        np.testing.assert_array_equal(load_checkpoint(tmp_path / "m.ckpt").cbn2._buffers["running_ms"], 3.5)

    def test_truncation_reports_offset(self, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, build_model(ModelConfig.from_spec("cds-small")))
        raw = path.read_bytes()
        path.write_bytes(raw[:-10])
        with pytest.raises(FormatError) as info:
            read_checkpoint(path)
        assert info.value.offset is not None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ckpt"
        path.write_bytes(b"NOTACKPT" + bytes(8))
        with pytest.raises(FormatError) as info:
            read_checkpoint(path)
        assert info.value.offset == 0

    def test_needs_config(self, tmp_path):
        with pytest.raises(ContractError):
            save_checkpoint(tmp_path / "x", build_cds_large())
