import json

import numpy as np
import pytest

from cdsnet.data import (
    MSC_MAGIC,
    ChipDataset,
    DatasetManifest,
    DeriveConfig,
    chip_window,
    derive_chips,
    generate_synthetic,
    geometric_counts,
    iterate_batches,
    load_dataset,
    load_scenes,
    normalize,
    read_msc,
    resize_bilinear,
    save_dataset,
    split_counts,
    write_msc,
)
from cdsnet.errors import ContractError, DataError, FormatError
from oracles import make_scene


def tiny(rng, n=5, labels=None):
    px = rng.random((n, 8, 32, 32)).astype(np.float32)
    lb = np.arange(n) % 3 if labels is None else labels
    return px, lb


class TestMSC:
    def test_round_trip_bitwise(self, tmp_path, rng):
        px, lb = tiny(rng)
        write_msc(tmp_path / "a.msc", px, lb)
        px2, lb2 = read_msc(tmp_path / "a.msc")
        assert px2.tobytes() == px.tobytes()
        np.testing.assert_array_equal(lb2, lb)

    def test_layout(self, tmp_path, rng):
        px, lb = tiny(rng, n=2)
        write_msc(tmp_path / "a.msc", px, lb)
        raw = (tmp_path / "a.msc").read_bytes()
        assert raw[:8] == MSC_MAGIC
        assert int.from_bytes(raw[8:12], "little") == 2
        assert int.from_bytes(raw[12:14], "little") == 8
        assert int.from_bytes(raw[14:16], "little") == 32
        rec = 2 + 4 * 8 * 32 * 32
        assert len(raw) == 16 + 2 * rec
        assert int.from_bytes(raw[16:18], "little") == lb[0]
        np.testing.assert_array_equal(np.frombuffer(raw[18 : 18 + 4 * 8 * 1024], "<f4"), px[0].ravel())

    def test_truncation_offset(self, tmp_path, rng):
        px, lb = tiny(rng, n=3)
        path = tmp_path / "a.msc"
        write_msc(path, px, lb)
        rec = 2 + 4 * 8 * 32 * 32
        path.write_bytes(path.read_bytes()[: 16 + 2 * rec + 100])
        with pytest.raises(FormatError) as info:
            read_msc(path)
        assert info.value.offset == 16 + 2 * rec

    def test_version_mismatch(self, tmp_path, rng):
        px, lb = tiny(rng, n=1)
        path = tmp_path / "a.msc"
        write_msc(path, px, lb)
        path.write_bytes(b"MSCHIP02" + path.read_bytes()[8:])
        with pytest.raises(FormatError, match="version") as info:
            read_msc(path)
        assert info.value.offset == 6

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "a.msc"
        path.write_bytes(b"GARBAGE!" + bytes(8))
        with pytest.raises(FormatError) as info:
            read_msc(path)
        assert info.value.offset == 0

    def test_trailing_bytes(self, tmp_path, rng):
        px, lb = tiny(rng, n=1)
        path = tmp_path / "a.msc"
        write_msc(path, px, lb)
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(FormatError):
            read_msc(path)


class TestDatasetIO:
    def test_save_load_round_trip(self, tmp_path):
        ds = generate_synthetic(head_count=40, imbalance_ratio=4, seed=1)
        save_dataset(tmp_path, ds)
        back = load_dataset(tmp_path)
        for split in ("train", "val", "test"):
            assert back.pixels[split].tobytes() == ds.pixels[split].tobytes()
            np.testing.assert_array_equal(back.labels[split], ds.labels[split])
        assert back.manifest == ds.manifest

    def test_manifest_counts_checked_on_load(self, tmp_path):
        ds = generate_synthetic(head_count=20, imbalance_ratio=2, seed=1)
        save_dataset(tmp_path, ds)
        m = json.loads((tmp_path / "manifest.json").read_text())
        m["class_counts"]["train"][0] += 1
        (tmp_path / "manifest.json").write_text(json.dumps(m))
        with pytest.raises(DataError):
            load_dataset(tmp_path)

    def test_malformed_manifest(self):
        with pytest.raises(DataError):
            DatasetManifest.from_dict({"class_names": ["a"]})

    def test_divisor_must_be_positive(self):
        with pytest.raises(ContractError):
            DatasetManifest(class_names=["a"], class_counts={}, normalization_divisor=0)

    def test_validate_range(self, rng):
        px, lb = tiny(rng)
        px[0, 0, 0, 0] = 1.5
        ds = ChipDataset({"train": px}, {"train": lb}, DatasetManifest(["a", "b", "c"], {}))
        with pytest.raises(DataError):
            ds.validate()


class TestBatches:
    def _ds(self, rng, n):
        px, lb = tiny(rng, n)
        return ChipDataset({"train": px}, {"train": lb}, DatasetManifest(["a", "b", "c"], {}))

    def test_partial_last_batch(self, rng):
        sizes = [len(b[1]) for b in iterate_batches(self._ds(rng, 35), "train", 16)]
        assert sizes == [16, 16, 3]

    def test_shuffle_deterministic_per_epoch(self, rng):
        ds = self._ds(rng, 35)
        order = lambda e: np.concatenate([b[1] for b in iterate_batches(ds, "train", 16, shuffle_seed=3, epoch=e)])  # noqa: E731
        first = [b[0] for b in iterate_batches(ds, "train", 35, shuffle_seed=3, epoch=0)][0]
        again = [b[0] for b in iterate_batches(ds, "train", 35, shuffle_seed=3, epoch=0)][0]
        other = [b[0] for b in iterate_batches(ds, "train", 35, shuffle_seed=3, epoch=1)][0]
        assert first.tobytes() == again.tobytes()
        assert first.tobytes() != other.tobytes()
        assert sorted(order(0)) == sorted(ds.labels["train"])

    def test_missing_split(self, rng):
        with pytest.raises(DataError):
            next(iterate_batches(self._ds(rng, 3), "val", 2))


class TestChipArithmetic:
    def test_window_side(self):
        assert chip_window((100, 50, 20, 14))[2] == 30
        assert chip_window((0, 0, 7, 31))[2] == 41

    def test_window_centred(self):
        x0, y0, side = chip_window((10, 20, 20, 10))
        assert (x0 + side / 2, y0 + side / 2) == (20, 25)

    def test_normalization(self):
        np.testing.assert_array_equal(normalize(np.array([0.0, 3169.0, 6338.0, 9000.0])), [0, 0.5, 1, 1])

    def test_split_counts_reference(self):
        assert split_counts(22701) == (20431, 2270)

    def test_resize_constant_and_identity(self, rng):
        np.testing.assert_allclose(resize_bilinear(np.full((8, 17, 23), 0.4), 32), 0.4, rtol=1e-6)
        img = rng.random((8, 32, 32))
        np.testing.assert_allclose(resize_bilinear(img, 32), img, rtol=1e-6)

    def test_resize_linear(self, rng):
        a, b = rng.random((2, 8, 20, 20))
        np.testing.assert_allclose(resize_bilinear(2 * a + b), 2 * resize_bilinear(a) + resize_bilinear(b), rtol=1e-5, atol=1e-6)


class TestDerive:
    def test_native_size_chip_is_scaled_crop(self, rng):
        scene, anns = make_scene(rng, [1])
        ds = derive_chips({"s0": scene}, [dict(anns[0], pool="test")])
        x0, y0, side = chip_window(anns[0]["box"])
        assert side == 32
        expected = np.clip(scene[:, y0 : y0 + 32, x0 : x0 + 32] / 6338.0, 0, 1)
        np.testing.assert_allclose(ds.pixels["test"][0], expected, rtol=1e-6, atol=1e-7)

    def test_cap_and_stratified_split(self, rng):
        scene, anns = make_scene(rng, [30, 12, 5], box=(10, 14))
        ds = derive_chips({"s0": scene}, anns, DeriveConfig(class_cap=20, seed=3))
        ds.validate()
        tr, va = ds.counts("train"), ds.counts("val")
        np.testing.assert_array_equal((tr + va)[:3], [20, 12, 5])
        np.testing.assert_array_equal(va[:3], [2, 1, 1])  # round half up
        assert ds.pixels["train"].shape[1:] == (8, 32, 32)

    def test_bad_records_skipped(self, rng):
        scene, anns = make_scene(rng, [3])
        bad = [
            {"scene": "missing", "box": [0, 0, 5, 5], "label": 0},
            {"scene": "s0", "box": [0, 0, 5, 5], "label": 0},  # window runs off the scene
            {"scene": "s0", "box": [5, 5, 0, 5], "label": 0},
            {"scene": "s0", "box": [5, 5, 5, 5], "label": "NotAClass"},
        ]
        ds = derive_chips({"s0": scene}, anns + bad)
        assert sum(ds.manifest.class_counts["train"]) + sum(ds.manifest.class_counts["val"]) == 3
        assert sum(ds.manifest.provenance["skipped"].values()) == 4

    def test_label_by_name(self, rng):
        scene, anns = make_scene(rng, [1])
        ds = derive_chips({"s0": scene}, [dict(anns[0], label="Pylon", pool="test")])
        assert ds.labels["test"][0] == 2

    def test_nothing_derived(self):
        with pytest.raises(DataError):
            derive_chips({}, [{"scene": "x", "box": [0, 0, 1, 1], "label": 0}])

    def test_load_scenes(self, tmp_path, rng):
        scene, anns = make_scene(rng, [2])
        np.save(tmp_path / "s0.npy", scene)
        (tmp_path / "job.json").write_text(json.dumps({"scenes": {"s0": "s0.npy"}, "annotations": anns}))
        scenes, loaded, _ = load_scenes(tmp_path / "job.json")
        np.testing.assert_array_equal(scenes["s0"], scene)
        assert loaded == anns


class TestSynthetic:
    def test_geometric_tail(self):
        counts = geometric_counts(10, 5000, 60)
        assert counts[0] == 5000 and counts[-1] == 83

    def test_ratio_one_balanced(self):
        assert len(set(geometric_counts(10, 50, 1))) == 1

    def test_pool_counts_follow_formula(self):
        ds = generate_synthetic(head_count=60, imbalance_ratio=6, seed=2)
        expected = geometric_counts(10, 60, 6)
        np.testing.assert_array_equal(ds.counts("train") + ds.counts("val"), expected)
        np.testing.assert_array_equal(ds.counts("test"), geometric_counts(10, 15, 6))

    def test_deterministic(self):
        a = generate_synthetic(head_count=20, imbalance_ratio=2, seed=9)
        b = generate_synthetic(head_count=20, imbalance_ratio=2, seed=9)
        for s in a.splits:
            assert a.pixels[s].tobytes() == b.pixels[s].tobytes()

    def test_pairs_differ_only_in_infrared_bands(self):
        sigs = np.array(generate_synthetic(head_count=10, imbalance_ratio=1, seed=0).manifest.provenance["signatures"])
        for j in range(0, 10, 2):
            np.testing.assert_array_equal(sigs[j, :5], sigs[j + 1, :5])
            assert np.abs(sigs[j, 5:] - sigs[j + 1, 5:]).min() > 0.05

    def test_chip_invariants(self):
        ds = generate_synthetic(head_count=30, imbalance_ratio=3, seed=4)
        ds.validate()
        assert ds.pixels["train"].dtype == np.float32

    def test_invalid_arguments(self):
        with pytest.raises(ContractError):
            generate_synthetic(num_classes=1)
        with pytest.raises(ContractError):
            generate_synthetic(imbalance_ratio=0.5)


def test_empty_split_round_trip(tmp_path):
    write_msc(tmp_path / "e.msc", np.zeros((0, 8, 32, 32), np.float32), np.zeros(0, np.int64))
    px, lb = read_msc(tmp_path / "e.msc")
    assert px.shape == (0, 8, 32, 32) and lb.shape == (0,)
