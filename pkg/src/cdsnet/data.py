"""Chip datasets: derivation from scenes, the MSC1 container, and a synthetic generator.

MSC1 layout (little-endian)::

    8 bytes   magic "MSCHIP01"
    u32       record count
    u16       channels
    u16       side
    records   u16 label, channels*side*side f32

The manifest lives next to the split files as ``manifest.json``.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from .encodings import BAND_ORDER
from .errors import ContractError, DataError, FormatError

__all__ = [
    "CLASS_NAMES",
    "NORMALIZATION_DIVISOR",
    "CHIP_SIDE",
    "BOX_PADDING",
    "CLASS_CAP",
    "VAL_FRACTION",
    "MSC_MAGIC",
    "DatasetManifest",
    "ChipDataset",
    "DeriveConfig",
    "SpectralClassSpec",
    "write_msc",
    "read_msc",
    "save_dataset",
    "load_dataset",
    "iterate_batches",
    "chip_window",
    "normalize",
    "resize_bilinear",
    "cap_per_class",
    "stratified_split",
    "split_counts",
    "derive_chips",
    "load_scenes",
    "geometric_counts",
    "synthetic_class_specs",
    "generate_synthetic",
]

log = logging.getLogger(__name__)

CLASS_NAMES = (
    "StorageTank",
    "Helicopter",
    "Pylon",
    "MaritimeVessel",
    "ShippingContainer",
    "FixedWingAircraft",
    "PassengerVehicle",
    "Truck",
    "RailwayVehicle",
    "EngineeringVehicle",
)
NORMALIZATION_DIVISOR = 6338.0
CHIP_SIDE = 32
BOX_PADDING = 5
CLASS_CAP = 5000
VAL_FRACTION = 0.1
SPLITS = ("train", "val", "test")

MSC_MAGIC = b"MSCHIP01"
_HEADER = struct.Struct("<8sIHH")


@dataclass
class DatasetManifest:
    class_names: list
    class_counts: dict
    band_order: list = field(default_factory=lambda: list(BAND_ORDER))
    normalization_divisor: float = NORMALIZATION_DIVISOR
    seed: int = 0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.normalization_divisor <= 0:
            raise ContractError(f"normalization_divisor must be positive, got {self.normalization_divisor}")

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        try:
            return cls(
                class_names=list(d["class_names"]),
                class_counts={k: [int(v) for v in vals] for k, vals in d["class_counts"].items()},
                band_order=list(d.get("band_order", BAND_ORDER)),
                normalization_divisor=float(d.get("normalization_divisor", NORMALIZATION_DIVISOR)),
                seed=int(d.get("seed", 0)),
                provenance=dict(d.get("provenance", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed manifest: {exc}") from exc


@dataclass
class ChipDataset:
    """Per split: ``pixels`` f32 [n, bands, side, side] in [0, 1] and ``labels`` int64 [n]."""

    pixels: dict
    labels: dict
    manifest: DatasetManifest
    source_ids: dict = field(default_factory=dict)

    def __post_init__(self):
        for split in self.pixels:
            px, lb = self.pixels[split], self.labels[split]
            if px.ndim != 4 or len(px) != len(lb):
                raise DataError(f"split {split!r}: pixels {px.shape} vs labels {lb.shape}")

    @property
    def splits(self) -> list:
        return [s for s in SPLITS if s in self.pixels] + [s for s in self.pixels if s not in SPLITS]

    def counts(self, split: str) -> np.ndarray:
        return np.bincount(self.labels[split], minlength=self.manifest.num_classes)

    def refresh_counts(self) -> None:
        self.manifest.class_counts = {s: self.counts(s).tolist() for s in self.splits}

    def validate(self) -> None:
        """Check range, shape and label invariants of every chip."""
        k = self.manifest.num_classes
        for split in self.splits:
            px, lb = self.pixels[split], self.labels[split]
            if px.size and (px.min() < 0 or px.max() > 1):
                raise DataError(f"split {split!r}: pixel values outside [0, 1]")
            if lb.size and (lb.min() < 0 or lb.max() >= k):
                raise DataError(f"split {split!r}: labels outside [0, {k})")
            if px.shape[1] != len(self.manifest.band_order):
                raise DataError(f"split {split!r}: {px.shape[1]} bands but manifest lists {len(self.manifest.band_order)}")
            if self.manifest.class_counts.get(split) is not None and list(self.counts(split)) != list(self.manifest.class_counts[split]):
                raise DataError(f"split {split!r}: manifest counts disagree with records")


# --------------------------------------------------------------------------
# MSC1 container


def write_msc(path, pixels: np.ndarray, labels: np.ndarray) -> None:
    pixels = np.asarray(pixels)
    labels = np.asarray(labels)
    if pixels.ndim != 4 or pixels.shape[2] != pixels.shape[3]:
        raise DataError(f"MSC1 needs square [n, C, side, side] chips, got {pixels.shape}")
    n, c, side, _ = pixels.shape
    if len(labels) != n:
        raise DataError(f"{n} chips but {len(labels)} labels")
    if n and (labels.min() < 0 or labels.max() > 0xFFFF):
        raise DataError("labels must fit in u16")
    rec = np.empty(n, dtype=np.dtype([("label", "<u2"), ("px", "<f4", (c * side * side,))]))
    rec["label"] = labels
    rec["px"] = pixels.reshape(n, c * side * side)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MSC_MAGIC, n, c, side))
        fh.write(rec.tobytes())


def read_msc(path) -> tuple[np.ndarray, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file shorter than the {_HEADER.size}-byte header", len(raw))
    magic, n, c, side = _HEADER.unpack_from(raw, 0)
    if magic != MSC_MAGIC:
        if magic[:6] == MSC_MAGIC[:6]:
            raise FormatError(f"{path}: unsupported MSC version {magic[6:]!r}", 6)
        raise FormatError(f"{path}: bad magic {magic!r}", 0)
    rec_size = 2 + 4 * c * side * side
    expected = _HEADER.size + n * rec_size
    if len(raw) < expected:
        whole = (len(raw) - _HEADER.size) // rec_size
        raise FormatError(
            f"{path}: truncated payload, header promises {n} records but only {whole} are complete",
            _HEADER.size + whole * rec_size,
        )
    if len(raw) > expected:
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes after {n} records", expected)
    rec = np.frombuffer(raw, dtype=np.dtype([("label", "<u2"), ("px", "<f4", (c * side * side,))]), count=n, offset=_HEADER.size)
    pixels = rec["px"].astype(np.float32).reshape(n, c, side, side)
    labels = rec["label"].astype(np.int64)
    return pixels, labels


def save_dataset(directory, ds: ChipDataset) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ds.refresh_counts()
    for split in ds.splits:
        write_msc(d / f"{split}.msc", ds.pixels[split], ds.labels[split])
    man = json.loads(ds.manifest.to_json())
    if ds.source_ids:
        man["source_ids"] = {k: list(v) for k, v in ds.source_ids.items()}
    (d / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True), encoding="utf-8")


def load_dataset(directory, splits: Optional[Sequence[str]] = None) -> ChipDataset:
    d = Path(directory)
    mpath = d / "manifest.json"
    if not mpath.exists():
        raise DataError(f"{d}: no manifest.json")
    try:
        raw = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{mpath}: invalid JSON: {exc}") from exc
    manifest = DatasetManifest.from_dict(raw)
    if list(manifest.band_order) != list(BAND_ORDER)[: len(manifest.band_order)]:
        raise DataError(f"{mpath}: band order {manifest.band_order} is not ascending spectral order {list(BAND_ORDER)}")
    pixels, labels = {}, {}
    wanted = splits if splits is not None else [s for s in manifest.class_counts if (d / f"{s}.msc").exists()]
    for split in wanted:
        path = d / f"{split}.msc"
        if not path.exists():
            raise DataError(f"{d}: split {split!r} missing ({path.name} not found)")
        pixels[split], labels[split] = read_msc(path)
    ds = ChipDataset(pixels, labels, manifest, {k: v for k, v in raw.get("source_ids", {}).items() if k in pixels})
    ds.validate()
    return ds


def iterate_batches(
    ds: ChipDataset, split: str, batch_size: int, shuffle_seed: Optional[int] = None, epoch: int = 0
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield (pixels, labels) batches; the last partial batch is included.

    With ``shuffle_seed`` set, the order is a permutation drawn from
    ``(shuffle_seed, epoch)``, so every epoch differs but reruns repeat.
    """
    if split not in ds.pixels:
        raise DataError(f"dataset has no {split!r} split")
    if batch_size < 1:
        raise ContractError(f"batch_size must be positive, got {batch_size}")
    n = len(ds.labels[split])
    order = np.arange(n) if shuffle_seed is None else np.random.default_rng([shuffle_seed, epoch]).permutation(n)
    px, lb = ds.pixels[split], ds.labels[split]
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield px[idx], lb[idx]


# --------------------------------------------------------------------------
# chip derivation


@dataclass
class DeriveConfig:
    padding: int = BOX_PADDING
    divisor: float = NORMALIZATION_DIVISOR
    side: int = CHIP_SIDE
    class_cap: int = CLASS_CAP
    val_fraction: float = VAL_FRACTION
    seed: int = 0
    bands: int = 8
    gsd_resampled: bool = True


def chip_window(box: Sequence[float], padding: int = BOX_PADDING) -> tuple[int, int, int]:
    """Square window (x0, y0, side) centred on box [x, y, w, h], side = max(w, h) + 2*padding."""
    x, y, w, h = box
    side = int(round(max(w, h))) + 2 * padding
    cx, cy = x + w / 2.0, y + h / 2.0
    x0 = int(np.floor(cx - side / 2.0 + 0.5))
    y0 = int(np.floor(cy - side / 2.0 + 0.5))
    return x0, y0, side


def normalize(raw: np.ndarray, divisor: float = NORMALIZATION_DIVISOR) -> np.ndarray:
    return np.clip(np.asarray(raw, dtype=np.float64) / divisor, 0.0, 1.0).astype(np.float32)


def _interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    # half-pixel centres, edge clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0, n_in - 1)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    m = np.zeros((n_out, n_in))
    m[np.arange(n_out), lo] += 1 - frac
    m[np.arange(n_out), hi] += frac
    return m


def resize_bilinear(img: np.ndarray, side: int = CHIP_SIDE) -> np.ndarray:
    """Bilinear resize of [C, H, W] to [C, side, side]; linear in the pixel values."""
    _, h, w = img.shape
    rows = _interp_matrix(h, side)
    cols = _interp_matrix(w, side)
    return np.einsum("ih,chw,jw->cij", rows, img.astype(np.float64), cols).astype(np.float32)


def split_counts(n: int, val_fraction: float = VAL_FRACTION) -> tuple[int, int]:
    """(train, val) sizes for splitting ``n`` records."""
    n_val = int(np.floor(n * val_fraction + 0.5))
    return n - n_val, n_val


def cap_per_class(labels: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    """Indices keeping at most ``cap`` randomly chosen records per class, in original order."""
    keep = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) > cap:
            idx = np.sort(rng.choice(idx, size=cap, replace=False))
        keep.append(idx)
    return np.sort(np.concatenate(keep)) if keep else np.zeros(0, dtype=int)


def stratified_split(labels: np.ndarray, val_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per class, move round(val_fraction * n_c) random records to validation."""
    train, val = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        _, n_val = split_counts(len(idx), val_fraction)
        val.append(idx[:n_val])
        train.append(idx[n_val:])
    cat = lambda parts: np.sort(np.concatenate(parts)) if parts else np.zeros(0, dtype=int)  # noqa: E731
    return cat(train), cat(val)


def _parse_label(value, class_names) -> int:
    if isinstance(value, str):
        if value not in class_names:
            raise ValueError(f"unknown class {value!r}")
        return class_names.index(value)
    label = int(value)
    if not 0 <= label < len(class_names):
        raise ValueError(f"label {label} out of range")
    return label


def derive_chips(
    scenes: Mapping[str, np.ndarray],
    annotations: Sequence[dict],
    config: Optional[DeriveConfig] = None,
    class_names: Sequence[str] = CLASS_NAMES,
) -> ChipDataset:
    """Cut normalized, resized chips around annotated boxes.

    ``annotations`` entries hold ``scene`` (key into ``scenes``), ``box``
    ``[x, y, w, h]`` in pixels, ``label`` (index or class name) and ``pool``
    (``"train"`` or ``"test"``).  The train pool is capped per class and split
    90:10 into train/val per class; the test pool is kept whole.  Bad records
    are skipped with a logged reason.
    """
    cfg = config or DeriveConfig()
    class_names = list(class_names)
    rng = np.random.default_rng(cfg.seed)
    pools: dict[str, list] = {"train": [], "test": []}
    skipped: dict[str, int] = {}

    def skip(reason, i):
        skipped[reason] = skipped.get(reason, 0) + 1
        log.info("annotation %d skipped: %s", i, reason)

    for i, ann in enumerate(annotations):
        try:
            scene_id = ann["scene"]
            x, y, w, h = (float(v) for v in ann["box"])
            label = _parse_label(ann["label"], class_names)
            pool = ann.get("pool", "train")
        except (KeyError, TypeError, ValueError) as exc:
            skip(f"malformed annotation ({exc})", i)
            continue
        if pool not in pools:
            skip(f"unknown pool {pool!r}", i)
            continue
        if w <= 0 or h <= 0:
            skip("non-positive box size", i)
            continue
        scene = scenes.get(scene_id)
        if scene is None:
            skip(f"unknown scene {scene_id!r}", i)
            continue
        if scene.ndim != 3 or scene.shape[0] != cfg.bands:
            skip(f"scene {scene_id!r} has shape {scene.shape}, expected {cfg.bands} bands", i)
            continue
        x0, y0, side = chip_window((x, y, w, h), cfg.padding)
        _, sh, sw = scene.shape
        if x0 < 0 or y0 < 0 or x0 + side > sw or y0 + side > sh:
            skip("chip crosses image boundary", i)
            continue
        chip = normalize(scene[:, y0 : y0 + side, x0 : x0 + side], cfg.divisor)
        chip = np.clip(resize_bilinear(chip, cfg.side), 0.0, 1.0)
        pools[pool].append((chip, label, f"{scene_id}:{i}"))

    if not pools["train"] and not pools["test"]:
        raise DataError(f"no chips derived from {len(annotations)} annotations (skipped: {skipped})")

    def stack(items):
        if not items:
            return np.zeros((0, cfg.bands, cfg.side, cfg.side), np.float32), np.zeros(0, np.int64), []
        return (
            np.stack([it[0] for it in items]).astype(np.float32),
            np.array([it[1] for it in items], dtype=np.int64),
            [it[2] for it in items],
        )

    tp, tl, tid = stack(pools["train"])
    keep = cap_per_class(tl, cfg.class_cap, rng)
    tp, tl, tid = tp[keep], tl[keep], [tid[j] for j in keep]
    tr, va = stratified_split(tl, cfg.val_fraction, rng)
    sp, sl, sid = stack(pools["test"])
    pixels = {"train": tp[tr], "val": tp[va], "test": sp}
    labels = {"train": tl[tr], "val": tl[va], "test": sl}
    ids = {"train": [tid[j] for j in tr], "val": [tid[j] for j in va], "test": sid}
    manifest = DatasetManifest(
        class_names=class_names,
        class_counts={},
        seed=cfg.seed,
        normalization_divisor=cfg.divisor,
        provenance={"kind": "derived", "config": asdict(cfg), "skipped": skipped},
    )
    ds = ChipDataset(pixels, labels, manifest, ids)
    ds.refresh_counts()
    return ds


def load_scenes(annotation_file) -> tuple[dict, list, dict]:
    """Read a derive job: JSON with ``scenes`` ({id: path to .npy [bands,H,W]}) and ``annotations``.

    Returns (scenes, annotations, options); paths are relative to the JSON file.
    """
    path = Path(annotation_file)
    job = json.loads(path.read_text(encoding="utf-8"))
    scenes = {}
    for sid, rel in job.get("scenes", {}).items():
        p = (path.parent / rel) if not Path(rel).is_absolute() else Path(rel)
        scenes[sid] = np.load(p)
    return scenes, list(job.get("annotations", [])), dict(job.get("options", {}))


# --------------------------------------------------------------------------
# synthetic imbalanced dataset


@dataclass
class SpectralClassSpec:
    signature: np.ndarray  # mean reflectance per band, in (0, 1)
    template: str  # blob | bar | grid | ring
    noise_scale: float
    frequency_weight: float

    def __post_init__(self):
        if np.any(self.signature <= 0) or np.any(self.signature >= 1):
            raise ContractError("signature values must lie in (0, 1)")
        if self.noise_scale < 0:
            raise ContractError("noise_scale must be >= 0")


TEMPLATES = ("blob", "bar", "grid", "ring")


def geometric_counts(num_classes: int, head_count: int, imbalance_ratio: float) -> np.ndarray:
    """round(head_count * ratio ** (-c / (num_classes - 1))) for c = 0..num_classes-1."""
    if num_classes < 2:
        raise ContractError(f"num_classes must be >= 2, got {num_classes}")
    if imbalance_ratio < 1:
        raise ContractError(f"imbalance_ratio must be >= 1, got {imbalance_ratio}")
    c = np.arange(num_classes)
    return np.floor(head_count * imbalance_ratio ** (-c / (num_classes - 1)) + 0.5).astype(np.int64)


def synthetic_class_specs(
    num_classes: int, rng: np.random.Generator, noise_scale: float, counts: np.ndarray
) -> list[SpectralClassSpec]:
    """Class pairs (2j, 2j+1) share shape and bands 1-5 and differ only in bands 6-8."""
    specs = []
    n_pairs = (num_classes + 1) // 2
    visible = rng.uniform(0.2, 0.8, size=(n_pairs, 5))
    infrared = rng.uniform(0.2, 0.8, size=(n_pairs, 3))
    for c in range(num_classes):
        j = c // 2
        ir = infrared[j].copy()
        if c % 2:
            # red-edge / NIR step, as in vegetation vs. painted surfaces
            ir = np.clip(ir + np.array([0.12, 0.22, 0.25]) * np.where(ir > 0.5, -1, 1), 0.05, 0.95)
        sig = np.concatenate([visible[j], ir])
        specs.append(SpectralClassSpec(sig.astype(np.float32), TEMPLATES[j % len(TEMPLATES)], noise_scale, float(counts[c] / counts.sum())))
    return specs


def _template_mask(kind: str, side: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    cx, cy = side / 2 + rng.uniform(-4, 4), side / 2 + rng.uniform(-4, 4)
    scale = rng.uniform(0.8, 1.2)
    dx, dy = xx - cx, yy - cy
    if kind == "blob":
        r = 6.0 * scale
        return np.exp(-(dx**2 + dy**2) / (2 * r * r))
    if kind == "bar":
        th = rng.uniform(0, np.pi)
        u = dx * np.cos(th) + dy * np.sin(th)
        v = -dx * np.sin(th) + dy * np.cos(th)
        return ((np.abs(u) < 11 * scale) & (np.abs(v) < 3 * scale)).astype(np.float64)
    if kind == "grid":
        period = 6.0 * scale
        inside = (np.abs(dx) < 10 * scale) & (np.abs(dy) < 10 * scale)
        cells = ((np.floor(dx / period) + np.floor(dy / period)) % 2 == 0)
        return (inside & cells).astype(np.float64)
    if kind == "ring":
        rr = np.sqrt(dx**2 + dy**2)
        return np.exp(-((rr - 8 * scale) ** 2) / 4.0)
    raise ContractError(f"unknown template {kind!r}")


def _render(spec: SpectralClassSpec, n: int, side: int, rng: np.random.Generator, chol: np.ndarray, jitter: float) -> np.ndarray:
    bands = len(spec.signature)
    out = np.empty((n, bands, side, side), dtype=np.float32)
    for i in range(n):
        mask = _template_mask(spec.template, side, rng)
        background = np.clip(0.3 + rng.normal(0, 0.08, size=bands), 0.02, 0.98)
        sig = np.clip(spec.signature * (1 + rng.normal(0, jitter, size=bands)), 0.01, 0.99)
        img = background[:, None, None] * (1 - mask) + sig[:, None, None] * mask
        noise = (chol @ rng.standard_normal((bands, side * side))).reshape(bands, side, side)
        img = (img + spec.noise_scale * noise) * rng.uniform(0.8, 1.2)
        out[i] = np.clip(img, 0.0, 1.0)
    return out


def generate_synthetic(
    num_classes: int = 10,
    head_count: int = 5000,
    imbalance_ratio: float = 60.0,
    seed: int = 42,
    noise_scale: float = 0.08,
    signature_jitter: float = 0.08,
    test_head_count: Optional[int] = None,
    val_fraction: float = VAL_FRACTION,
    class_cap: int = CLASS_CAP,
    side: int = CHIP_SIDE,
    band_correlation: float = 0.7,
) -> ChipDataset:
    """Imbalanced 8-band chips with class-specific spectra and shapes.

    Class ``c`` receives ``geometric_counts(...)[c]`` chips in the train pool,
    which is capped and split per class into train/val.  The test pool follows
    the same decay from ``test_head_count`` (default ``head_count // 4``).
    Each chip is template * signature over a random background, plus
    band-correlated Gaussian noise, times a global illumination in [0.8, 1.2].
    """
    rng = np.random.default_rng(seed)
    counts = geometric_counts(num_classes, head_count, imbalance_ratio)
    test_head = head_count // 4 if test_head_count is None else test_head_count
    test_counts = geometric_counts(num_classes, test_head, imbalance_ratio)
    specs = synthetic_class_specs(num_classes, rng, noise_scale, counts)
    idx = np.arange(8)
    chol = np.linalg.cholesky(band_correlation ** np.abs(idx[:, None] - idx[None, :]))

    def pool(cnts):
        px = [_render(specs[c], int(cnts[c]), side, rng, chol, signature_jitter) for c in range(num_classes)]
        lb = [np.full(int(cnts[c]), c, dtype=np.int64) for c in range(num_classes)]
        return np.concatenate(px), np.concatenate(lb)

    tp, tl = pool(counts)
    keep = cap_per_class(tl, class_cap, rng)
    tp, tl = tp[keep], tl[keep]
    tr, va = stratified_split(tl, val_fraction, rng)
    sp, sl = pool(test_counts)
    names = list(CLASS_NAMES[:num_classes]) if num_classes <= len(CLASS_NAMES) else [f"class{c}" for c in range(num_classes)]
    manifest = DatasetManifest(
        class_names=names,
        class_counts={},
        seed=seed,
        provenance={
            "kind": "synthetic",
            "head_count": head_count,
            "imbalance_ratio": imbalance_ratio,
            "pool_counts": counts.tolist(),
            "test_head_count": test_head,
            "noise_scale": noise_scale,
            "signature_jitter": signature_jitter,
            "band_correlation": band_correlation,
            "signatures": [s.signature.round(4).tolist() for s in specs],
            "templates": [s.template for s in specs],
        },
    )
    ds = ChipDataset({"train": tp[tr], "val": tp[va], "test": sp}, {"train": tl[tr], "val": tl[va], "test": sl}, manifest)
    ds.refresh_counts()
    return ds
