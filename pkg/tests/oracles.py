"""Independent reference implementations used as test oracles."""

import numpy as np

from cdsnet import tensor as T


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of scalar f at x (x modified in place and restored)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return g


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / den) if den else 0.0


def naive_conv2d(x, w, groups=1, stride=1, padding=0):
    """Direct sliding-window convolution (cross-correlation), the loop oracle."""
    n, c, h, wd = x.shape
    o, cg, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    og = o // groups
    out = np.zeros((n, o, ho, wo), dtype=np.result_type(x, w))
    for b in range(n):
        for oc in range(o):
            g = oc // og
            for i in range(ho):
                for j in range(wo):
                    patch = xp[b, g * cg : (g + 1) * cg, i * stride : i * stride + k, j * stride : j * stride + k]
                    out[b, oc, i, j] = np.sum(patch * w[oc])
    return out


def scalar_loss(out, r):
    """<out, r> as a graph node."""
    return T.sum(out * T.Tensor(r, dtype=out.dtype))


def make_scene(rng, counts, height=None, box=(22, 22), value_range=(0, 8000)):
    """A synthetic 8-band scene with ``counts[c]`` non-overlapping boxes of class c on a grid.

    Returns (scene [8, H, W] raw sensor counts, annotations).  Boxes are
    placed on a 40-px lattice so every padded window stays in bounds.
    """
    total = int(sum(counts))
    cols = int(np.ceil(np.sqrt(total)))
    rows = int(np.ceil(total / cols))
    cell = 40
    scene = rng.uniform(*value_range, size=(8, rows * cell, cols * cell)).astype(np.float32)
    annotations = []
    k = 0
    for c, n in enumerate(counts):
        for _ in range(int(n)):
            r, q = divmod(k, cols)
            w, h = box
            annotations.append({"scene": "s0", "box": [q * cell + (cell - w) / 2, r * cell + (cell - h) / 2, w, h], "label": c, "pool": "train"})
            k += 1
    return scene, annotations
