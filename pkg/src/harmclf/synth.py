"""Deterministic synthetic 28x28 image datasets in MNIST IDX format.

Two families: `digits` (stroke-drawn numerals, the easier task) and `shapes`
(clothing-like silhouettes with deliberately confusable classes, the harder
task).  Rendering happens on a 4x supersampled canvas with seeded jitter in
pose, stroke, brightness and noise, then is downsampled with antialiasing.

Every byte of the output is a pure function of (family, count, seed), so the
generated IDX files stand in for the real datasets in offline runs; real
MNIST/FMNIST files drop into the same loader unchanged.
"""

from __future__ import annotations

import argparse
import gzip
import struct
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

SIZE = 28
SS = 4  # supersampling factor
CANVAS = SIZE * SS

# unit-square stroke programs per digit: (kind, coords[, start, end])
_DIGITS = {
    0: [("ellipse", (0.26, 0.10, 0.74, 0.90))],
    1: [("line", (0.36, 0.26, 0.54, 0.10)), ("line", (0.54, 0.10, 0.54, 0.90))],
    2: [("arc", (0.24, 0.08, 0.76, 0.52), 180, 380),
        ("line", (0.74, 0.38, 0.25, 0.90)), ("line", (0.25, 0.90, 0.78, 0.90))],
    3: [("arc", (0.26, 0.08, 0.74, 0.50), 150, 395),
        ("arc", (0.24, 0.46, 0.76, 0.92), 145, 390)],
    4: [("line", (0.62, 0.08, 0.22, 0.58)), ("line", (0.22, 0.58, 0.80, 0.58)),
        ("line", (0.62, 0.30, 0.62, 0.92))],
    5: [("line", (0.72, 0.10, 0.30, 0.10)), ("line", (0.30, 0.10, 0.28, 0.45)),
        ("arc", (0.22, 0.40, 0.78, 0.90), 240, 510)],
    6: [("arc", (0.26, 0.08, 0.86, 0.92), 95, 270),
        ("ellipse", (0.28, 0.50, 0.72, 0.90))],
    7: [("line", (0.22, 0.12, 0.78, 0.12)), ("line", (0.78, 0.12, 0.40, 0.90))],
    8: [("ellipse", (0.30, 0.08, 0.70, 0.50)), ("ellipse", (0.27, 0.48, 0.73, 0.92))],
    9: [("ellipse", (0.28, 0.10, 0.72, 0.52)),
        ("arc", (0.25, 0.10, 0.72, 0.90), 0, 95)],
}

# unit-square silhouettes per clothing-like class
_SHAPES = {
    0: {"poly": [(0.20, 0.25), (0.35, 0.18), (0.45, 0.22), (0.55, 0.22),
                 (0.65, 0.18), (0.80, 0.25), (0.74, 0.42), (0.66, 0.38),
                 (0.66, 0.85), (0.34, 0.85), (0.34, 0.38), (0.26, 0.42)]},
    1: {"poly": [(0.32, 0.12), (0.68, 0.12), (0.72, 0.90), (0.56, 0.90),
                 (0.50, 0.40), (0.44, 0.90), (0.28, 0.90)]},
    2: {"poly": [(0.22, 0.24), (0.38, 0.15), (0.62, 0.15), (0.78, 0.24),
                 (0.88, 0.70), (0.74, 0.74), (0.68, 0.45), (0.68, 0.88),
                 (0.32, 0.88), (0.32, 0.45), (0.26, 0.74), (0.12, 0.70)]},
    3: {"poly": [(0.40, 0.10), (0.60, 0.10), (0.56, 0.32), (0.74, 0.88),
                 (0.26, 0.88), (0.44, 0.32)]},
    4: {"poly": [(0.24, 0.20), (0.40, 0.12), (0.48, 0.16), (0.52, 0.16),
                 (0.60, 0.12), (0.76, 0.20), (0.86, 0.62), (0.72, 0.66),
                 (0.68, 0.40), (0.68, 0.92), (0.54, 0.92), (0.50, 0.30),
                 (0.46, 0.92), (0.32, 0.92), (0.32, 0.40), (0.28, 0.66),
                 (0.14, 0.62)]},
    5: {"poly": [(0.14, 0.74), (0.86, 0.74), (0.86, 0.88), (0.14, 0.88)],
        "lines": [(0.22, 0.74, 0.46, 0.52), (0.46, 0.52, 0.68, 0.74),
                  (0.56, 0.62, 0.82, 0.47)]},
    6: {"poly": [(0.21, 0.25), (0.36, 0.17), (0.46, 0.21), (0.54, 0.21),
                 (0.64, 0.17), (0.79, 0.25), (0.76, 0.52), (0.66, 0.48),
                 (0.66, 0.87), (0.34, 0.87), (0.34, 0.48), (0.24, 0.52)],
        "cuts": [(0.50, 0.24, 0.50, 0.86)]},
    7: {"poly": [(0.12, 0.70), (0.30, 0.52), (0.48, 0.50), (0.62, 0.58),
                 (0.88, 0.66), (0.88, 0.84), (0.12, 0.84)]},
    8: {"poly": [(0.22, 0.38), (0.78, 0.38), (0.74, 0.88), (0.26, 0.88)],
        "handle": (0.32, 0.14, 0.68, 0.54)},
    9: {"poly": [(0.30, 0.12), (0.52, 0.12), (0.54, 0.50), (0.62, 0.56),
                 (0.84, 0.66), (0.86, 0.84), (0.14, 0.84), (0.16, 0.70),
                 (0.28, 0.64)]},
}


def _pose(rng, max_rot, scale_lo, scale_hi, max_shift):
    return {
        "rot": rng.uniform(-max_rot, max_rot),
        "scale": rng.uniform(scale_lo, scale_hi),
        "dx": rng.uniform(-max_shift, max_shift) * SS,
        "dy": rng.uniform(-max_shift, max_shift) * SS,
    }


def _warp(pts, pose):
    """Scale unit coords about the canvas center onto [0, CANVAS)."""
    c = CANVAS / 2.0
    return [(c + pose["scale"] * (x * CANVAS - c),
             c + pose["scale"] * (y * CANVAS - c)) for x, y in pts]


def _finish(img: Image.Image, pose, rng, brightness, noise_sd) -> np.ndarray:
    img = img.rotate(pose["rot"], resample=Image.Resampling.BILINEAR,
                     translate=(pose["dx"], pose["dy"]), fillcolor=0)
    small = img.resize((SIZE, SIZE), Image.Resampling.BILINEAR)
    arr = np.asarray(small, dtype=np.float64) / 255.0
    arr *= brightness
    arr += rng.normal(0.0, noise_sd, arr.shape)
    return np.clip(arr, 0.0, 1.0)


def _draw_digit(digit: int, rng) -> np.ndarray:
    pose = _pose(rng, max_rot=14.0, scale_lo=0.82, scale_hi=1.10, max_shift=1.8)
    width = int(rng.integers(7, 13))
    img = Image.new("L", (CANVAS, CANVAS), 0)
    dr = ImageDraw.Draw(img)
    for prim in _DIGITS[digit]:
        kind, box = prim[0], prim[1]
        if kind == "line":
            (x1, y1), (x2, y2) = _warp([(box[0], box[1]), (box[2], box[3])], pose)
            dr.line((x1, y1, x2, y2), fill=255, width=width)
        else:
            (x1, y1), (x2, y2) = _warp([(box[0], box[1]), (box[2], box[3])], pose)
            if kind == "ellipse":
                dr.ellipse((x1, y1, x2, y2), outline=255, width=width)
            else:
                dr.arc((x1, y1, x2, y2), prim[2], prim[3], fill=255, width=width)
    return _finish(img, pose, rng, rng.uniform(0.72, 1.0), rng.uniform(0.01, 0.03))


def _draw_shape(cls: int, rng) -> np.ndarray:
    pose = _pose(rng, max_rot=9.0, scale_lo=0.80, scale_hi=1.08, max_shift=1.6)
    spec = _SHAPES[cls]
    jitter = rng.normal(0.0, 0.026, (len(spec["poly"]), 2))
    poly = [(x + jx, y + jy) for (x, y), (jx, jy) in zip(spec["poly"], jitter)]
    fill = int(rng.uniform(0.55, 1.0) * 255)
    img = Image.new("L", (CANVAS, CANVAS), 0)
    dr = ImageDraw.Draw(img)
    dr.polygon(_warp(poly, pose), fill=fill)
    for ln in spec.get("lines", ()):
        (x1, y1), (x2, y2) = _warp([(ln[0], ln[1]), (ln[2], ln[3])], pose)
        dr.line((x1, y1, x2, y2), fill=fill, width=3 * SS // 2)
    for ln in spec.get("cuts", ()):
        (x1, y1), (x2, y2) = _warp([(ln[0], ln[1]), (ln[2], ln[3])], pose)
        dr.line((x1, y1, x2, y2), fill=0, width=SS)
    if "handle" in spec:
        (x1, y1), (x2, y2) = _warp([spec["handle"][:2], spec["handle"][2:]], pose)
        dr.arc((x1, y1, x2, y2), 170, 370, fill=fill, width=2 * SS)
    arr = _finish(img, pose, rng, 1.0, rng.uniform(0.015, 0.04))
    # cloth-like intensity texture
    arr *= np.clip(rng.normal(1.0, 0.06, arr.shape), 0.6, 1.3)
    return np.clip(arr, 0.0, 1.0)


def make_dataset(family: str, count: int, seed: int):
    """Balanced labeled images; returns (images (N, 784) float64, labels)."""
    if family == "digits":
        draw = _draw_digit
    elif family == "shapes":
        draw = _draw_shape
    else:
        raise ValueError(f"unknown family {family!r}")
    rng = np.random.default_rng(seed)
    labels = np.tile(np.arange(10), count // 10 + 1)[:count]
    labels = labels[rng.permutation(count)]
    images = np.empty((count, SIZE * SIZE), dtype=np.float64)
    for i, lab in enumerate(labels):
        images[i] = draw(int(lab), rng).ravel()
    return images, labels.astype(np.int64)


def write_idx(images, labels, images_path, labels_path, compress=True) -> None:
    """Quantize to bytes and emit big-endian IDX files (gzipped when asked)."""
    images = np.asarray(images, dtype=np.float64)
    count = images.shape[0]
    pix = np.round(images * 255.0).astype(np.uint8)
    opener = gzip.open if compress else open
    with opener(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, count, SIZE, SIZE))
        fh.write(pix.tobytes())
    with opener(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 2049, count))
        fh.write(np.asarray(labels, dtype=np.uint8).tobytes())


def generate(out_dir, family: str, train: int, test: int, seed: int,
             compress: bool = True) -> dict[str, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".gz" if compress else ""
    paths = {
        "train_images": str(out / f"{family}-train-images-idx3-ubyte{ext}"),
        "train_labels": str(out / f"{family}-train-labels-idx1-ubyte{ext}"),
        "test_images": str(out / f"{family}-test-images-idx3-ubyte{ext}"),
        "test_labels": str(out / f"{family}-test-labels-idx1-ubyte{ext}"),
    }
    imgs, labs = make_dataset(family, train, seed)
    write_idx(imgs, labs, paths["train_images"], paths["train_labels"], compress)
    imgs, labs = make_dataset(family, test, seed + 1)
    write_idx(imgs, labs, paths["test_images"], paths["test_labels"], compress)
    return paths


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        description="generate synthetic IDX image datasets")
    ap.add_argument("--out", required=True)
    ap.add_argument("--family", choices=("digits", "shapes"), default="digits")
    ap.add_argument("--train", type=int, default=12000)
    ap.add_argument("--test", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--no-gzip", action="store_true")
    args = ap.parse_args(argv)
    paths = generate(args.out, args.family, args.train, args.test, args.seed,
                     compress=not args.no_gzip)
    for key, val in paths.items():
        print(f"{key}: {val}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
