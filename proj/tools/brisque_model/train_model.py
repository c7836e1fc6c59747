#!/usr/bin/env python3
"""Trains the shipped BRISQUE scoring head (data/brisque_svr.txt).

Pristine 224x224 crops of scikit-image sample photos are degraded with
JPEG compression, Gaussian blur and white noise. Each variant gets a
distortion target in [0, 100] (0 pristine, 100 worst) and an RBF
epsilon-SVR is fitted on min-max scaled features. None of the images in
tests/data/reference are used.

Usage: python3 tools/brisque_model/train_model.py [out_path]
"""
import io
import os
import sys

import numpy as np
from PIL import Image, ImageFilter
from skimage import data
from sklearn.model_selection import GridSearchCV
from sklearn.svm import SVR

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.abspath(os.path.join(HERE, "..", ".."))
sys.path.insert(0, os.path.join(ROOT, "tests", "oracle"))
from brisque_oracle import features  # noqa: E402

SOURCES = ["brick", "grass", "gravel", "moon", "coins", "retina", "hubble_deep_field",
           "immunohistochemistry", "cell", "clock"]
FILES = ["motorcycle_left.png", "motorcycle_right.png"]
SIZE = 224


def sources():
    for n in SOURCES:
        yield n, Image.fromarray(getattr(data, n)()).convert("RGB")
    ddir = os.path.dirname(data.__file__)
    for f in FILES:
        yield f, Image.open(os.path.join(ddir, f)).convert("RGB")


def crops(img, rng, count=3):
    w, h = img.size
    if min(w, h) < 2 * SIZE:
        side = min(w, h)
        img = img.crop(((w - side) // 2, (h - side) // 2, (w - side) // 2 + side, (h - side) // 2 + side))
        yield img.resize((SIZE, SIZE), Image.LANCZOS)
        return
    yield img.resize((SIZE, SIZE), Image.LANCZOS)
    for _ in range(count):
        x = int(rng.integers(0, w - SIZE))
        y = int(rng.integers(0, h - SIZE))
        yield img.crop((x, y, x + SIZE, y + SIZE))


def jpeg(img, q):
    buf = io.BytesIO()
    img.save(buf, format="JPEG", quality=q)
    buf.seek(0)
    return Image.open(buf).convert("RGB")


def noisy(img, sd, rng):
    a = np.asarray(img, dtype=np.float64) / 255.0
    a = np.clip(a + rng.normal(0, sd, a.shape), 0, 1)
    return Image.fromarray(np.round(a * 255).astype(np.uint8))


def variants(img, rng):
    yield img, 0.0
    for q in (90, 70, 50, 30, 20, 10, 5):
        yield jpeg(img, q), 100.0 * (1.0 - q / 100.0) ** 2
    for s in (0.8, 1.5, 2.5, 4.0):
        yield img.filter(ImageFilter.GaussianBlur(s)), 100.0 * (1.0 - np.exp(-s / 2.0))
    for sd in (0.01, 0.03, 0.06, 0.1):
        yield noisy(img, sd, rng), 100.0 * (1.0 - np.exp(-sd / 0.04))


def luma(img):
    rgb = np.asarray(img, dtype=np.float64)
    return (0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]) / 255.0


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(ROOT, "data", "brisque_svr.txt")
    rng = np.random.default_rng(20221017)
    X, y = [], []
    for _, src in sources():
        for crop in crops(src, rng):
            for v, target in variants(crop, rng):
                X.append(features(luma(v)))
                y.append(target)
    X = np.array(X)
    y = np.array(y)
    lo, hi = X.min(axis=0), X.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1e-9)
    Xs = -1.0 + 2.0 * (X - lo) / (hi - lo)

    search = GridSearchCV(SVR(kernel="rbf"),
                          {"C": [64, 256, 1024, 4096], "gamma": [0.03, 0.1, 0.3, 1.0], "epsilon": [1.0, 3.0]},
                          cv=5)
    search.fit(Xs, y)
    svr = search.best_estimator_
    print(f"samples={len(y)} best={search.best_params_} cv_r2={search.best_score_:.3f} "
          f"support_vectors={len(svr.support_)}", file=sys.stderr)

    with open(out, "w") as f:
        f.write("# BRISQUE scoring head: RBF epsilon-SVR on min-max scaled features.\n")
        f.write("# Trained by tools/brisque_model/train_model.py on distorted scikit-image photos.\n")
        f.write("# decision(x) = bias + sum_i coef_i * exp(-gamma * |sv_i - scale(x)|^2)\n")
        f.write("qmad-svr 1\n")
        f.write("features 36\n")
        f.write(f"gamma {svr.gamma!r}\n")
        f.write(f"bias {float(svr.intercept_[0])!r}\n")
        f.write("ranges\n")
        for a, b in zip(lo, hi):
            f.write(f"{float(a)!r} {float(b)!r}\n")
        f.write(f"support_vectors {len(svr.support_)}\n")
        for coef, sv in zip(svr.dual_coef_[0], svr.support_vectors_):
            f.write(" ".join([repr(float(coef))] + [repr(float(v)) for v in sv]) + "\n")


if __name__ == "__main__":
    main()
