#!/usr/bin/env python3
"""Builds data/corpus/: 96x96 P6 crops of the sample photographs that ship
with scikit-image, matplotlib and scikit-learn. Run once; output is committed."""
import os
import sys

from PIL import Image

SOURCES = [
    ("skimage", "data/coffee.png"),
    ("skimage", "data/astronaut.png"),
    ("skimage", "data/motorcycle_left.png"),
    ("skimage", "data/ihc.png"),
    ("skimage", "data/chelsea.png"),
    ("skimage", "data/hubble_deep_field.jpg"),
    ("skimage", "data/retina.jpg"),
    ("skimage", "data/rocket.jpg"),
    ("matplotlib", "mpl-data/sample_data/grace_hopper.jpg"),
    ("sklearn", "datasets/images/flower.jpg"),
    ("sklearn", "datasets/images/china.jpg"),
]
SHORT_SIDE = 192
CROP = 96


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for pkg, rel in SOURCES:
        mod = __import__(pkg)
        path = os.path.join(os.path.dirname(mod.__file__), rel)
        img = Image.open(path).convert("RGB")
        w, h = img.size
        s = SHORT_SIDE / min(w, h)
        img = img.resize((round(w * s), round(h * s)), Image.LANCZOS)
        w, h = img.size
        x0, y0 = (w - 2 * CROP) // 2, (h - 2 * CROP) // 2
        stem = os.path.splitext(os.path.basename(rel))[0]
        for i in range(2):
            for j in range(2):
                box = (x0 + j * CROP, y0 + i * CROP, x0 + (j + 1) * CROP, y0 + (i + 1) * CROP)
                img.crop(box).save(os.path.join(out_dir, f"{stem}_{i}{j}.ppm"))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/corpus")
