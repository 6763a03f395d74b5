"""Writes the clear-image test corpus: 128x128 crops of sample photographs
bundled with scikit-image, scikit-learn and matplotlib.

Usage: python3 tools/make_natural_corpus.py tests/data/natural
"""
import os
import sys

import matplotlib.cbook
import numpy as np
import skimage.data
import sklearn.datasets
from PIL import Image

CROP = 128
PER_IMAGE = 3


def sources():
    yield "astronaut", skimage.data.astronaut()
    yield "chelsea", skimage.data.chelsea()
    yield "coffee", skimage.data.coffee()
    yield "rocket", skimage.data.rocket()
    yield "motorcycle", skimage.data.stereo_motorcycle()[0]
    for name, img in zip(("china", "flower"), sklearn.datasets.load_sample_images().images):
        yield name, img
    with matplotlib.cbook.get_sample_data("grace_hopper.jpg") as f:
        yield "grace_hopper", np.asarray(Image.open(f).convert("RGB"))


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    for name, img in sources():
        pil = Image.fromarray(np.ascontiguousarray(img[..., :3]))
        # Halve large photographs so a crop spans more of the scene.
        if min(pil.size) >= 4 * CROP:
            pil = pil.resize((pil.width // 2, pil.height // 2), Image.Resampling.BOX)
        w, h = pil.size
        for k in range(PER_IMAGE):
            # Evenly spaced along the diagonal, inset by a quarter crop.
            f = (k + 0.5) / PER_IMAGE
            x = int(round((w - CROP) * f))
            y = int(round((h - CROP) * (1.0 - f) if k % 2 else (h - CROP) * f))
            pil.crop((x, y, x + CROP, y + CROP)).save(os.path.join(out_dir, f"{name}_{k}.png"))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "tests/data/natural")
