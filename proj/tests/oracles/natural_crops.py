"""Regenerates the 128x128 grayscale crops in tests/data from scikit-image's
sample images (RGB converted with rgb2gray, then to uint8)."""

from pathlib import Path

import numpy as np
from PIL import Image
from skimage import color, data, util

CROPS = {  # name: (row, col) of the top-left corner
    "astronaut": (60, 180),
    "brick": (200, 200),
    "camera": (100, 200),
    "chelsea": (80, 120),
    "coffee": (150, 250),
}

out = Path(__file__).resolve().parent.parent / "data"
for name, (y, x) in CROPS.items():
    img = getattr(data, name)()
    if img.ndim == 3:
        img = util.img_as_ubyte(color.rgb2gray(img))
    Image.fromarray(np.ascontiguousarray(img[y : y + 128, x : x + 128])).save(out / f"{name}.png")
