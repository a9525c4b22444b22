from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from freqlens import SpatialImage


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240907)


def random_image(rng: np.random.Generator, height: int, width: int, channels: int = 3) -> SpatialImage:
    return SpatialImage(rng.uniform(-1.0, 1.0, size=(height, width, channels)))


def save_png(path, array: np.ndarray) -> None:
    """Write a uint8 H×W or H×W×3 array as PNG."""
    mode = "L" if array.ndim == 2 else "RGB"
    Image.fromarray(array.astype(np.uint8), mode=mode).save(path)


def write_pairs_file(path, rows: list[str]) -> None:
    path.write_text("probe,reference,label,group\n" + "\n".join(rows) + "\n", encoding="utf-8")
