"""Regenerates the NPY golden fixtures with numpy's own writer.

    python3 tests/data/make_fixtures.py

golden_u8.npy  uint8, shape (3, 2, 6, 6), value (7 t + 13 i + 3 p) mod 256
golden_f8.npy  float64, shape (4, 2, 5), value (t + 1) / 8 + i / 4 + p / 1024
where t is the frame, i the sequence and p the flattened pixel index.
The unit tests rebuild the same batches and compare the writer's bytes.
"""
import pathlib

import numpy as np

here = pathlib.Path(__file__).resolve().parent

t, i, p = np.meshgrid(np.arange(3), np.arange(2), np.arange(36), indexing="ij")
u8 = ((7 * t + 13 * i + 3 * p) % 256).astype(np.uint8).reshape(3, 2, 6, 6)
np.save(here / "golden_u8.npy", u8)

t, i, p = np.meshgrid(np.arange(4), np.arange(2), np.arange(5), indexing="ij")
f8 = ((t + 1) / 8 + i / 4 + p / 1024).astype("<f8")
np.save(here / "golden_f8.npy", f8)
