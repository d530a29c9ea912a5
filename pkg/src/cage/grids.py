"""Built-in preference-vector grids for sweeps."""
from __future__ import annotations

import numpy as np


def help2d_grid() -> np.ndarray:
    """Two-objective sweep: first weight in {0.1, ..., 0.8}, second the complement."""
    alphas = np.round(np.arange(0.1, 0.81, 0.1), 10)
    return np.stack([alphas, 1.0 - alphas], axis=1)


# 31 three-objective preference vectors: 3 corners, 5 interior points per edge,
# and 13 interior mixes concentrated around the centroid.
_SIMPLEX31 = [
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
    (0.9, 0.1, 0.0),
    (0.7, 0.3, 0.0),
    (0.5, 0.5, 0.0),
    (0.3, 0.7, 0.0),
    (0.1, 0.9, 0.0),
    (0.9, 0.0, 0.1),
    (0.7, 0.0, 0.3),
    (0.5, 0.0, 0.5),
    (0.3, 0.0, 0.7),
    (0.1, 0.0, 0.9),
    (0.0, 0.9, 0.1),
    (0.0, 0.7, 0.3),
    (0.0, 0.5, 0.5),
    (0.0, 0.3, 0.7),
    (0.0, 0.1, 0.9),
    (0.8, 0.1, 0.1),
    (0.5, 0.3, 0.2),
    (0.4, 0.2, 0.4),
    (0.33, 0.33, 0.34),
    (0.3, 0.3, 0.4),
    (0.3, 0.2, 0.5),
    (0.25, 0.25, 0.5),
    (0.2, 0.5, 0.3),
    (0.2, 0.4, 0.4),
    (0.2, 0.3, 0.5),
    (0.2, 0.2, 0.6),
    (0.1, 0.8, 0.1),
    (0.1, 0.1, 0.8),
]


def simplex31_grid() -> np.ndarray:
    return np.array(_SIMPLEX31, dtype=float)


def load_grid(spec: str) -> np.ndarray:
    """Resolve a grid spec: 'help2d', 'simplex31', or 'file:PATH' (CSV rows)."""
    if spec == "help2d":
        return help2d_grid()
    if spec == "simplex31":
        return simplex31_grid()
    if spec.startswith("file:"):
        return np.loadtxt(spec[len("file:"):], delimiter=",", ndmin=2)
    raise ValueError(f"unknown grid spec {spec!r}")
