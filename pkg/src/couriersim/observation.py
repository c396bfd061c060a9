"""Fixed-length numeric observation encoding.

Every component is normalized so that the unit-less similarity and rarity
thresholds used elsewhere are meaningful.  The schema is versioned: stores
refuse to compare observations across schema versions.
"""

from __future__ import annotations

import math

import numpy as np

OBS_SCHEMA_VERSION = 1
OBS_LEN = 9

# Attainable range of each component (used to normalize distances).
# Components: x/width, y/height, status/2, sin(tod), cos(tod),
# order count (capped), nearest-order distance / scope,
# congestion flag, weather flag.
OBS_RANGES = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0])
OBS_D_MAX = float(math.sqrt(float(np.sum(OBS_RANGES**2))))

ORDER_COUNT_CAP = 10


def build_observation(
    x: float,
    y: float,
    width: int,
    height: int,
    status: int,
    tod: int,
    steps_per_day: int,
    n_orders_in_scope: int,
    nearest_order_dist: float | None,
    scope: float,
    congestion: bool,
    weather: bool,
) -> np.ndarray:
    """Encode one agent's local view as the length-9 schema-v1 vector."""
    angle = 2.0 * math.pi * (tod / steps_per_day)
    if nearest_order_dist is None:
        near = 1.0
    else:
        near = min(nearest_order_dist, scope) / scope
    return np.array(
        [
            x / width,
            y / height,
            status / 2.0,
            math.sin(angle),
            math.cos(angle),
            min(n_orders_in_scope, ORDER_COUNT_CAP) / ORDER_COUNT_CAP,
            near,
            1.0 if congestion else 0.0,
            1.0 if weather else 0.0,
        ]
    )


def check_schema(version: int) -> None:
    if version != OBS_SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"observation schema {version} is incompatible with {OBS_SCHEMA_VERSION}"
        )


class SchemaMismatchError(ValueError):
    """Observations from incompatible snapshots were compared."""
