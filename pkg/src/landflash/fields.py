"""Synthetic suitability fields.

Kinds and their parameters:

uniform-random   low, high, seed
gradient         amplitude, offset            (type s ramps along angle 2*pi*s/S)
two-region-island
                 background_type, background_strength,
                 island = [top, left, height, width], island_type, margin
blobs            count, radius, amplitude, seed

In the island field every parcel scores ``background_strength`` for the
background type and 0 otherwise; inside the rectangle the island type gains
``margin`` on top of that, so margin 0 leaves the background untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import SuitabilityField

KINDS = ("uniform-random", "gradient", "two-region-island", "blobs")

_DEFAULTS = {
    "uniform-random": {"low": 0.0, "high": 1.0, "seed": 0},
    "gradient": {"amplitude": 1.0, "offset": 0.0},
    "two-region-island": {"background_type": 0, "background_strength": 1.0,
                          "island": [12, 12, 6, 6], "island_type": 1, "margin": 1.0},
    "blobs": {"count": 6, "radius": 4.0, "amplitude": 1.0, "seed": 0},
}


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    rows: int = 30
    cols: int = 30
    n_types: int = 3
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"generator.kind: unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.rows < 1 or self.cols < 1 or self.n_types < 2:
            raise ValueError("generator: need rows, cols >= 1 and n_types >= 2")
        unknown = set(self.params) - set(_DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"generator.params: unknown keys {sorted(unknown)} for {self.kind}")

    def resolved(self) -> dict:
        return {**_DEFAULTS[self.kind], **self.params}


def generate_field(spec: GeneratorSpec) -> SuitabilityField:
    p = spec.resolved()
    shape = (spec.rows, spec.cols, spec.n_types)
    if spec.kind == "uniform-random":
        if p["high"] < p["low"]:
            raise ValueError("generator.params.high must be >= low")
        rng = np.random.default_rng(p["seed"])
        return SuitabilityField(p["low"] + (p["high"] - p["low"]) * rng.random(shape))

    if spec.kind == "gradient":
        y, x = np.meshgrid(np.linspace(-1, 1, spec.rows), np.linspace(-1, 1, spec.cols), indexing="ij")
        scores = np.empty(shape)
        for s in range(spec.n_types):
            angle = 2 * np.pi * s / spec.n_types
            scores[..., s] = p["offset"] + p["amplitude"] * (np.cos(angle) * x + np.sin(angle) * y)
        return SuitabilityField(scores)

    if spec.kind == "two-region-island":
        bg, isl = int(p["background_type"]), int(p["island_type"])
        for name, v in (("background_type", bg), ("island_type", isl)):
            if not 0 <= v < spec.n_types:
                raise ValueError(f"generator.params.{name} out of range")
        top, left, h, w = (int(v) for v in p["island"])
        if h < 1 or w < 1 or top < 0 or left < 0 or top + h > spec.rows or left + w > spec.cols:
            raise ValueError(f"generator.params.island {p['island']} exceeds the {spec.rows}x{spec.cols} grid")
        scores = np.zeros(shape)
        scores[..., bg] = p["background_strength"]
        scores[top:top + h, left:left + w, isl] += p["margin"]
        return SuitabilityField(scores)

    rng = np.random.default_rng(p["seed"])
    y, x = np.meshgrid(np.arange(spec.rows), np.arange(spec.cols), indexing="ij")
    scores = np.zeros(shape)
    for _ in range(int(p["count"])):
        ci, cj = rng.uniform(0, spec.rows), rng.uniform(0, spec.cols)
        s = int(rng.integers(spec.n_types))
        scores[..., s] += p["amplitude"] * np.exp(-((y - ci) ** 2 + (x - cj) ** 2) / (2 * p["radius"] ** 2))
    return SuitabilityField(scores)


def island_fixture(rows: int = 30, cols: int = 30, size: int = 6, margin: float = 1.0,
                   background_strength: float = 1.0, from_type: int = 0, to_type: int = 1,
                   n_types: int = 3) -> tuple[GeneratorSpec, tuple]:
    """Centred square island whose to_type beats from_type by ``margin`` inside.

    Returns the generator spec and the island rectangle (top, left, height, width).
    """
    top, left = (rows - size) // 2, (cols - size) // 2
    rect = (top, left, size, size)
    # the island type starts at 0 and must clear the background score plus the margin
    spec = GeneratorSpec("two-region-island", rows, cols, n_types,
                         {"background_type": from_type, "background_strength": background_strength,
                          "island": list(rect), "island_type": to_type,
                          "margin": background_strength + margin})
    return spec, rect
