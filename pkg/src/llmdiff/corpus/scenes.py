"""Procedural scene specs and their deterministic rasterization.

Scenes are the ground truth behind every image, caption, and aesthetic
label in the corpus. Everything here is a pure function of (seed, args);
rendering uses hard (unantialiased) masks so pixel values equal palette
values exactly.
"""

from __future__ import annotations

import colorsys
import math
import random
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from llmdiff.errors import InvalidArgumentError

# name -> RGB in [0,1]. Hues are derived from these values, so the palette
# is the single source of truth for both rendering and color harmony.
COLOR_TABLE = {
    "red": (0.85, 0.10, 0.10),
    "orange": (0.95, 0.55, 0.10),
    "yellow": (0.95, 0.90, 0.15),
    "green": (0.10, 0.70, 0.20),
    "cyan": (0.10, 0.80, 0.80),
    "blue": (0.15, 0.25, 0.85),
    "purple": (0.55, 0.15, 0.80),
    "magenta": (0.90, 0.15, 0.65),
}

SHAPES = ("circle", "square", "triangle", "star")

SUPPORTED_RESOLUTIONS = (32, 64, 128)

MAX_COMPLEXITY = 8

# Base radius (in unit-square units) of an object of relative size 1.
RADIUS_SCALE = 0.30


def color_hue(name: str) -> float:
    """Hue angle in radians for a palette color."""
    r, g, b = COLOR_TABLE[name]
    h, _, _ = colorsys.rgb_to_hsv(r, g, b)
    return 2.0 * math.pi * h


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    color: str
    size: float                      # relative size in (0, 1]
    position: Tuple[float, float]    # (x, y) in [0, 1]^2, y grows downward

    def radius(self) -> float:
        return RADIUS_SCALE * self.size


@dataclass(frozen=True)
class SceneSpec:
    objects: Tuple[ObjectSpec, ...]
    background: str
    seed: int

    def validate(self) -> None:
        if len(self.objects) < 1:
            raise InvalidArgumentError("scene must contain at least one object")
        for obj in self.objects:
            if obj.shape not in SHAPES:
                raise InvalidArgumentError(f"unknown shape {obj.shape!r}")
            if obj.color not in COLOR_TABLE:
                raise InvalidArgumentError(f"unknown color {obj.color!r}")
            if not 0.0 < obj.size <= 1.0:
                raise InvalidArgumentError("object size must lie in (0, 1]")
            x, y = obj.position
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise InvalidArgumentError("object position outside unit square")
        if self.background not in COLOR_TABLE:
            raise InvalidArgumentError(f"unknown color {self.background!r}")


def generate_scene(seed: int, complexity: int = 2) -> SceneSpec:
    """Sample a scene with `complexity` objects, deterministic in `seed`."""
    if not 1 <= complexity <= MAX_COMPLEXITY:
        raise InvalidArgumentError(
            f"complexity must lie in [1, {MAX_COMPLEXITY}], got {complexity}"
        )
    rng = random.Random(seed)
    names = sorted(COLOR_TABLE)
    background = rng.choice(names)
    # Objects keep a color distinct from the background so every object is
    # visible and every caption word has pixel support.
    foreground = [c for c in names if c != background]
    objects = []
    for _ in range(complexity):
        objects.append(
            ObjectSpec(
                shape=rng.choice(SHAPES),
                color=rng.choice(foreground),
                size=rng.uniform(0.25, 0.9),
                position=(rng.uniform(0.08, 0.92), rng.uniform(0.08, 0.92)),
            )
        )
    scene = SceneSpec(objects=tuple(objects), background=background, seed=seed)
    scene.validate()
    return scene


def _point_in_polygon(px: np.ndarray, py: np.ndarray, verts) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over a pixel grid."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        crosses = (y1 > py) != (y2 > py)
        if not crosses.any():
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def _object_mask(obj: ObjectSpec, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    cx, cy = obj.position
    r = obj.radius()
    if obj.shape == "circle":
        return (px - cx) ** 2 + (py - cy) ** 2 <= r * r
    if obj.shape == "square":
        half = 0.886 * r  # side chosen so the square's area matches the disc
        return np.maximum(np.abs(px - cx), np.abs(py - cy)) <= half
    if obj.shape == "triangle":
        rc = 1.20 * r
        angles = [-math.pi / 2 + k * 2 * math.pi / 3 for k in range(3)]
        verts = [(cx + rc * math.cos(a), cy + rc * math.sin(a)) for a in angles]
        return _point_in_polygon(px, py, verts)
    if obj.shape == "star":
        ro = 1.35 * r
        ri = 0.382 * ro
        verts = []
        for k in range(5):
            a_out = -math.pi / 2 + k * 2 * math.pi / 5
            a_in = a_out + math.pi / 5
            verts.append((cx + ro * math.cos(a_out), cy + ro * math.sin(a_out)))
            verts.append((cx + ri * math.cos(a_in), cy + ri * math.sin(a_in)))
        return _point_in_polygon(px, py, verts)
    raise InvalidArgumentError(f"unknown shape {obj.shape!r}")


def render_image(scene: SceneSpec, resolution: int = 64) -> np.ndarray:
    """Rasterize a scene to an HxWx3 float array in [0,1].

    Objects are drawn back-to-front in list order. No anti-aliasing: every
    pixel carries an exact palette value.
    """
    if resolution not in SUPPORTED_RESOLUTIONS:
        raise InvalidArgumentError(
            f"resolution must be one of {SUPPORTED_RESOLUTIONS}, got {resolution}"
        )
    coords = (np.arange(resolution) + 0.5) / resolution
    px, py = np.meshgrid(coords, coords)  # py indexes rows (y grows downward)
    image = np.empty((resolution, resolution, 3), dtype=np.float64)
    image[:] = COLOR_TABLE[scene.background]
    for obj in scene.objects:
        mask = _object_mask(obj, px, py)
        image[mask] = COLOR_TABLE[obj.color]
    return image
