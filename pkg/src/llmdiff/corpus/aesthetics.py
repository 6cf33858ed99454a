"""Analytic aesthetic score for scenes.

Three terms, each in [0, 1], combined with the weights documented in
`config.AESTHETIC_WEIGHTS` and scaled to [0, 10]:

- harmony: mean over color pairs (objects plus background) of
  (1 + cos(hue difference)) / 2. Same hue scores 1, complementary 0.
- centering: 1 - mean distance of object centers from the image center,
  normalized by the largest possible distance sqrt(1/2).
- non_overlap: 1 - max pairwise overlap fraction between the objects'
  bounding discs; fraction is intersection area over the smaller disc.
  Adding objects can only lower this term.
"""

from __future__ import annotations

import math
from itertools import combinations

from llmdiff.config import AESTHETIC_WEIGHTS
from llmdiff.corpus.scenes import SceneSpec, color_hue

_MAX_CENTER_DIST = math.sqrt(0.5)


def _disc_overlap_fraction(p1, r1, p2, r2) -> float:
    d = math.dist(p1, p2)
    if d >= r1 + r2:
        return 0.0
    rmin = min(r1, r2)
    if d <= abs(r1 - r2):
        return 1.0  # smaller disc fully contained
    # Lens area of two intersecting circles.
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    corner = 0.5 * math.sqrt(
        max(0.0, (-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    )
    return (a1 + a2 - corner) / (math.pi * rmin * rmin)


def aesthetic_terms(scene: SceneSpec) -> dict:
    hues = [color_hue(obj.color) for obj in scene.objects]
    hues.append(color_hue(scene.background))
    pair_scores = [
        (1.0 + math.cos(h1 - h2)) / 2.0 for h1, h2 in combinations(hues, 2)
    ]
    harmony = sum(pair_scores) / len(pair_scores)

    dists = [
        math.dist(obj.position, (0.5, 0.5)) / _MAX_CENTER_DIST
        for obj in scene.objects
    ]
    centering = 1.0 - sum(dists) / len(dists)

    worst = 0.0
    for a, b in combinations(scene.objects, 2):
        worst = max(
            worst,
            _disc_overlap_fraction(a.position, a.radius(), b.position, b.radius()),
        )
    non_overlap = 1.0 - worst

    return {"harmony": harmony, "centering": centering, "non_overlap": non_overlap}


def aesthetic_proxy(scene: SceneSpec) -> float:
    """Deterministic aesthetic score in [0, 10]."""
    terms = aesthetic_terms(scene)
    score = 10.0 * sum(AESTHETIC_WEIGHTS[k] * v for k, v in terms.items())
    return min(10.0, max(0.0, score))
