"""Randomised equivalence trials: zone search and pipeline vs brute force.

Each trial is fully determined by its seed, so a failure can be replayed
with ``maxbcg oracle-check --seed S --trials 1``.
"""

from __future__ import annotations

import math

import numpy as np

from .catalog import (
    GalaxyCatalog,
    PlantedCluster,
    RegionBounds,
    color_errors,
    generate_synthetic_catalog,
    generate_synthetic_kcorr,
)
from .oracle import brute_neighbors, brute_pipeline
from .partition import RunGeometry, run_sequential
from .zones import build_zone_table

RADII = (0.01, 0.05, 0.25, 0.5, 1.0)


def random_sky_catalog(rng, n: int) -> GalaxyCatalog:
    """``n`` galaxies with ra in [5, 355], dec in [-85, 85]; half the time
    packed into a random patch so that queries have plenty of hits."""
    if rng.random() < 0.5:
        ra = rng.uniform(5.0, 355.0, n)
        dec = rng.uniform(-85.0, 85.0, n)
    else:
        dec0 = rng.uniform(-83.0, 83.0)
        half = rng.uniform(0.5, 2.0)
        ra_half = min(half / math.cos(math.radians(min(abs(dec0) + half, 85.0))), 150.0)
        ra0 = rng.uniform(5.0 + ra_half, 355.0 - ra_half)
        ra = rng.uniform(ra0 - ra_half, ra0 + ra_half, n)
        dec = np.clip(rng.uniform(dec0 - half, dec0 + half, n), -85.0, 85.0)
    imag = rng.uniform(14.0, 22.0, n)
    return GalaxyCatalog(np.arange(1, n + 1), ra, dec, imag, np.zeros(n), np.zeros(n),
                         *color_errors(imag))


def _crosses_wrap(ra, dec, r) -> bool:
    s = math.sin(math.radians(r)) / math.cos(math.radians(dec))
    if s >= 1.0:
        return False  # cap holds the pole: full ra range is scanned
    half = math.degrees(math.asin(s)) + 1e-6
    return ra - half < 0.0 or ra + half > 360.0


def neighbor_trial(seed: int, max_n: int = 10_000, queries: int = 10) -> str | None:
    """None if zone search and brute force agree on every query, else a
    description of the first disagreement."""
    rng = np.random.default_rng(seed)
    cat = random_sky_catalog(rng, int(rng.integers(1, max_n + 1)))
    table = build_zone_table(cat)
    for q in range(queries):
        r = float(rng.choice(RADII))
        while True:
            if rng.random() < 0.5:
                k = int(rng.integers(len(cat)))
                ra, dec = float(cat.ra[k]), float(cat.dec[k])
            else:
                k = int(rng.integers(len(cat)))
                ra = float(np.clip(cat.ra[k] + rng.normal(0, r), 0.0, 359.999))
                dec = float(np.clip(cat.dec[k] + rng.normal(0, r), -89.0, 89.0))
            if not _crosses_wrap(ra, dec, r):
                break
        got = dict(table.neighbors(ra, dec, r))
        want = dict(brute_neighbors(cat, ra, dec, r))
        if got.keys() != want.keys():
            missing = sorted(want.keys() - got.keys())[:5]
            extra = sorted(got.keys() - want.keys())[:5]
            return (f"query {q} ({ra}, {dec}, r={r}): missing {missing} extra {extra}")
        for o, d in want.items():
            if got[o] != d:
                return f"query {q} ({ra}, {dec}, r={r}): objid {o} distance {got[o]!r} != {d!r}"
    return None


def pipeline_trial(seed: int, max_n: int = 500) -> str | None:
    """None if the indexed pipeline equals the brute-force pipeline on a
    small random catalog with planted clusters."""
    rng = np.random.default_rng(seed)
    kcorr = generate_synthetic_kcorr(1000, 0.5)
    dec0 = rng.uniform(-60.0, 60.0)
    ra0 = rng.uniform(20.0, 340.0)
    size = rng.uniform(0.5, 1.5)
    target = RegionBounds(ra0, ra0 + size, dec0, dec0 + size)
    geometry = RunGeometry.from_target(target, 0.5)
    n_clusters = int(rng.integers(1, 4))
    members = int(rng.integers(1, 9))
    planted = [
        PlantedCluster(float(rng.uniform(target.min_ra, target.max_ra)),
                       float(rng.uniform(target.min_dec, target.max_dec)),
                       float(kcorr.z[kcorr.nearest(rng.uniform(0.05, 0.4))]), members)
        for _ in range(n_clusters)
    ]
    n_field = max(int(rng.integers(0, max_n)) - n_clusters * (members + 1), 0)
    cat = generate_synthetic_catalog(geometry.data_area, n_field, planted, kcorr,
                                     seed=int(rng.integers(2**31)))
    fast = run_sequential(cat, geometry, kcorr)
    slow = brute_pipeline(cat, geometry, kcorr)
    for what in ("candidates", "clusters", "members"):
        a, b = getattr(fast, what), getattr(slow, what)
        if a != b:
            diff = next((f"{x} != {y}" for x, y in zip(a, b) if x != y), f"{len(a)} vs {len(b)} rows")
            return f"{what} differ: {diff}"
    return None
