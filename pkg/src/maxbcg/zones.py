"""Declination-zone index and cone search on the celestial sphere.

Galaxies are bucketed into fixed-height declination bands and sorted by ra
inside each band, so a cone search is a handful of interval scans followed
by an exact chord-length test on unit vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

D2R = math.pi / 180.0
DEFAULT_ZONE_HEIGHT = 30.0 / 3600.0

# zone keys are zone_id * _KEY_STRIDE + ra; stride > 360 keeps zones apart
_KEY_STRIDE = 400.0


@dataclass(frozen=True)
class ZoneConfig:
    zone_height: float = DEFAULT_ZONE_HEIGHT
    epsilon: float = 1e-9

    def __post_init__(self):
        if not (self.zone_height > 0 and self.epsilon > 0):
            raise ValueError("zone_height and epsilon must be positive")

    @property
    def max_zone(self) -> int:
        return math.floor(180.0 / self.zone_height)


class NeighborHit(NamedTuple):
    objid: int
    distance: float


class ZoneEntry(NamedTuple):
    zone_id: int
    objid: int
    ra: float
    dec: float
    cx: float
    cy: float
    cz: float


def zone_of(dec, config: ZoneConfig = ZoneConfig()):
    """Zone id ``floor((dec + 90) / zone_height)``; scalar or array."""
    if np.ndim(dec) == 0:
        return math.floor((dec + 90.0) / config.zone_height)
    return np.floor((np.asarray(dec, dtype=np.float64) + 90.0) / config.zone_height).astype(np.int64)


def unit_vector(ra, dec):
    """Cartesian unit vector(s) for ra/dec in degrees.

    Evaluated element by element with :mod:`math` so that a point gets the
    same bits whether it is converted alone or as part of a column; the
    self-match at distance exactly 0 depends on it.
    """
    if np.ndim(ra) == 0:
        r, d = ra * D2R, dec * D2R
        cd = math.cos(d)
        return cd * math.cos(r), cd * math.sin(r), math.sin(d)
    ra = np.asarray(ra, dtype=np.float64)
    dec = np.asarray(dec, dtype=np.float64)
    n = len(ra)
    cx = np.empty(n)
    cy = np.empty(n)
    cz = np.empty(n)
    cos, sin = math.cos, math.sin
    for k, (r, d) in enumerate(zip((ra * D2R).tolist(), (dec * D2R).tolist())):
        cd = cos(d)
        cx[k] = cd * cos(r)
        cy[k] = cd * sin(r)
        cz[k] = sin(d)
    return cx, cy, cz


def chord_limit(r: float) -> float:
    """Squared chord length of an arc of ``r`` degrees."""
    return 4.0 * math.sin((r / 2.0) * D2R) ** 2


def _band_half_width(dec, r, lo, hi):
    """Largest ra half-width (deg) of the cap (dec, r) within dec bands [lo, hi].

    Vectorised over bands. ``inf`` marks bands where the cap wraps the pole.
    """
    lo = np.maximum(lo, dec - r)
    hi = np.minimum(hi, dec + r)
    # widest point of a cap is at sin(d) = sin(dec) / cos(r)
    s = math.sin(dec * D2R) / math.cos(r * D2R)
    if abs(s) >= 1.0:
        return np.full(np.shape(lo), np.inf)
    d = np.clip(math.asin(s) / D2R, lo, hi)
    cosprod = np.cos(d * D2R) * math.cos(dec * D2R)
    h = (math.sin(r * D2R / 2.0) ** 2 - np.sin((d - dec) * D2R / 2.0) ** 2) / np.maximum(cosprod, 1e-300)
    out = 2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))) / D2R
    return np.where(h >= 1.0, np.inf, out)


class ZoneTable:
    """Immutable zone index over (objid, ra, dec) columns.

    ``rows`` maps each entry, stored in (zone, ra, objid) order, back to its
    position in the source columns so callers can join other attributes.
    """

    def __init__(self, objid, ra, dec, config: ZoneConfig = ZoneConfig()):
        objid = np.asarray(objid, dtype=np.int64)
        ra = np.asarray(ra, dtype=np.float64)
        dec = np.asarray(dec, dtype=np.float64)
        self.config = config
        self._source_objid = objid
        zid = zone_of(dec, config) if len(dec) else np.empty(0, dtype=np.int64)
        order = np.lexsort((objid, ra, zid))
        self.rows = order
        self.zone_id = zid[order]
        self.objid = objid[order]
        self.ra = ra[order]
        self.dec = dec[order]
        self.cx, self.cy, self.cz = unit_vector(self.ra, self.dec)
        self._keys = self.zone_id * _KEY_STRIDE + self.ra
        for arr in (self.rows, self.zone_id, self.objid, self.ra, self.dec,
                    self.cx, self.cy, self.cz, self._keys):
            arr.flags.writeable = False

    def __len__(self):
        return len(self.objid)

    @property
    def zones(self) -> dict[int, list[ZoneEntry]]:
        out: dict[int, list[ZoneEntry]] = {}
        for k in range(len(self)):
            z = int(self.zone_id[k])
            out.setdefault(z, []).append(ZoneEntry(
                z, int(self.objid[k]), float(self.ra[k]), float(self.dec[k]),
                float(self.cx[k]), float(self.cy[k]), float(self.cz[k]),
            ))
        return out

    def _ra_half_widths(self, dec, r, zones):
        """Per-zone ra half-width used to prune the scan."""
        h, eps = self.config.zone_height, self.config.epsilon
        cen = zone_of(dec, self.config)
        zone_x = np.where(zones < cen, zones + 1, zones)
        dec_at_zone = zone_x * h - 90.0
        x = np.sqrt(np.abs(r * r - (dec - dec_at_zone) ** 2)) / (np.cos(np.abs(dec_at_zone) * D2R) + eps)
        x[zones == cen] = r / math.cos(abs(dec) * D2R) + eps
        # the planar estimate above can be narrower than the true spherical
        # cap; never prune below the exact width
        exact = _band_half_width(dec, r, zones * h - 90.0, (zones + 1) * h - 90.0)
        return np.maximum(x, exact * (1.0 + 1e-9) + eps)

    def query(self, ra: float, dec: float, r: float):
        """Source rows and chord-derived distances (deg) of hits within ``r``.

        Hits are in (zone, ra) scan order. The query point itself, if it is
        in the table, comes back at distance 0.
        """
        ra, dec, r = float(ra), float(dec), float(r)
        if len(self) == 0:
            return np.empty(0, dtype=np.int64), np.empty(0)
        h = self.config.zone_height
        zmin = max(math.floor((dec - r + 90.0) / h), 0)
        zmax = min(math.floor((dec + r + 90.0) / h), self.config.max_zone)
        zones = np.arange(zmin, zmax + 1, dtype=np.int64)
        x = self._ra_half_widths(dec, r, zones)

        base = zones * _KEY_STRIDE
        lo = np.searchsorted(self._keys, base + np.maximum(ra - x, -1.0), side="left")
        hi = np.searchsorted(self._keys, base + np.minimum(ra + x, 361.0), side="right")
        lens = hi - lo
        total = int(lens.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64), np.empty(0)
        idx = np.arange(total) + np.repeat(lo - (np.cumsum(lens) - lens), lens)

        xk = x[self.zone_id[idx] - zmin]
        qx, qy, qz = unit_vector(ra, dec)
        chord2 = (self.cx[idx] - qx) ** 2 + (self.cy[idx] - qy) ** 2 + (self.cz[idx] - qz) ** 2
        ok = (
            (self.ra[idx] >= ra - xk)
            & (self.ra[idx] <= ra + xk)
            & (self.dec[idx] >= dec - r)
            & (self.dec[idx] <= dec + r)
            & (chord2 < chord_limit(r))
        )
        idx = idx[ok]
        return self.rows[idx], np.sqrt(chord2[ok]) / D2R

    def neighbors(self, ra: float, dec: float, r: float) -> list[NeighborHit]:
        rows, dist = self.query(ra, dec, r)
        return [NeighborHit(int(o), float(d)) for o, d in zip(self._source_objid[rows], dist)]


def build_zone_table(galaxies, config: ZoneConfig = ZoneConfig()) -> ZoneTable:
    """Zone index over anything with ``objid``, ``ra`` and ``dec`` columns."""
    return ZoneTable(galaxies.objid, galaxies.ra, galaxies.dec, config)


def neighbors(table: ZoneTable, ra: float, dec: float, r: float) -> list[NeighborHit]:
    return table.neighbors(ra, dec, r)
