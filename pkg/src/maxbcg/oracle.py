"""Brute-force reference implementations for validating the indexed engine.

Nothing here uses zones, sorting or partitions: every spatial query scans
the whole catalog. Only the scalar formulas (chi-square, likelihood, r200,
unit vectors) are shared with the engine.
"""

from __future__ import annotations

import math
import time

import numpy as np

from .bcg import (
    DEFAULT_PARAMS,
    BCGParams,
    Candidate,
    ClusterMember,
    chi_square,
    likelihood,
    r200,
)
from .catalog import GalaxyCatalog, KCorrTable
from .partition import PartitionMetrics, PhaseMetrics, RunGeometry, RunMetrics, RunResult
from .zones import NeighborHit, unit_vector

_D2R = math.pi / 180.0


def _scan(cx, cy, cz, ra, dec, r):
    qx, qy, qz = unit_vector(ra, dec)
    c2 = (cx - qx) ** 2 + (cy - qy) ** 2 + (cz - qz) ** 2
    limit = 4.0 * math.sin((r / 2.0) * _D2R) ** 2
    hit = np.flatnonzero(c2 < limit)
    return hit, np.sqrt(c2[hit]) / _D2R


def brute_neighbors(galaxies, ra: float, dec: float, r: float) -> list[NeighborHit]:
    """Every object within ``r`` degrees of (ra, dec), in input order."""
    if len(galaxies.objid) == 0:
        return []
    cx, cy, cz = unit_vector(galaxies.ra, galaxies.dec)
    hit, dist = _scan(cx, cy, cz, float(ra), float(dec), float(r))
    return [NeighborHit(int(galaxies.objid[k]), float(d)) for k, d in zip(hit, dist)]


def _candidate(k, cat: GalaxyCatalog, vec, kcorr: KCorrTable, p: BCGParams):
    g = cat[k]
    chisq = chi_square(g, kcorr, p)
    passing = [j for j in range(len(kcorr)) if chisq[j] < p.chisq_threshold]
    if not passing:
        return None
    rad = max(kcorr.radius[j] for j in passing)
    imax = max(kcorr.ilim[j] for j in passing)
    grmin = min(kcorr.gr[j] for j in passing) - 2 * p.gr_pop_sigma
    grmax = max(kcorr.gr[j] for j in passing) + 2 * p.gr_pop_sigma
    rimin = min(kcorr.ri[j] for j in passing) - 2 * p.ri_pop_sigma
    rimax = max(kcorr.ri[j] for j in passing) + 2 * p.ri_pop_sigma

    hit, dist = _scan(*vec, g.ra, g.dec, float(rad))
    friends = [
        (d, cat.i[f], cat.gr[f], cat.ri[f])
        for f, d in zip(hit, dist)
        if cat.objid[f] != g.objid
        and g.i <= cat.i[f] <= imax
        and grmin <= cat.gr[f] <= grmax
        and rimin <= cat.ri[f] <= rimax
    ]

    best = None
    scores = []
    for j in passing:
        ngal = sum(
            1
            for d, fi, fgr, fri in friends
            if d < kcorr.radius[j]
            and g.i <= fi <= kcorr.ilim[j]
            and kcorr.gr[j] - p.gr_pop_sigma <= fgr <= kcorr.gr[j] + p.gr_pop_sigma
            and kcorr.ri[j] - p.ri_pop_sigma <= fri <= kcorr.ri[j] + p.ri_pop_sigma
        )
        w = likelihood(ngal, float(chisq[j]))
        scores.append((j, ngal, w))
        if ngal > 0 and (best is None or w > best):
            best = w
    if best is None:
        return None
    j, ngal, _ = next(s for s in scores if s[1] > 0 and abs(s[2] - best) < p.chi_select_tol)
    return Candidate(g.objid, g.ra, g.dec, float(kcorr.z[j]), g.i, ngal + 1, float(best))


def _kcorr_index(kcorr: KCorrTable, z: float) -> int:
    for j in range(len(kcorr)):
        if abs(kcorr.z[j] - z) < 1e-7:
            return j
    raise ValueError(f"no k-correction entry at z={z}")


def brute_pipeline(galaxies: GalaxyCatalog, geometry: RunGeometry, kcorr: KCorrTable,
                   p: BCGParams = DEFAULT_PARAMS) -> RunResult:
    """The full find-candidates / pick-centres / collect-members pipeline
    by exhaustive scans."""
    t0 = time.perf_counter()
    cat = galaxies.in_region(geometry.data_area)
    vec = unit_vector(cat.ra, cat.dec)

    candidates = []
    for k in range(len(cat)):
        if geometry.candidate_area.contains(cat.ra[k], cat.dec[k]):
            c = _candidate(k, cat, vec, kcorr, p)
            if c is not None:
                candidates.append(c)
    candidates.sort(key=lambda c: c.objid)

    cvec = unit_vector(np.array([c.ra for c in candidates]), np.array([c.dec for c in candidates]))
    clusters = []
    for c in candidates:
        if not geometry.target.contains(c.ra, c.dec):
            continue
        rad = float(kcorr.radius[_kcorr_index(kcorr, c.z)])
        hit, _ = _scan(*cvec, c.ra, c.dec, rad)
        near = [candidates[h].chi2 for h in hit
                if c.z - p.z_window <= candidates[h].z <= c.z + p.z_window]
        if near and abs(max(near) - c.chi2) < p.chi_tie_tol:
            clusters.append(c)

    members = []
    for cl in clusters:
        j = _kcorr_index(kcorr, cl.z)
        rad = float(kcorr.radius[j]) * r200(cl.ngal)
        members.append(ClusterMember(cl.objid, cl.objid, 0.0))
        hit, dist = _scan(*vec, cl.ra, cl.dec, rad)
        for f, d in zip(hit, dist):
            if (
                cat.objid[f] != cl.objid
                and d < rad
                and cl.i - p.member_mag_slack <= cat.i[f] <= kcorr.ilim[j]
                and kcorr.gr[j] - p.gr_pop_sigma <= cat.gr[f] <= kcorr.gr[j] + p.gr_pop_sigma
                and kcorr.ri[j] - p.ri_pop_sigma <= cat.ri[f] <= kcorr.ri[j] + p.ri_pop_sigma
            ):
                members.append(ClusterMember(cl.objid, int(cat.objid[f]), float(d)))
    members.sort(key=lambda m: (m.cluster_objid, m.galaxy_objid))

    wall = time.perf_counter() - t0
    metrics = PartitionMetrics(0, (geometry.data_area.min_dec, geometry.data_area.max_dec), [
        PhaseMetrics("zone_build", 0.0, 0),
        PhaseMetrics("candidate_phase", wall, len(cat)),
        PhaseMetrics("cluster_phase", 0.0, len(candidates)),
        PhaseMetrics("members_phase", 0.0, len(clusters)),
    ])
    return RunResult(candidates, clusters, members, RunMetrics([metrics], wall))
