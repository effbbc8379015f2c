"""BCG likelihood, cluster-centre selection and cluster membership.

All squares are written as ``d * d`` and every logarithm goes through
:func:`likelihood`, so the batched pipeline, the per-galaxy functions and the
brute-force oracle produce bit-identical numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .catalog import Galaxy, GalaxyCatalog, KCorrEntry, KCorrTable
from .zones import ZoneConfig, ZoneTable


@dataclass(frozen=True)
class BCGParams:
    mag_dispersion: float = 0.57
    gr_pop_sigma: float = 0.05
    ri_pop_sigma: float = 0.06
    chisq_threshold: float = 7.0
    z_window: float = 0.05
    chi_tie_tol: float = 1e-5
    chi_select_tol: float = 1e-8
    member_mag_slack: float = 0.001

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"BCGParams.{name} must be positive, got {value!r}")


DEFAULT_PARAMS = BCGParams()


@dataclass(frozen=True)
class Candidate:
    objid: int
    ra: float
    dec: float
    z: float
    i: float
    ngal: int
    chi2: float


# a cluster is a candidate that won its neighbourhood; same record
Cluster = Candidate


@dataclass(frozen=True)
class ClusterMember:
    cluster_objid: int
    galaxy_objid: int
    distance: float


class RedshiftScore(NamedTuple):
    zid: int
    z: float
    chisq: float
    ngal: int


class SearchWindow(NamedTuple):
    rad: float
    imin: float
    imax: float
    grmin: float
    grmax: float
    rimin: float
    rimax: float


def _chi_square(i, gr, ri, sigmagr, sigmari, ki, kgr, kri, p: BCGParams):
    di = i - ki
    dgr = gr - kgr
    dri = ri - kri
    return (
        di * di / (p.mag_dispersion * p.mag_dispersion)
        + dgr * dgr / (sigmagr * sigmagr + p.gr_pop_sigma * p.gr_pop_sigma)
        + dri * dri / (sigmari * sigmari + p.ri_pop_sigma * p.ri_pop_sigma)
    )


def chi_square(g: Galaxy, k, p: BCGParams = DEFAULT_PARAMS):
    """Unweighted BCG chi-square of galaxy ``g`` against k-correction ``k``.

    ``k`` may be a single :class:`KCorrEntry` or a whole :class:`KCorrTable`,
    in which case one value per redshift is returned.
    """
    return _chi_square(g.i, g.gr, g.ri, g.sigmagr, g.sigmari, k.i, k.gr, k.ri, p)


def likelihood(ngal, chisq):
    """Neighbour-weighted likelihood ``ln(ngal + 1) - chisq``."""
    if np.ndim(ngal) == 0:
        return math.log(ngal + 1) - chisq
    logs = np.array([math.log(n + 1) for n in np.asarray(ngal).tolist()], dtype=np.float64)
    return logs - chisq


def r200(ngal):
    """R200 radius in Mpc for a cluster of ``ngal`` galaxies."""
    return 0.17 * ngal**0.51


def filter_redshifts(g: Galaxy, kcorr: KCorrTable, p: BCGParams = DEFAULT_PARAMS) -> list[RedshiftScore]:
    chisq = chi_square(g, kcorr, p)
    keep = np.flatnonzero(chisq < p.chisq_threshold)
    return [RedshiftScore(int(kcorr.zid[k]), float(kcorr.z[k]), float(chisq[k]), 0) for k in keep]


def _window(rows, kcorr: KCorrTable, g_i: float, p: BCGParams) -> SearchWindow:
    return SearchWindow(
        rad=float(kcorr.radius[rows].max()),
        imin=float(g_i),
        imax=float(kcorr.ilim[rows].max()),
        grmin=float(kcorr.gr[rows].min() - 2 * p.gr_pop_sigma),
        grmax=float(kcorr.gr[rows].max() + 2 * p.gr_pop_sigma),
        rimin=float(kcorr.ri[rows].min() - 2 * p.ri_pop_sigma),
        rimax=float(kcorr.ri[rows].max() + 2 * p.ri_pop_sigma),
    )


def _rows_of(scores, kcorr: KCorrTable):
    zid_to_row = {int(z): k for k, z in enumerate(kcorr.zid)}
    return np.array([zid_to_row[s.zid] for s in scores], dtype=np.int64)


def search_window(scores, kcorr: KCorrTable, g_i: float, p: BCGParams = DEFAULT_PARAMS) -> SearchWindow:
    """Neighbour search radius and magnitude/colour windows over the
    redshifts that passed the filter."""
    if not scores:
        raise ValueError("search_window needs at least one passing redshift")
    return _window(_rows_of(scores, kcorr), kcorr, g_i, p)


def _evaluate(row: int, chisq_row, catalog: GalaxyCatalog, zones: ZoneTable,
              kcorr: KCorrTable, p: BCGParams):
    """Candidate for ``catalog[row]`` given its chi-square at every redshift.

    ``zones`` must index ``catalog`` (its ``rows`` refer to catalog rows).
    """
    krows = np.flatnonzero(chisq_row < p.chisq_threshold)
    if len(krows) == 0:
        return None
    objid = catalog.objid[row]
    ra, dec, gi = float(catalog.ra[row]), float(catalog.dec[row]), float(catalog.i[row])
    w = _window(krows, kcorr, gi, p)

    nb, dist = zones.query(ra, dec, w.rad)
    fi, fgr, fri = catalog.i[nb], catalog.gr[nb], catalog.ri[nb]
    keep = (
        (catalog.objid[nb] != objid)
        & (fi >= w.imin) & (fi <= w.imax)
        & (fgr >= w.grmin) & (fgr <= w.grmax)
        & (fri >= w.rimin) & (fri <= w.rimax)
    )
    if not keep.any():
        return None
    dist, fi, fgr, fri = dist[keep], fi[keep], fgr[keep], fri[keep]

    kr = kcorr.radius[krows][:, None]
    kilim = kcorr.ilim[krows][:, None]
    kgr = kcorr.gr[krows][:, None]
    kri = kcorr.ri[krows][:, None]
    hit = (
        (dist < kr)
        & (fi >= gi) & (fi <= kilim)
        & (fgr >= kgr - p.gr_pop_sigma) & (fgr <= kgr + p.gr_pop_sigma)
        & (fri >= kri - p.ri_pop_sigma) & (fri <= kri + p.ri_pop_sigma)
    )
    ngal = hit.sum(axis=1)
    has = ngal > 0
    if not has.any():
        return None
    weighted = likelihood(ngal, chisq_row[krows])
    best = weighted[has].max()
    # ties: lowest zid among rows that have neighbours
    pick = np.flatnonzero(has & (np.abs(weighted - best) < p.chi_select_tol))[0]
    return Candidate(
        objid=int(objid), ra=ra, dec=dec, z=float(kcorr.z[krows[pick]]), i=gi,
        ngal=int(ngal[pick]) + 1, chi2=float(best),
    )


def bcg_candidate(g: Galaxy, zones: ZoneTable, galaxies: GalaxyCatalog, kcorr: KCorrTable,
                  p: BCGParams = DEFAULT_PARAMS) -> Candidate | None:
    """Candidate record for ``g``, or None if it is not a plausible BCG.

    ``zones`` must have been built from ``galaxies``.
    """
    row = galaxies.row_of(g.objid)
    return _evaluate(row, chi_square(galaxies[row], kcorr, p), galaxies, zones, kcorr, p)


def chi_square_block(catalog: GalaxyCatalog, rows, kcorr: KCorrTable, p: BCGParams):
    """Chi-square of many galaxies at every redshift, shape (len(rows), len(kcorr))."""
    c = lambda a: a[rows][:, None]  # noqa: E731
    return _chi_square(
        c(catalog.i), c(catalog.gr), c(catalog.ri), c(catalog.sigmagr), c(catalog.sigmari),
        kcorr.i, kcorr.gr, kcorr.ri, p,
    )


def find_candidates(catalog: GalaxyCatalog, rows, zones: ZoneTable, kcorr: KCorrTable,
                    p: BCGParams = DEFAULT_PARAMS, block: int = 2048) -> list[Candidate]:
    """Candidates among ``catalog[rows]``; the filter step runs in blocks."""
    rows = np.asarray(rows, dtype=np.int64)
    out = []
    for start in range(0, len(rows), block):
        chunk = rows[start:start + block]
        chisq = chi_square_block(catalog, chunk, kcorr, p)
        for j in np.flatnonzero((chisq < p.chisq_threshold).any(axis=1)):
            cand = _evaluate(int(chunk[j]), chisq[j], catalog, zones, kcorr, p)
            if cand is not None:
                out.append(cand)
    return out


class CandidateSet:
    """Frozen candidate collection with a zone index for neighbourhood queries."""

    def __init__(self, candidates, config: ZoneConfig = ZoneConfig()):
        self.candidates = list(candidates)
        self.objid = np.array([c.objid for c in self.candidates], dtype=np.int64)
        self.ra = np.array([c.ra for c in self.candidates], dtype=np.float64)
        self.dec = np.array([c.dec for c in self.candidates], dtype=np.float64)
        self.z = np.array([c.z for c in self.candidates], dtype=np.float64)
        self.chi2 = np.array([c.chi2 for c in self.candidates], dtype=np.float64)
        self.zones = ZoneTable(self.objid, self.ra, self.dec, config)

    def __len__(self):
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)


def _kcorr_row(kcorr: KCorrTable, z: float, who) -> int:
    try:
        return kcorr.index_of(z)
    except KeyError:
        raise ValueError(f"corrupt candidate {who}: z={z!r} matches no k-correction entry") from None


def is_cluster(c: Candidate, candidates: CandidateSet, kcorr: KCorrTable,
               p: BCGParams = DEFAULT_PARAMS) -> bool:
    """True if ``c`` has the best likelihood among candidates near it in
    position and redshift (itself included)."""
    rad = float(kcorr.radius[_kcorr_row(kcorr, c.z, c.objid)])
    nb, _ = candidates.zones.query(c.ra, c.dec, rad)
    z = candidates.z[nb]
    sel = (z >= c.z - p.z_window) & (z <= c.z + p.z_window)
    if not sel.any():
        return False
    best = candidates.chi2[nb][sel].max()
    return bool(abs(best - c.chi2) < p.chi_tie_tol)


def member_radius(cl: Candidate, kcorr: KCorrTable) -> float:
    return float(kcorr.radius[_kcorr_row(kcorr, cl.z, cl.objid)]) * r200(cl.ngal)


def cluster_members(cl: Cluster, zones: ZoneTable, galaxies: GalaxyCatalog, kcorr: KCorrTable,
                    p: BCGParams = DEFAULT_PARAMS) -> list[ClusterMember]:
    """The BCG itself (distance 0) followed by its member galaxies."""
    k = _kcorr_row(kcorr, cl.z, cl.objid)
    rad = float(kcorr.radius[k]) * r200(cl.ngal)
    kgr, kri, kilim = kcorr.gr[k], kcorr.ri[k], kcorr.ilim[k]
    out = [ClusterMember(cl.objid, cl.objid, 0.0)]
    nb, dist = zones.query(cl.ra, cl.dec, rad)
    gi, ggr, gri = galaxies.i[nb], galaxies.gr[nb], galaxies.ri[nb]
    keep = (
        (galaxies.objid[nb] != cl.objid)
        & (dist < rad)
        & (gi >= cl.i - p.member_mag_slack) & (gi <= kilim)
        & (ggr >= kgr - p.gr_pop_sigma) & (ggr <= kgr + p.gr_pop_sigma)
        & (gri >= kri - p.ri_pop_sigma) & (gri <= kri + p.ri_pop_sigma)
    )
    for o, d in zip(galaxies.objid[nb][keep].tolist(), dist[keep].tolist()):
        out.append(ClusterMember(cl.objid, o, d))
    return out


def kcorr_entry(kcorr: KCorrTable, z: float) -> KCorrEntry:
    return kcorr[_kcorr_row(kcorr, z, "lookup")]
