"""Run geometry, declination-slab partitioning and the cluster-finding run.

A sequential run is a one-slab partitioned run; both go through
:func:`_run_partition`, so their outputs agree by construction as long as
every slab loads enough buffer data.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bcg import (
    DEFAULT_PARAMS,
    BCGParams,
    Candidate,
    CandidateSet,
    ClusterMember,
    cluster_members,
    find_candidates,
    is_cluster,
    member_radius,
)
from .catalog import GalaxyCatalog, KCorrTable, RegionBounds, fmt_float
from .zones import ZoneConfig, build_zone_table, zone_of

log = logging.getLogger(__name__)

CANDIDATE_COLUMNS = ("objid", "ra", "dec", "z", "i", "ngal", "chi2")
MEMBER_COLUMNS = ("clusterObjID", "galaxyObjID", "distance")
OUTPUT_FILES = ("candidates.csv", "clusters.csv", "members.csv")
PHASES = ("zone_build", "candidate_phase", "cluster_phase", "members_phase")


class GeometryError(ValueError):
    """The requested target/buffer geometry cannot be served by the data."""


def ra_margin(buffer_width: float, max_abs_dec: float) -> float:
    """ra extent (deg) that contains every point within ``buffer_width`` of a
    point at declination up to ``max_abs_dec``."""
    s = math.sin(math.radians(buffer_width)) / math.cos(math.radians(max_abs_dec))
    if s >= 1.0:
        raise GeometryError(
            f"a {buffer_width} deg buffer at |dec| = {max_abs_dec} reaches the pole"
        )
    return math.degrees(math.asin(s)) * (1.0 + 1e-12) + 1e-9


def expand_region(region: RegionBounds, width: float) -> RegionBounds:
    """``region`` grown by ``width`` degrees of arc on every side."""
    max_abs_dec = max(abs(region.min_dec), abs(region.max_dec))
    dra = ra_margin(width, max_abs_dec)
    return RegionBounds(
        region.min_ra - dra, region.max_ra + dra, region.min_dec - width, region.max_dec + width
    )


@dataclass(frozen=True)
class RunGeometry:
    """Target area T, candidate area B = T + buffer, data area P = B + buffer."""

    target: RegionBounds
    candidate_area: RegionBounds
    data_area: RegionBounds
    buffer_width: float = 0.5

    @classmethod
    def from_target(cls, target: RegionBounds, buffer_width: float = 0.5) -> "RunGeometry":
        if not buffer_width > 0:
            raise GeometryError("buffer width must be positive")
        b = expand_region(target, buffer_width)
        p = expand_region(b, buffer_width)
        for name, value, limit, bad in (
            ("min_ra", p.min_ra, 0.0, p.min_ra < 0.0),
            ("max_ra", p.max_ra, 360.0, p.max_ra > 360.0),
            ("min_dec", p.min_dec, -90.0, p.min_dec < -90.0),
            ("max_dec", p.max_dec, 90.0, p.max_dec > 90.0),
        ):
            if bad:
                raise GeometryError(
                    f"data area {name} = {value:.6f} crosses {limit:g}; move the target "
                    f"or shrink the buffer"
                )
        return cls(target, b, p, buffer_width)

    def check_coverage(self, coverage: RegionBounds) -> None:
        """Raise if the data area extends past the region the data covers."""
        p = self.data_area
        deficits = [
            ("min_ra", coverage.min_ra - p.min_ra),
            ("max_ra", p.max_ra - coverage.max_ra),
            ("min_dec", coverage.min_dec - p.min_dec),
            ("max_dec", p.max_dec - coverage.max_dec),
        ]
        short = [(n, d) for n, d in deficits if d > 1e-9]
        if short:
            detail = ", ".join(f"{n} short by {d:.6f} deg" for n, d in short)
            raise GeometryError(f"data coverage {coverage} does not contain data area {p}: {detail}")

    def check_kcorr(self, kcorr: KCorrTable) -> None:
        if self.buffer_width < kcorr.max_radius:
            raise GeometryError(
                f"buffer width {self.buffer_width} deg is smaller than the largest "
                f"k-correction radius {kcorr.max_radius} deg"
            )


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class Partition:
    """One declination slab.

    ``owned_target`` and ``owned_candidate`` are half-open ``[lo, hi)`` except
    in the last slab, which is closed at the top; they decide which slab
    reports a given result. ``candidate_span`` (owned target grown by one
    buffer, clipped to B) is where the slab evaluates candidates, and
    ``loaded_data`` (grown once more, clipped to P) is what it loads.
    """

    index: int
    owned_target: tuple[float, float]
    owned_candidate: tuple[float, float]
    candidate_span: tuple[float, float]
    loaded_data: tuple[float, float]
    estimated_load: int
    last: bool

    def owns(self, dec, interval):
        lo, hi = interval
        upper = (dec <= hi) if self.last else (dec < hi)
        return (dec >= lo) & upper


@dataclass(frozen=True)
class PartitionPlan:
    geometry: RunGeometry
    parts: tuple[Partition, ...]

    def __len__(self):
        return len(self.parts)

    @property
    def cuts(self) -> list[float]:
        return [p.owned_target[0] for p in self.parts[1:]]


def _slab_bounds(cuts, geometry: RunGeometry):
    t, b, p = geometry.target, geometry.candidate_area, geometry.data_area
    w = geometry.buffer_width
    edges = [t.min_dec, *cuts, t.max_dec]
    n = len(edges) - 1
    for k in range(n):
        tlo, thi = edges[k], edges[k + 1]
        own_c = (b.min_dec if k == 0 else tlo, b.max_dec if k == n - 1 else thi)
        span = (max(tlo - w, b.min_dec), min(thi + w, b.max_dec))
        loaded = (max(span[0] - w, p.min_dec), min(span[1] + w, p.max_dec))
        yield k, (tlo, thi), own_c, span, loaded, k == n - 1


def plan_partitions(galaxies: GalaxyCatalog, geometry: RunGeometry, n: int,
                    kcorr: KCorrTable | None = None,
                    config: ZoneConfig = ZoneConfig()) -> PartitionPlan:
    """Cut T into ``n`` declination slabs on zone boundaries.

    Greedy sweep over the zones of T: a slab closes once the running galaxy
    count reaches the next multiple of total/n, while keeping at least one
    non-empty zone for every slab still to come.
    """
    if n < 1:
        raise ValueError("need at least one partition")
    if kcorr is not None:
        geometry.check_kcorr(kcorr)
    t = geometry.target
    h = config.zone_height
    cuts: list[float] = []
    if n > 1:
        in_t = t.contains(galaxies.ra, galaxies.dec)
        z0, z1 = zone_of(t.min_dec, config), zone_of(t.max_dec, config)
        zt = np.clip(zone_of(galaxies.dec[in_t], config), z0, z1) - z0
        counts = np.bincount(zt, minlength=z1 - z0 + 1)
        nonempty = int((counts > 0).sum())
        if n > nonempty:
            raise ValueError(f"{n} partitions requested but the target has only {nonempty} non-empty zones")
        remaining = np.cumsum((counts > 0)[::-1])[::-1]  # non-empty zones from j onwards
        total = counts.sum()
        cum = 0
        part_nonempty = False
        for j in range(len(counts) - 1):
            cum += counts[j]
            part_nonempty |= bool(counts[j])
            needed = n - len(cuts) - 1
            if needed == 0 or not part_nonempty or remaining[j + 1] < needed:
                continue
            if cum >= total * (len(cuts) + 1) / n or remaining[j + 1] == needed:
                cuts.append((z0 + j + 1) * h - 90.0)
                part_nonempty = False
    parts = []
    for k, own_t, own_c, span, loaded, last in _slab_bounds(cuts, geometry):
        in_p = geometry.data_area.contains(galaxies.ra, galaxies.dec)
        load = int((in_p & (galaxies.dec >= loaded[0]) & (galaxies.dec <= loaded[1])).sum())
        parts.append(Partition(k, own_t, own_c, span, loaded, load, last))
    return PartitionPlan(geometry, tuple(parts))


# ---------------------------------------------------------------------------
# metrics and results


@dataclass
class PhaseMetrics:
    name: str
    wall_s: float
    items: int


@dataclass
class PartitionMetrics:
    index: int
    loaded_data: tuple[float, float]
    phases: list[PhaseMetrics] = field(default_factory=list)

    @property
    def work(self) -> int:
        return sum(p.items for p in self.phases)

    @property
    def wall_s(self) -> float:
        return sum(p.wall_s for p in self.phases)

    def phase(self, name) -> PhaseMetrics:
        return next(p for p in self.phases if p.name == name)


@dataclass
class RunMetrics:
    partitions: list[PartitionMetrics]
    wall_s: float = 0.0

    @property
    def work(self) -> int:
        return sum(p.work for p in self.partitions)

    def phase_totals(self) -> dict[str, PhaseMetrics]:
        out = {}
        for name in PHASES:
            rows = [p.phase(name) for p in self.partitions]
            out[name] = PhaseMetrics(name, sum(r.wall_s for r in rows), sum(r.items for r in rows))
        return out

    def rows(self):
        """``(partition, phase, wall_s, items)`` rows; partition ``all`` sums."""
        for p in self.partitions:
            for ph in p.phases:
                yield str(p.index), ph.name, ph.wall_s, ph.items
            yield str(p.index), "total", p.wall_s, p.work
        for ph in self.phase_totals().values():
            yield "all", ph.name, ph.wall_s, ph.items
        yield "all", "total", self.wall_s, self.work

    def report(self) -> str:
        lines = [f"{'partition':>9}  {'phase':<16}{'wall_s':>10}{'items':>10}"]
        for part, phase, wall, items in self.rows():
            lines.append(f"{part:>9}  {phase:<16}{wall:>10.3f}{items:>10d}")
        return "\n".join(lines)

    def write_csv(self, dest) -> None:
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("partition", "phase", "wall_s", "items"))
            for part, phase, wall, items in self.rows():
                w.writerow((part, phase, f"{wall:.6f}", items))


@dataclass
class RunResult:
    candidates: list[Candidate]
    clusters: list[Candidate]
    members: list[ClusterMember]
    metrics: RunMetrics

    def same_output(self, other: "RunResult") -> bool:
        return (
            self.candidates == other.candidates
            and self.clusters == other.clusters
            and self.members == other.members
        )

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / name for name in (*OUTPUT_FILES, "metrics.csv")}
        write_candidates(self.candidates, paths["candidates.csv"])
        write_candidates(self.clusters, paths["clusters.csv"])
        write_members(self.members, paths["members.csv"])
        self.metrics.write_csv(paths["metrics.csv"])
        return paths


def write_candidates(rows, dest) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CANDIDATE_COLUMNS)
        for c in rows:
            w.writerow((c.objid, fmt_float(c.ra), fmt_float(c.dec), fmt_float(c.z),
                        fmt_float(c.i), c.ngal, fmt_float(c.chi2)))


def write_members(rows, dest) -> None:
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MEMBER_COLUMNS)
        for m in rows:
            w.writerow((m.cluster_objid, m.galaxy_objid, fmt_float(m.distance)))


def read_candidates(src) -> list[Candidate]:
    with open(src, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [Candidate(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]),
                          int(r[5]), float(r[6])) for r in reader if r]


def read_members(src) -> list[ClusterMember]:
    with open(src, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [ClusterMember(int(r[0]), int(r[1]), float(r[2])) for r in reader if r]


def sort_members(members):
    return sorted(members, key=lambda m: (m.cluster_objid, m.galaxy_objid))


# ---------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class _Job:
    partition: Partition
    galaxies: GalaxyCatalog
    geometry: RunGeometry
    kcorr: KCorrTable
    params: BCGParams
    config: ZoneConfig


def _timed(metrics: PartitionMetrics, name: str, t0: float, items: int) -> float:
    t1 = time.perf_counter()
    metrics.phases.append(PhaseMetrics(name, t1 - t0, int(items)))
    return t1


def _run_partition(job: _Job):
    part, cat, geo = job.partition, job.galaxies, job.geometry
    metrics = PartitionMetrics(part.index, part.loaded_data)

    t = time.perf_counter()
    zones = build_zone_table(cat, job.config)
    t = _timed(metrics, "zone_build", t, len(zones))

    lo, hi = part.candidate_span
    evaluate = np.flatnonzero(
        geo.candidate_area.contains(cat.ra, cat.dec) & (cat.dec >= lo) & (cat.dec <= hi)
    )
    candidates = find_candidates(cat, evaluate, zones, job.kcorr, job.params)
    t = _timed(metrics, "candidate_phase", t, len(evaluate))

    cset = CandidateSet(candidates, job.config)
    tested = [c for c in candidates
              if geo.target.contains(c.ra, c.dec) and part.owns(c.dec, part.owned_target)]
    clusters = [c for c in tested if is_cluster(c, cset, job.kcorr, job.params)]
    t = _timed(metrics, "cluster_phase", t, len(tested))

    members = []
    limit = 2.0 * geo.buffer_width
    for cl in clusters:
        rad = member_radius(cl, job.kcorr)
        if rad > limit:
            raise GeometryError(
                f"cluster {cl.objid}: member radius {rad:.4f} deg exceeds the "
                f"{limit:g} deg of data loaded around the target; use a wider buffer"
            )
        members.extend(cluster_members(cl, zones, cat, job.kcorr, job.params))
    _timed(metrics, "members_phase", t, len(clusters))

    owned = [c for c in candidates if part.owns(c.dec, part.owned_candidate)]
    return owned, clusters, members, metrics


def _jobs(galaxies, plan: PartitionPlan, kcorr, params, config):
    geo = plan.geometry
    in_p = geo.data_area.contains(galaxies.ra, galaxies.dec)
    for part in plan.parts:
        lo, hi = part.loaded_data
        sl = galaxies.select(in_p & (galaxies.dec >= lo) & (galaxies.dec <= hi))
        yield _Job(part, sl, geo, kcorr, params, config)


def execute_plan(galaxies: GalaxyCatalog, plan: PartitionPlan, kcorr: KCorrTable,
                 params: BCGParams = DEFAULT_PARAMS, config: ZoneConfig = ZoneConfig(),
                 workers: int | None = None) -> RunResult:
    """Run every slab of ``plan`` (concurrently when ``workers`` > 1) and merge."""
    plan.geometry.check_kcorr(kcorr)
    t0 = time.perf_counter()
    jobs = list(_jobs(galaxies, plan, kcorr, params, config))
    workers = min(workers or os.cpu_count() or 1, len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_partition, jobs))
    else:
        outputs = [_run_partition(j) for j in jobs]

    candidates, clusters, members, per_part = [], [], [], []
    for owned, cl, mem, metrics in outputs:
        candidates.extend(owned)
        clusters.extend(cl)
        members.extend(mem)
        per_part.append(metrics)
    candidates.sort(key=lambda c: c.objid)
    clusters.sort(key=lambda c: c.objid)
    for what, rows in (("candidate", candidates), ("cluster", clusters)):
        ids = [c.objid for c in rows]
        if len(set(ids)) != len(ids):
            raise RuntimeError(f"{what} reported by more than one partition")
    metrics = RunMetrics(per_part, time.perf_counter() - t0)
    log.info("run: %d partitions, %d candidates, %d clusters, %.2fs",
             len(jobs), len(candidates), len(clusters), metrics.wall_s)
    return RunResult(candidates, clusters, sort_members(members), metrics)


def run_sequential(galaxies: GalaxyCatalog, geometry: RunGeometry, kcorr: KCorrTable,
                   params: BCGParams = DEFAULT_PARAMS,
                   config: ZoneConfig = ZoneConfig()) -> RunResult:
    plan = plan_partitions(galaxies, geometry, 1, kcorr, config)
    return execute_plan(galaxies, plan, kcorr, params, config, workers=1)


def run_partitioned(galaxies: GalaxyCatalog, geometry: RunGeometry, kcorr: KCorrTable,
                    params: BCGParams = DEFAULT_PARAMS, n: int = 1,
                    config: ZoneConfig = ZoneConfig(), workers: int | None = None) -> RunResult:
    plan = plan_partitions(galaxies, geometry, n, kcorr, config)
    return execute_plan(galaxies, plan, kcorr, params, config, workers)
