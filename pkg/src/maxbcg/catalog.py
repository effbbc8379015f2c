"""Galaxy catalogs, k-correction tables and synthetic test data.

Catalogs are stored column-wise (one numpy array per field) because every
downstream stage works on whole columns; :class:`Galaxy` is the row view.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

RAW_COLUMNS = ("objid", "ra", "dec", "dered_g", "dered_r", "dered_i")
GALAXY_COLUMNS = ("objid", "ra", "dec", "i", "gr", "ri", "sigmagr", "sigmari")
KCORR_COLUMNS = ("zid", "z", "i", "ilim", "ug", "gr", "ri", "iz", "radius")

# angular size of 1 Mpc: 0.74 deg at z=0.05 (r200(100) = 1.78 Mpc spans 0.74 deg)
ANGULAR_SCALE = 0.05 * 0.74 / 1.78
REDSHIFT_STEP = 0.001


class CatalogFormatError(ValueError):
    """A catalog or table file could not be parsed or failed validation."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def fmt_float(x) -> str:
    """Shortest decimal string that round-trips a float64 exactly."""
    return repr(float(x))


@dataclass(frozen=True)
class RegionBounds:
    """Closed ra/dec box in degrees. Must not straddle ra = 0/360."""

    min_ra: float
    max_ra: float
    min_dec: float
    max_dec: float

    def __post_init__(self):
        if not (self.min_ra < self.max_ra and self.min_dec < self.max_dec):
            raise ValueError(f"empty or inverted region: {self}")

    @classmethod
    def parse(cls, text: str) -> "RegionBounds":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected MINRA,MAXRA,MINDEC,MAXDEC, got {text!r}")
        return cls(*(float(p) for p in parts))

    def contains(self, ra, dec):
        """Closed-interval membership (``BETWEEN`` semantics); vectorised."""
        return (
            (ra >= self.min_ra)
            & (ra <= self.max_ra)
            & (dec >= self.min_dec)
            & (dec <= self.max_dec)
        )

    def contains_region(self, other: "RegionBounds") -> bool:
        return (
            self.min_ra <= other.min_ra
            and other.max_ra <= self.max_ra
            and self.min_dec <= other.min_dec
            and other.max_dec <= self.max_dec
        )

    def __str__(self):
        return f"{self.min_ra:g},{self.max_ra:g},{self.min_dec:g},{self.max_dec:g}"


class RawGalaxy(NamedTuple):
    objid: int
    ra: float
    dec: float
    g: float
    r: float
    i: float


class Galaxy(NamedTuple):
    objid: int
    ra: float
    dec: float
    i: float
    gr: float
    ri: float
    sigmagr: float
    sigmari: float


def color_errors(i):
    """Photometric errors on g-r and r-i as a function of i magnitude."""
    sigmagr = 2.089 * np.power(10.0, 0.228 * i - 6.0)
    sigmari = 4.266 * np.power(10.0, 0.206 * i - 6.0)
    return sigmagr, sigmari


def derive_galaxy(raw: RawGalaxy) -> Galaxy:
    sigmagr = 2.089 * math.pow(10.0, 0.228 * raw.i - 6.0)
    sigmari = 4.266 * math.pow(10.0, 0.206 * raw.i - 6.0)
    return Galaxy(
        int(raw.objid),
        float(raw.ra),
        float(raw.dec),
        float(raw.i),
        float(raw.g - raw.r),
        float(raw.r - raw.i),
        sigmagr,
        sigmari,
    )


class GalaxyCatalog:
    """Column store of :class:`Galaxy` records.

    Columns are read-only numpy arrays; derived catalogs (``take``,
    ``select``) copy, so a catalog can be shared across workers safely.
    """

    __slots__ = GALAXY_COLUMNS

    def __init__(self, objid, ra, dec, i, gr, ri, sigmagr, sigmari):
        cols = dict(
            objid=np.asarray(objid, dtype=np.int64),
            ra=np.asarray(ra, dtype=np.float64),
            dec=np.asarray(dec, dtype=np.float64),
            i=np.asarray(i, dtype=np.float64),
            gr=np.asarray(gr, dtype=np.float64),
            ri=np.asarray(ri, dtype=np.float64),
            sigmagr=np.asarray(sigmagr, dtype=np.float64),
            sigmari=np.asarray(sigmari, dtype=np.float64),
        )
        n = len(cols["objid"])
        for name, arr in cols.items():
            if arr.ndim != 1 or len(arr) != n:
                raise ValueError(f"column {name!r} must be 1-d of length {n}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __setattr__(self, name, value):
        raise AttributeError("GalaxyCatalog is immutable")

    def __getstate__(self):
        return {name: getattr(self, name) for name in GALAXY_COLUMNS}

    def __setstate__(self, state):
        for name in GALAXY_COLUMNS:
            arr = np.array(state[name])
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls) -> "GalaxyCatalog":
        return cls(*([] for _ in GALAXY_COLUMNS))

    @classmethod
    def from_galaxies(cls, galaxies: Iterable[Galaxy]) -> "GalaxyCatalog":
        rows = list(galaxies)
        if not rows:
            return cls.empty()
        return cls(*zip(*rows))

    @classmethod
    def concat(cls, parts: Sequence["GalaxyCatalog"]) -> "GalaxyCatalog":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in GALAXY_COLUMNS))

    def __len__(self):
        return len(self.objid)

    def __getitem__(self, k: int) -> Galaxy:
        return Galaxy(
            int(self.objid[k]),
            *(float(getattr(self, c)[k]) for c in GALAXY_COLUMNS[1:]),
        )

    def __iter__(self) -> Iterator[Galaxy]:
        for k in range(len(self)):
            yield self[k]

    def __eq__(self, other):
        if not isinstance(other, GalaxyCatalog):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in GALAXY_COLUMNS)

    def __repr__(self):
        return f"GalaxyCatalog(n={len(self)})"

    def take(self, index) -> "GalaxyCatalog":
        return GalaxyCatalog(*(getattr(self, c)[index] for c in GALAXY_COLUMNS))

    def select(self, mask) -> "GalaxyCatalog":
        return self.take(np.flatnonzero(mask))

    def in_region(self, region: RegionBounds) -> "GalaxyCatalog":
        return self.select(region.contains(self.ra, self.dec))

    def sorted_by_objid(self) -> "GalaxyCatalog":
        return self.take(np.argsort(self.objid, kind="stable"))

    def row_of(self, objid: int) -> int:
        hits = np.flatnonzero(self.objid == objid)
        if len(hits) == 0:
            raise KeyError(objid)
        return int(hits[0])


# ---------------------------------------------------------------------------
# k-correction table


@dataclass(frozen=True)
class KCorrEntry:
    zid: int
    z: float
    i: float
    ilim: float
    ug: float
    gr: float
    ri: float
    iz: float
    radius: float


class KCorrTable:
    """Expected BCG magnitude, colours and 1 Mpc angular size per redshift."""

    Z_MATCH_TOL = 1e-7

    def __init__(self, zid, z, i, ilim, ug, gr, ri, iz, radius):
        self.zid = np.asarray(zid, dtype=np.int64)
        self.z = np.asarray(z, dtype=np.float64)
        self.i = np.asarray(i, dtype=np.float64)
        self.ilim = np.asarray(ilim, dtype=np.float64)
        self.ug = np.asarray(ug, dtype=np.float64)
        self.gr = np.asarray(gr, dtype=np.float64)
        self.ri = np.asarray(ri, dtype=np.float64)
        self.iz = np.asarray(iz, dtype=np.float64)
        self.radius = np.asarray(radius, dtype=np.float64)
        _check_kcorr_columns(self)
        for c in KCORR_COLUMNS:
            getattr(self, c).flags.writeable = False

    @classmethod
    def from_entries(cls, entries: Iterable[KCorrEntry]) -> "KCorrTable":
        rows = [tuple(getattr(e, c) for c in KCORR_COLUMNS) for e in entries]
        return cls(*(zip(*rows) if rows else ([] for _ in KCORR_COLUMNS)))

    @property
    def entries(self) -> list[KCorrEntry]:
        return [self[k] for k in range(len(self))]

    @property
    def max_radius(self) -> float:
        return float(self.radius.max()) if len(self) else 0.0

    def __len__(self):
        return len(self.z)

    def __getitem__(self, k: int) -> KCorrEntry:
        return KCorrEntry(
            int(self.zid[k]), *(float(getattr(self, c)[k]) for c in KCORR_COLUMNS[1:])
        )

    def __eq__(self, other):
        if not isinstance(other, KCorrTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c)) for c in KCORR_COLUMNS)

    def index_of(self, z: float) -> int:
        """Row whose redshift matches ``z`` within 1e-7; ``KeyError`` if none."""
        k = int(np.searchsorted(self.z, z))
        for j in (k - 1, k):
            if 0 <= j < len(self) and abs(self.z[j] - z) < self.Z_MATCH_TOL:
                return j
        raise KeyError(f"no k-correction entry at z={z!r}")

    def nearest(self, z: float) -> int:
        return int(np.argmin(np.abs(self.z - z)))


def _check_kcorr_columns(t: KCorrTable):
    n = len(t.z)
    for c in KCORR_COLUMNS:
        if getattr(t, c).shape != (n,):
            raise CatalogFormatError(f"k-correction column {c!r} has wrong shape")
    if n == 0:
        raise CatalogFormatError("k-correction table is empty")
    # rows are reported 1-based, counting the header as row 0
    bad = np.flatnonzero(~(t.radius > 0))
    if len(bad):
        raise CatalogFormatError(f"row {bad[0] + 1}: radius must be positive")
    bad = np.flatnonzero(np.diff(t.z) <= 0)
    if len(bad):
        raise CatalogFormatError(f"row {bad[0] + 2}: z not strictly increasing")
    bad = np.flatnonzero(np.diff(t.radius) >= 0)
    if len(bad):
        raise CatalogFormatError(f"row {bad[0] + 2}: radius not strictly decreasing")


def generate_synthetic_kcorr(steps: int = 1000, radius_cap: float = 0.5) -> KCorrTable:
    """Smooth synthetic k-correction table on a 0.001 redshift grid.

    ``radius(z) = min(radius_cap, A / z)`` with ``A`` fixed so that 1 Mpc
    subtends 0.74/1.78 deg at z = 0.05. A capped plateau would violate the
    strictly-decreasing radius invariant, so capped rows taper linearly from
    ``radius_cap`` towards the first uncapped value instead.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if radius_cap <= 0:
        raise ValueError("radius_cap must be positive")
    zid = np.arange(1, steps + 1)
    z = zid * REDSHIFT_STEP
    radius = ANGULAR_SCALE / z
    capped = radius >= radius_cap
    if capped.any():
        ncap = int(capped.sum())
        floor = radius[ncap] if ncap < steps else radius_cap * 0.5
        # strictly inside (floor, radius_cap], decreasing
        taper = radius_cap - (radius_cap - floor) * np.arange(ncap) / ncap
        radius = np.where(capped, 0.0, radius)
        radius[:ncap] = taper
    i = 11.5 + 5.0 * np.log10(1.0 + 20.0 * z)
    ilim = i + 3.0
    # steep colour evolution keeps a member's best redshift near its BCG's
    gr = 0.5 + 3.0 * z
    ri = 0.2 + 1.2 * z
    ug = gr + 1.2
    iz = 0.15 + 0.4 * z
    return KCorrTable(zid, z, i, ilim, ug, gr, ri, iz, radius)


# ---------------------------------------------------------------------------
# CSV input / output


def _open_text(source, mode="r"):
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        return open(source, mode, newline="", encoding="utf-8"), True
    return source, False


def _check_header(header, expected, what):
    if header is None:
        raise CatalogFormatError(f"{what}: missing header", line=1)
    got = tuple(h.strip() for h in header)
    if got != expected:
        raise CatalogFormatError(
            f"{what}: expected header {','.join(expected)}, got {','.join(got)}", line=1
        )


def read_raw_galaxies(source) -> Iterator[tuple[int, RawGalaxy]]:
    """Yield ``(line_number, RawGalaxy)`` from a raw photometry CSV."""
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        _check_header(next(reader, None), RAW_COLUMNS, "raw galaxy CSV")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(RAW_COLUMNS):
                raise CatalogFormatError(
                    f"expected {len(RAW_COLUMNS)} fields, got {len(row)}", line=line
                )
            try:
                raw = RawGalaxy(int(row[0]), *(float(x) for x in row[1:]))
            except ValueError as exc:
                raise CatalogFormatError(f"malformed value ({exc})", line=line) from None
            if not (0.0 <= raw.ra < 360.0 and -90.0 <= raw.dec <= 90.0):
                raise CatalogFormatError(f"ra/dec out of range: {raw.ra}, {raw.dec}", line=line)
            if not all(math.isfinite(v) for v in raw[3:]):
                raise CatalogFormatError("non-finite magnitude", line=line)
            yield line, raw
    finally:
        if close:
            fh.close()


def ingest_galaxies(source, region: RegionBounds) -> GalaxyCatalog:
    """Derive colours/errors for every raw row inside ``region`` (closed).

    ``source`` is a path, a text stream of raw CSV, or an iterable of
    :class:`RawGalaxy`.
    """
    if isinstance(source, (str, bytes, io.IOBase)) or hasattr(source, "__fspath__"):
        rows = read_raw_galaxies(source)
    else:
        rows = ((k + 2, raw) for k, raw in enumerate(source))
    seen: dict[int, int] = {}
    out = []
    for line, raw in rows:
        if raw.objid in seen:
            raise CatalogFormatError(
                f"duplicate objid {raw.objid} (first seen on line {seen[raw.objid]})", line=line
            )
        seen[raw.objid] = line
        if region.min_ra <= raw.ra <= region.max_ra and region.min_dec <= raw.dec <= region.max_dec:
            out.append(derive_galaxy(raw))
    return GalaxyCatalog.from_galaxies(out)


def read_galaxy_csv(source) -> GalaxyCatalog:
    """Read a derived-galaxy CSV (``objid,ra,dec,i,gr,ri,sigmagr,sigmari``)."""
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        _check_header(next(reader, None), GALAXY_COLUMNS, "galaxy CSV")
        rows = []
        seen = set()
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(GALAXY_COLUMNS):
                raise CatalogFormatError(
                    f"expected {len(GALAXY_COLUMNS)} fields, got {len(row)}", line=line
                )
            try:
                g = Galaxy(int(row[0]), *(float(x) for x in row[1:]))
            except ValueError as exc:
                raise CatalogFormatError(f"malformed value ({exc})", line=line) from None
            if g.objid in seen:
                raise CatalogFormatError(f"duplicate objid {g.objid}", line=line)
            seen.add(g.objid)
            rows.append(g)
    finally:
        if close:
            fh.close()
    return GalaxyCatalog.from_galaxies(rows)


def read_catalog(path) -> GalaxyCatalog:
    """Read either CSV flavour, picking raw or derived by the header."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = tuple(h.strip() for h in next(csv.reader(fh), []))
    if header == RAW_COLUMNS:
        everything = RegionBounds(0.0, 360.0, -90.0, 90.0)
        return ingest_galaxies(path, everything)
    return read_galaxy_csv(path)


def write_galaxy_csv(catalog: GalaxyCatalog, dest) -> None:
    fh, close = _open_text(dest, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GALAXY_COLUMNS)
        for g in catalog:
            w.writerow([g.objid, *(fmt_float(v) for v in g[1:])])
    finally:
        if close:
            fh.close()


def load_kcorr(source) -> KCorrTable:
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        _check_header(next(reader, None), KCORR_COLUMNS, "k-correction CSV")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(KCORR_COLUMNS):
                raise CatalogFormatError(
                    f"row {len(rows) + 1}: expected {len(KCORR_COLUMNS)} fields",
                    line=reader.line_num,
                )
            try:
                rows.append((int(row[0]), *(float(x) for x in row[1:])))
            except ValueError as exc:
                raise CatalogFormatError(
                    f"row {len(rows) + 1}: malformed value ({exc})", line=reader.line_num
                ) from None
    finally:
        if close:
            fh.close()
    if not rows:
        raise CatalogFormatError("k-correction table is empty")
    return KCorrTable(*zip(*rows))


def write_kcorr(table: KCorrTable, dest) -> None:
    fh, close = _open_text(dest, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KCORR_COLUMNS)
        for e in table.entries:
            w.writerow([e.zid, *(fmt_float(getattr(e, c)) for c in KCORR_COLUMNS[1:])])
    finally:
        if close:
            fh.close()


# ---------------------------------------------------------------------------
# synthetic catalogs


@dataclass(frozen=True)
class PlantedCluster:
    ra: float
    dec: float
    z: float
    members: int


@dataclass
class PlantedTruth:
    """Objids of each planted BCG and its members, in planting order."""

    bcgs: list[int] = field(default_factory=list)
    members: list[list[int]] = field(default_factory=list)


def generate_synthetic_catalog(
    region: RegionBounds,
    n_field: int,
    clusters: Sequence[PlantedCluster],
    kcorr: KCorrTable,
    seed: int,
    return_truth: bool = False,
):
    """Uniform field galaxies plus planted clusters.

    Each planted BCG copies (i, gr, ri) of the k-correction row nearest to
    its redshift, so its chi-square there is exactly 0. Members are fainter
    (i in (bcg_i, ilim]), have colours strictly inside the +/-1 sigma
    population windows, and sit inside both the 1 Mpc counting radius and
    the r200 membership radius of the finished cluster.
    """
    from .bcg import BCGParams, r200

    p = BCGParams()
    rng = np.random.default_rng(seed)
    for c in clusters:
        if not region.contains(c.ra, c.dec):
            raise ValueError(f"cluster centre ({c.ra}, {c.dec}) outside region {region}")
        if c.members < 0:
            raise ValueError("member count must be >= 0")

    ra = rng.uniform(region.min_ra, region.max_ra, n_field)
    sin_lo, sin_hi = np.sin(np.radians([region.min_dec, region.max_dec]))
    dec = np.degrees(np.arcsin(rng.uniform(sin_lo, sin_hi, n_field)))
    imag = rng.uniform(13.0, 21.5, n_field)
    gr = rng.uniform(0.3, 3.0, n_field)
    ri = rng.uniform(0.1, 1.5, n_field)
    cols = [list(ra), list(dec), list(imag), list(gr), list(ri)]
    truth = PlantedTruth()
    next_id = n_field + 1

    for c in clusters:
        k = kcorr.nearest(c.z)
        bcg_i, kgr, kri, kilim = kcorr.i[k], kcorr.gr[k], kcorr.ri[k], kcorr.ilim[k]
        reach = kcorr.radius[k] * min(1.0, r200(c.members + 1)) * 0.9
        truth.bcgs.append(next_id)
        next_id += 1
        for col, v in zip(cols, (c.ra, c.dec, bcg_i, kgr, kri)):
            col.append(float(v))
        ids = []
        for _ in range(c.members):
            sep = reach * math.sqrt(rng.uniform())
            theta = rng.uniform(0.0, 2.0 * math.pi)
            mdec = c.dec + sep * math.sin(theta)
            mra = c.ra + sep * math.cos(theta) / math.cos(math.radians(mdec))
            mi = kilim - (kilim - bcg_i) * rng.uniform(0.0, 0.999)
            mgr = kgr + p.gr_pop_sigma * rng.uniform(-0.9, 0.9)
            mri = kri + p.ri_pop_sigma * rng.uniform(-0.9, 0.9)
            for col, v in zip(cols, (mra, mdec, mi, mgr, mri)):
                col.append(float(v))
            ids.append(next_id)
            next_id += 1
        truth.members.append(ids)

    ra, dec, imag, gr, ri = (np.array(col, dtype=np.float64) for col in cols)
    sigmagr, sigmari = color_errors(imag)
    catalog = GalaxyCatalog(np.arange(1, next_id), ra, dec, imag, gr, ri, sigmagr, sigmari)
    return (catalog, truth) if return_truth else catalog


def plant_isolated_clusters(
    region: RegionBounds,
    count: int,
    members: int,
    kcorr: KCorrTable,
    seed: int,
    z_range: tuple[float, float] = (0.08, 0.3),
    margin: float = 0.0,
) -> list[PlantedCluster]:
    """Cluster centres inside ``region`` shrunk by ``margin``, pairwise
    separated by more than twice the table's largest radius."""
    rng = np.random.default_rng(seed)
    inner = RegionBounds(
        region.min_ra + margin, region.max_ra - margin,
        region.min_dec + margin, region.max_dec - margin,
    )
    min_sep = 2.0 * kcorr.max_radius
    out: list[PlantedCluster] = []
    for _ in range(10000 * max(count, 1)):
        if len(out) == count:
            break
        ra = rng.uniform(inner.min_ra, inner.max_ra)
        dec = rng.uniform(inner.min_dec, inner.max_dec)
        if all(_sep_deg(ra, dec, c.ra, c.dec) > min_sep for c in out):
            z = float(kcorr.z[kcorr.nearest(rng.uniform(*z_range))])
            out.append(PlantedCluster(ra, dec, z, members))
    if len(out) < count:
        raise ValueError(f"could not place {count} isolated clusters in {inner}")
    return out


def _sep_deg(ra1, dec1, ra2, dec2) -> float:
    r1, d1, r2, d2 = map(math.radians, (ra1, dec1, ra2, dec2))
    h = math.sin((d2 - d1) / 2) ** 2 + math.cos(d1) * math.cos(d2) * math.sin((r2 - r1) / 2) ** 2
    return math.degrees(2 * math.asin(min(1.0, math.sqrt(h))))
