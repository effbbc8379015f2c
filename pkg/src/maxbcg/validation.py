"""Input checking and coercion for the estimator and the CLI."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .catalog import (
    GALAXY_COLUMNS,
    RAW_COLUMNS,
    GalaxyCatalog,
    KCorrTable,
    RegionBounds,
    color_errors,
    generate_synthetic_kcorr,
    load_kcorr,
    read_catalog,
)


def _columns(X) -> dict:
    if isinstance(X, dict):
        return dict(X)
    if hasattr(X, "columns"):  # pandas / polars frames
        return {str(c): np.asarray(X[c]) for c in X.columns}
    arr = np.asarray(X)
    if arr.dtype.names:
        return {name: arr[name] for name in arr.dtype.names}
    if arr.ndim == 2 and arr.shape[1] in (len(GALAXY_COLUMNS), len(RAW_COLUMNS)):
        names = GALAXY_COLUMNS if arr.shape[1] == len(GALAXY_COLUMNS) else RAW_COLUMNS
        return {name: arr[:, k] for k, name in enumerate(names)}
    raise TypeError(f"cannot interpret {type(X).__name__} as a galaxy catalog")


def check_catalog(X) -> GalaxyCatalog:
    """Coerce ``X`` to a validated :class:`GalaxyCatalog`.

    Accepts a catalog, a CSV path, a sequence of :class:`Galaxy` records, a
    mapping or data frame with either the derived columns
    (``objid, ra, dec, i, gr, ri, sigmagr, sigmari``) or the raw photometry
    columns (``objid, ra, dec, dered_g, dered_r, dered_i``), a structured
    array, or an (n, 8) / (n, 6) array in those column orders.
    """
    if isinstance(X, GalaxyCatalog):
        cat = X
    elif isinstance(X, (str, Path)):
        cat = read_catalog(X)
    elif isinstance(X, (list, tuple)) and (len(X) == 0 or hasattr(X[0], "_fields")):
        cat = GalaxyCatalog.from_galaxies(X)
    else:
        cols = _columns(X)
        if all(c in cols for c in GALAXY_COLUMNS):
            cat = GalaxyCatalog(*(cols[c] for c in GALAXY_COLUMNS))
        elif all(c in cols for c in RAW_COLUMNS):
            g, r, i = (np.asarray(cols[c], dtype=np.float64) for c in RAW_COLUMNS[3:])
            cat = GalaxyCatalog(cols["objid"], cols["ra"], cols["dec"], i, g - r, r - i, *color_errors(i))
        else:
            raise ValueError(f"catalog needs columns {GALAXY_COLUMNS} or {RAW_COLUMNS}")

    for name in GALAXY_COLUMNS[1:]:
        if not np.isfinite(getattr(cat, name)).all():
            raise ValueError(f"column {name!r} contains non-finite values")
    if ((cat.ra < 0) | (cat.ra >= 360)).any():
        raise ValueError("ra must lie in [0, 360)")
    if ((cat.dec < -90) | (cat.dec > 90)).any():
        raise ValueError("dec must lie in [-90, 90]")
    if not ((cat.sigmagr > 0).all() and (cat.sigmari > 0).all()):
        raise ValueError("colour errors must be positive")
    uniq, counts = np.unique(cat.objid, return_counts=True)
    if (counts > 1).any():
        raise ValueError(f"duplicate objid {int(uniq[counts > 1][0])}")
    return cat


def check_region(value) -> RegionBounds:
    if isinstance(value, RegionBounds):
        return value
    if isinstance(value, str):
        return RegionBounds.parse(value)
    vals = tuple(float(v) for v in value)
    if len(vals) != 4:
        raise ValueError("region needs (min_ra, max_ra, min_dec, max_dec)")
    return RegionBounds(*vals)


def check_kcorr(value, radius_cap: float = 0.5) -> KCorrTable:
    """A k-correction table from a table, a CSV path, or None (synthetic)."""
    if value is None:
        return generate_synthetic_kcorr(1000, radius_cap)
    if isinstance(value, KCorrTable):
        return value
    return load_kcorr(Path(value))
