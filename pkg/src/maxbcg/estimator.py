"""scikit-learn style front end for the cluster finder."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .bcg import BCGParams
from .partition import RunGeometry, execute_plan, plan_partitions
from .validation import check_catalog, check_kcorr, check_region
from .zones import ZoneConfig


class MaxBCG(ClusterMixin, BaseEstimator):
    """Maximum-likelihood BCG cluster finder.

    Parameters
    ----------
    target : (min_ra, max_ra, min_dec, max_dec) or str
        Region whose clusters are wanted. The catalog passed to ``fit`` must
        cover the target grown by two buffer widths.
    buffer_width : float
        Buffer in degrees; must be at least the largest k-correction radius.
    n_partitions : int
        Number of declination slabs to split the run into. Results do not
        depend on it.
    zone_height : float
        Zone height in arcseconds.
    kcorr : KCorrTable, path or None
        k-correction table; None uses the synthetic table.
    params : BCGParams or None
    n_jobs : int or None
        Worker processes for the slabs; None uses every core.

    Attributes
    ----------
    candidates_, clusters_, members_ : lists of result records
    labels_ : ndarray of int64
        For each input galaxy, the BCG objid of the nearest cluster listing
        it as a member, or -1.
    metrics_ : RunMetrics
    """

    def __init__(self, target=None, buffer_width=0.5, n_partitions=1, zone_height=30.0,
                 kcorr=None, params=None, n_jobs=None):
        self.target = target
        self.buffer_width = buffer_width
        self.n_partitions = n_partitions
        self.zone_height = zone_height
        self.kcorr = kcorr
        self.params = params
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if self.target is None:
            raise ValueError("MaxBCG needs a target region")
        catalog = check_catalog(X)
        geometry = RunGeometry.from_target(check_region(self.target), float(self.buffer_width))
        kcorr = check_kcorr(self.kcorr)
        params = self.params if self.params is not None else BCGParams()
        config = ZoneConfig(zone_height=float(self.zone_height) / 3600.0)

        self.plan_ = plan_partitions(catalog, geometry, int(self.n_partitions), kcorr, config)
        result = execute_plan(catalog, self.plan_, kcorr, params, config, self.n_jobs)
        self.geometry_ = geometry
        self.kcorr_ = kcorr
        self.candidates_ = result.candidates
        self.clusters_ = result.clusters
        self.members_ = result.members
        self.metrics_ = result.metrics
        self.result_ = result
        self.n_clusters_ = len(result.clusters)
        self.labels_ = self._labels(catalog.objid, result.members)
        return self

    @staticmethod
    def _labels(objid, members):
        best: dict[int, tuple[float, int]] = {}
        for m in members:
            key = (m.distance, m.cluster_objid)
            if m.galaxy_objid not in best or key < best[m.galaxy_objid]:
                best[m.galaxy_objid] = key
        return np.array([best[o][1] if o in best else -1 for o in objid.tolist()], dtype=np.int64)
