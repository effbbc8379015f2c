import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxbcg.catalog import (
    GalaxyCatalog,
    PlantedCluster,
    RegionBounds,
    generate_synthetic_catalog,
    generate_synthetic_kcorr,
)
from maxbcg.partition import (
    PHASES,
    GeometryError,
    RunGeometry,
    execute_plan,
    plan_partitions,
    ra_margin,
    read_candidates,
    read_members,
    run_partitioned,
    run_sequential,
)
from maxbcg.zones import DEFAULT_ZONE_HEIGHT


@pytest.fixture(scope="module")
def field(geometry, kcorr):
    planted = [PlantedCluster(181.0, 1.0, 0.12, 10), PlantedCluster(182.5, 2.2, 0.25, 6)]
    return generate_synthetic_catalog(geometry.data_area, 3000, planted, kcorr, seed=11)


def test_geometry_nesting(geometry):
    t, b, p = geometry.target, geometry.candidate_area, geometry.data_area
    assert b.contains_region(t) and p.contains_region(b)
    assert b.min_dec == t.min_dec - 0.5 and p.max_dec == b.max_dec + 0.5


def test_ra_margin_covers_buffer_at_high_dec():
    dec = 60.0
    dra = ra_margin(0.5, dec)
    # the point 0.5 deg due "east" along a great circle reaches this ra offset
    reach = math.degrees(math.asin(math.sin(math.radians(0.5)) / math.cos(math.radians(dec))))
    assert dra >= reach > 0.5 / math.cos(math.radians(dec)) * 0.99


def test_geometry_rejects_pole_and_wrap():
    with pytest.raises(GeometryError, match="pole"):
        RunGeometry.from_target(RegionBounds(10, 20, 80, 89.5), 0.5)
    with pytest.raises(GeometryError, match="min_ra"):
        RunGeometry.from_target(RegionBounds(0.2, 5, 0, 1), 0.5)


def test_coverage_names_margin(geometry):
    p = geometry.data_area
    short = RegionBounds(p.min_ra, p.max_ra, p.min_dec + 0.1, p.max_dec)
    with pytest.raises(GeometryError, match="min_dec short by 0.1"):
        geometry.check_coverage(short)
    geometry.check_coverage(p)


def test_buffer_smaller_than_radius_rejected(field, target, kcorr):
    geo = RunGeometry.from_target(target, 0.3)
    with pytest.raises(GeometryError, match="largest k-correction radius"):
        plan_partitions(field, geo, 1, kcorr)


def test_single_partition_plan(field, geometry):
    plan = plan_partitions(field, geometry, 1)
    (part,) = plan.parts
    b, p = geometry.candidate_area, geometry.data_area
    assert part.owned_candidate == (b.min_dec, b.max_dec)
    assert part.loaded_data == (p.min_dec, p.max_dec)
    assert part.last and plan.cuts == []


@pytest.mark.parametrize("n", [2, 3, 4, 8])
def test_cuts_on_zone_boundaries(field, geometry, n):
    plan = plan_partitions(field, geometry, n)
    assert len(plan) == n
    for c in plan.cuts:
        k = (c + 90.0) / DEFAULT_ZONE_HEIGHT
        assert abs(k - round(k)) < 1e-6
    lows = [p.owned_target[0] for p in plan.parts]
    assert lows == sorted(lows) and lows[0] == geometry.target.min_dec
    assert plan.parts[-1].owned_target[1] == geometry.target.max_dec


def test_owned_candidate_intervals_tile_b(field, geometry):
    plan = plan_partitions(field, geometry, 4)
    b = geometry.candidate_area
    spans = [p.owned_candidate for p in plan.parts]
    assert spans[0][0] == b.min_dec and spans[-1][1] == b.max_dec
    for (_, hi), (lo, _) in zip(spans, spans[1:]):
        assert hi == lo


def test_three_way_balance(kcorr):
    target = RegionBounds(100.0, 106.0, -3.0, 3.0)
    geo = RunGeometry.from_target(target, 0.5)
    cat = generate_synthetic_catalog(geo.data_area, 40_000, [], kcorr, seed=2)
    loads = [p.estimated_load for p in plan_partitions(cat, geo, 3).parts]
    mean = sum(loads) / 3
    assert all(abs(x - mean) <= 0.25 * mean for x in loads)


def test_too_many_partitions(kcorr, geometry):
    cat = generate_synthetic_catalog(geometry.target, 3, [], kcorr, seed=1)
    with pytest.raises(ValueError, match="non-empty zones"):
        plan_partitions(cat, geometry, 4)
    assert len(plan_partitions(cat, geometry, 3)) == 3


def test_empty_catalog(geometry, kcorr):
    result = run_sequential(GalaxyCatalog.empty(), geometry, kcorr)
    assert (result.candidates, result.clusters, result.members) == ([], [], [])


def test_one_planted_cluster(geometry, kcorr):
    cat, truth = generate_synthetic_catalog(
        geometry.data_area, 0, [PlantedCluster(181.5, 1.5, 0.2, 3)], kcorr, seed=3, return_truth=True)
    result = run_sequential(cat, geometry, kcorr)
    assert [c.objid for c in result.clusters] == truth.bcgs
    assert sorted(m.galaxy_objid for m in result.members) == sorted(truth.bcgs + truth.members[0])


def test_buffer_cluster_is_candidate_only(geometry, kcorr):
    # centre sits in B but outside T
    cat, truth = generate_synthetic_catalog(
        geometry.data_area, 0, [PlantedCluster(181.5, 3.3, 0.2, 3)], kcorr, seed=3, return_truth=True)
    result = run_sequential(cat, geometry, kcorr)
    assert truth.bcgs[0] in [c.objid for c in result.candidates]
    assert result.clusters == [] and result.members == []


def test_member_radius_beyond_data_is_an_error(target):
    kcorr = generate_synthetic_kcorr(1000, 0.5)
    geo = RunGeometry.from_target(target, 0.5)
    # 150 members give r200 ~ 2.2, pushing the member radius past two buffer widths
    cat = generate_synthetic_catalog(geo.data_area, 0, [PlantedCluster(181.5, 1.5, 0.02, 150)],
                                     kcorr, seed=4)
    with pytest.raises(GeometryError, match="member radius"):
        run_sequential(cat, geo, kcorr)


def test_n1_equals_sequential(field, geometry, kcorr):
    a = run_sequential(field, geometry, kcorr)
    b = run_partitioned(field, geometry, kcorr, n=1)
    assert a.same_output(b)
    assert a.clusters


@settings(max_examples=8, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10_000))
def test_partitioned_equals_sequential(kcorr, geometry, n, seed):
    rng = np.random.default_rng(seed)
    t = geometry.target
    planted = [PlantedCluster(float(rng.uniform(t.min_ra, t.max_ra)),
                              float(rng.uniform(t.min_dec, t.max_dec)),
                              float(kcorr.z[kcorr.nearest(rng.uniform(0.05, 0.4))]), 5)
               for _ in range(3)]
    cat = generate_synthetic_catalog(geometry.data_area, 1500, planted, kcorr, seed=seed)
    seq = run_sequential(cat, geometry, kcorr)
    par = run_partitioned(cat, geometry, kcorr, n=n)
    assert seq.same_output(par)


def test_process_pool_matches_inline(field, geometry, kcorr):
    plan = plan_partitions(field, geometry, 3, kcorr)
    inline = execute_plan(field, plan, kcorr, workers=1)
    pooled = execute_plan(field, plan, kcorr, workers=3)
    assert inline.same_output(pooled)


def test_outputs_sorted_and_unique(field, geometry, kcorr):
    r = run_partitioned(field, geometry, kcorr, n=4)
    ids = [c.objid for c in r.candidates]
    assert ids == sorted(set(ids))
    keys = [(m.cluster_objid, m.galaxy_objid) for m in r.members]
    assert keys == sorted(set(keys))


def test_metrics_have_every_phase(field, geometry, kcorr):
    r = run_partitioned(field, geometry, kcorr, n=2)
    assert len(r.metrics.partitions) == 2
    for p in r.metrics.partitions:
        assert [ph.name for ph in p.phases] == list(PHASES)
    totals = r.metrics.phase_totals()
    assert totals["cluster_phase"].items >= len(r.clusters)
    assert r.metrics.work == sum(ph.items for ph in totals.values())


def test_write_and_read_back(field, geometry, kcorr, tmp_path):
    r = run_sequential(field, geometry, kcorr)
    paths = r.write(tmp_path)
    assert read_candidates(paths["candidates.csv"]) == r.candidates
    assert read_candidates(paths["clusters.csv"]) == r.clusters
    assert read_members(paths["members.csv"]) == r.members
    header = paths["metrics.csv"].read_text().splitlines()[0]
    assert header == "partition,phase,wall_s,items"
