import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxbcg.catalog import (
    ANGULAR_SCALE,
    CatalogFormatError,
    GalaxyCatalog,
    KCorrTable,
    PlantedCluster,
    RawGalaxy,
    RegionBounds,
    color_errors,
    derive_galaxy,
    generate_synthetic_catalog,
    generate_synthetic_kcorr,
    ingest_galaxies,
    load_kcorr,
    plant_isolated_clusters,
    read_catalog,
    write_galaxy_csv,
    write_kcorr,
)
from maxbcg.bcg import chi_square

# 40-digit evaluations of 2.089*10**(0.228*15-6) and 4.266*10**(0.206*15-6)
SIGMAGR_15 = 0.0054946298350694527
SIGMARI_15 = 0.0052483265762856196

RAW_HEADER = "objid,ra,dec,dered_g,dered_r,dered_i\n"


def test_derive_colours():
    g = derive_galaxy(RawGalaxy(1, 10.0, 5.0, 16.0, 15.5, 15.0))
    assert (g.gr, g.ri, g.i) == (0.5, 0.5, 15.0)


def test_derive_errors_match_high_precision():
    g = derive_galaxy(RawGalaxy(1, 10.0, 5.0, 16.0, 15.5, 15.0))
    assert g.sigmagr == pytest.approx(SIGMAGR_15, rel=1e-13)
    assert g.sigmari == pytest.approx(SIGMARI_15, rel=1e-13)


@given(st.floats(10.0, 25.0))
def test_derive_is_pure(i):
    raw = RawGalaxy(7, 1.0, 2.0, i + 1.0, i + 0.4, i)
    assert derive_galaxy(raw) == derive_galaxy(raw)


@given(st.floats(10.0, 25.0), st.floats(10.0, 25.0))
def test_errors_positive_and_increasing(a, b):
    ga, ra = color_errors(a)
    gb, rb = color_errors(b)
    assert ga > 0 and ra > 0
    if a < b:
        assert ga < gb and ra < rb


def test_vector_and_scalar_errors_agree():
    i = np.linspace(10, 25, 301)
    sg, sr = color_errors(i)
    for k in range(0, 301, 50):
        g = derive_galaxy(RawGalaxy(1, 0.0, 0.0, i[k], i[k], i[k]))
        assert g.sigmagr == pytest.approx(sg[k], rel=1e-14)
        assert g.sigmari == pytest.approx(sr[k], rel=1e-14)


def test_ingest_empty():
    assert len(ingest_galaxies(io.StringIO(RAW_HEADER), RegionBounds(0, 10, 0, 10))) == 0


def test_ingest_closed_bounds_and_filter():
    text = RAW_HEADER + "1,10.0,1.0,17,16,15\n2,12.0,5.0,17,16,15\n3,11.0,20.0,17,16,15\n"
    cat = ingest_galaxies(io.StringIO(text), RegionBounds(10.0, 12.0, 0.0, 5.0))
    assert cat.objid.tolist() == [1, 2]


def test_ingest_malformed_row_names_line():
    text = RAW_HEADER + "1,10.0,1.0,17,16,15\n2,abc,1.0,17,16,15\n"
    with pytest.raises(CatalogFormatError, match="line 3"):
        ingest_galaxies(io.StringIO(text), RegionBounds(0, 20, 0, 5))


def test_ingest_duplicate_objid():
    text = RAW_HEADER + "1,10.0,1.0,17,16,15\n1,10.5,1.0,17,16,15\n"
    with pytest.raises(CatalogFormatError, match="duplicate objid 1"):
        ingest_galaxies(io.StringIO(text), RegionBounds(0, 20, 0, 5))


def test_ingest_bad_header():
    with pytest.raises(CatalogFormatError, match="header"):
        ingest_galaxies(io.StringIO("a,b\n"), RegionBounds(0, 20, 0, 5))


def test_read_catalog_sniffs_raw(tmp_path):
    p = tmp_path / "raw.csv"
    p.write_text(RAW_HEADER + "5,10.0,1.0,16,15.5,15\n")
    cat = read_catalog(p)
    assert cat[0].gr == 0.5 and cat[0].sigmagr == pytest.approx(SIGMAGR_15, rel=1e-13)


def test_galaxy_csv_round_trip(tmp_path, kcorr):
    cat = generate_synthetic_catalog(RegionBounds(10, 11, 0, 1), 50, [], kcorr, seed=3)
    p = tmp_path / "g.csv"
    write_galaxy_csv(cat, p)
    assert read_catalog(p) == cat


def test_kcorr_table_length_and_grid(kcorr):
    assert len(kcorr) == 1000
    assert kcorr.z[0] == pytest.approx(0.001, abs=1e-15)
    assert kcorr.z[-1] == pytest.approx(1.0, abs=1e-15)


def test_kcorr_radius_anchor(kcorr):
    k = kcorr.index_of(0.05)
    assert kcorr.radius[k] == pytest.approx(0.41573033707865168, abs=1e-12)
    assert ANGULAR_SCALE == pytest.approx(0.020786516853932584, rel=1e-15)


def test_kcorr_cap_and_strict_decrease(kcorr):
    assert kcorr.max_radius == 0.5
    assert (np.diff(kcorr.radius) < 0).all()
    tail = np.flatnonzero(ANGULAR_SCALE / kcorr.z < 0.5)
    assert np.array_equal(kcorr.radius[tail], ANGULAR_SCALE / kcorr.z[tail])


def test_kcorr_round_trip(tmp_path, kcorr):
    p = tmp_path / "k.csv"
    write_kcorr(kcorr, p)
    assert load_kcorr(p) == kcorr


def _kcorr_csv(kcorr, mutate):
    buf = io.StringIO()
    write_kcorr(kcorr, buf)
    lines = buf.getvalue().splitlines()
    mutate(lines)
    return io.StringIO("\n".join(lines) + "\n")


def test_kcorr_z_decrease_names_row(kcorr):
    def swap(lines):
        f = lines[10].split(",")
        f[1] = "0.0001"
        lines[10] = ",".join(f)
    with pytest.raises(CatalogFormatError, match="row 10: z not strictly"):
        load_kcorr(_kcorr_csv(kcorr, swap))


def test_kcorr_radius_increase_names_row(kcorr):
    def bump(lines):
        f = lines[200].split(",")
        f[8] = "0.9"
        lines[200] = ",".join(f)
    with pytest.raises(CatalogFormatError, match="row 200: radius not strictly"):
        load_kcorr(_kcorr_csv(kcorr, bump))


def test_kcorr_rejects_empty():
    with pytest.raises(CatalogFormatError):
        load_kcorr(io.StringIO("zid,z,i,ilim,ug,gr,ri,iz,radius\n"))


def test_kcorr_index_of_tolerance(kcorr):
    assert kcorr.index_of(0.1 + 5e-8) == 99
    with pytest.raises(KeyError):
        kcorr.index_of(0.1 + 2e-7)


def test_generator_counts_and_determinism(kcorr):
    region = RegionBounds(10, 12, 0, 2)
    one = [PlantedCluster(11.0, 1.0, 0.1, 5)]
    cat = generate_synthetic_catalog(region, 0, one, kcorr, seed=1)
    assert len(cat) == 6
    a = generate_synthetic_catalog(region, 300, one, kcorr, seed=9)
    b = generate_synthetic_catalog(region, 300, one, kcorr, seed=9)
    assert a == b


def test_generator_rejects_centre_outside(kcorr):
    with pytest.raises(ValueError, match="outside"):
        generate_synthetic_catalog(RegionBounds(10, 12, 0, 2), 0,
                                   [PlantedCluster(20.0, 1.0, 0.1, 2)], kcorr, seed=1)


def test_planted_bcg_has_zero_chisq(kcorr):
    cat, truth = generate_synthetic_catalog(RegionBounds(10, 12, 0, 2), 10,
                                            [PlantedCluster(11.0, 1.0, 0.2, 3)], kcorr,
                                            seed=4, return_truth=True)
    bcg = cat[cat.row_of(truth.bcgs[0])]
    assert chi_square(bcg, kcorr[kcorr.index_of(0.2)]) == 0.0


def test_isolated_clusters_are_separated(kcorr):
    planted = plant_isolated_clusters(RegionBounds(0, 10, 0, 10), 8, 3, kcorr, seed=2)
    for a in range(len(planted)):
        for b in range(a):
            p, q = planted[a], planted[b]
            cos = (math.sin(math.radians(p.dec)) * math.sin(math.radians(q.dec))
                   + math.cos(math.radians(p.dec)) * math.cos(math.radians(q.dec))
                   * math.cos(math.radians(p.ra - q.ra)))
            assert math.degrees(math.acos(min(cos, 1.0))) > 2 * kcorr.max_radius


def test_catalog_is_immutable(kcorr):
    cat = generate_synthetic_catalog(RegionBounds(10, 11, 0, 1), 5, [], kcorr, seed=1)
    with pytest.raises(AttributeError):
        cat.ra = None
    with pytest.raises(ValueError):
        cat.ra[0] = 1.0


def test_region_parse_and_errors():
    r = RegionBounds.parse("1, 2, 3, 4")
    assert r == RegionBounds(1.0, 2.0, 3.0, 4.0)
    with pytest.raises(ValueError):
        RegionBounds.parse("1,2,3")
    with pytest.raises(ValueError):
        RegionBounds(2, 1, 0, 1)


def test_kcorr_table_rejects_nonpositive_radius():
    with pytest.raises(CatalogFormatError, match="row 2: radius must be positive"):
        KCorrTable([1, 2], [0.1, 0.2], [1, 1], [2, 2], [0, 0], [0, 0], [0, 0], [0, 0], [0.3, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_catalog_pickles(seed):
    import pickle
    cat = GalaxyCatalog.from_galaxies(
        generate_synthetic_catalog(RegionBounds(0, 1, 0, 1), 4, [], generate_synthetic_kcorr(50, 0.5),
                                   seed=seed)
    )
    assert pickle.loads(pickle.dumps(cat)) == cat
