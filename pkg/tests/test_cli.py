import collections
import csv
import json

import pytest

from maxbcg.cli import main

TARGET = "180,182,0,2"
SYNTH = ["--target", TARGET, "--seed", "5", "--n-field", "2000", "--clusters", "3", "--members", "10"]


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["generate", *SYNTH, "--out", str(out)]) == 0
    return out


def find(data, out, *extra):
    return main(["find-clusters", "--target", TARGET, "--galaxies", str(data / "galaxies.csv"),
                 "--kcorr", str(data / "kcorr.csv"), "--out", str(out), *extra])


def test_generate_is_deterministic(data, tmp_path):
    assert main(["generate", *SYNTH, "--out", str(tmp_path)]) == 0
    for name in ("galaxies.csv", "kcorr.csv", "coverage.json", "planted.csv"):
        assert (tmp_path / name).read_bytes() == (data / name).read_bytes()


def test_generate_needs_seed(tmp_path, capsys):
    assert main(["generate", "--target", TARGET, "--out", str(tmp_path)]) == 1
    assert "--seed" in capsys.readouterr().err


def test_partition_counts_give_identical_files(data, tmp_path, capsys):
    assert find(data, tmp_path / "one", "--partitions", "1") == 0
    assert find(data, tmp_path / "four", "--partitions", "4", "--threads", "1") == 0
    capsys.readouterr()
    assert main(["compare", str(tmp_path / "one"), str(tmp_path / "four")]) == 0
    assert capsys.readouterr().out.count("identical") == 3


def test_planted_clusters_survive_field(data, tmp_path):
    assert find(data, tmp_path / "r") == 0
    with open(tmp_path / "r" / "members.csv", newline="") as fh:
        sizes = collections.Counter(row["clusterObjID"] for row in csv.DictReader(fh))
    assert sum(1 for n in sizes.values() if n >= 2) >= 3


def test_metrics_rows(data, tmp_path):
    assert find(data, tmp_path / "r", "--partitions", "2", "--threads", "1") == 0
    with open(tmp_path / "r" / "metrics.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    phases = {(r["partition"], r["phase"]) for r in rows}
    for part in ("0", "1", "all"):
        for phase in ("zone_build", "candidate_phase", "cluster_phase", "members_phase", "total"):
            assert (part, phase) in phases
    assert "candidate_phase" in (tmp_path / "r" / "metrics.txt").read_text()


def test_compare_self_and_perturbed(data, tmp_path, capsys):
    out = tmp_path / "r"
    assert find(data, out) == 0
    assert main(["compare", str(out), str(out)]) == 0
    other = tmp_path / "p"
    other.mkdir()
    for name in ("candidates.csv", "clusters.csv", "members.csv"):
        (other / name).write_bytes((out / name).read_bytes())
    lines = (other / "candidates.csv").read_text().splitlines()
    fields = lines[3].split(",")
    fields[-1] = "0.125"
    lines[3] = ",".join(fields)
    (other / "candidates.csv").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["compare", str(out), str(other)]) == 2
    assert "candidates.csv: DIFFERENT at line 4" in capsys.readouterr().out


def test_missing_kcorr(data, tmp_path, capsys):
    rc = main(["find-clusters", "--target", TARGET, "--galaxies", str(data / "galaxies.csv"),
               "--kcorr", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "r")])
    assert rc == 1
    assert "nope.csv" in capsys.readouterr().err


def test_coverage_deficit_names_margin(data, tmp_path, capsys):
    rc = find(data, tmp_path / "r", "--coverage", "178,184,-0.5,2.5")
    assert rc == 1
    err = capsys.readouterr().err
    assert "max_dec short by" in err and "min_dec short by" in err


def test_sidecar_coverage_used(data, tmp_path, capsys):
    rc = main(["find-clusters", "--target", "180,182,0,2.4", "--galaxies", str(data / "galaxies.csv"),
               "--kcorr", str(data / "kcorr.csv"), "--out", str(tmp_path / "r")])
    assert rc == 1
    assert "max_dec short by" in capsys.readouterr().err


def test_config_file_and_flag_precedence(data, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"partitions": 3, "threads": 1, "target": TARGET}))
    assert main(["find-clusters", "--config", str(cfg), "--galaxies", str(data / "galaxies.csv"),
                 "--kcorr", str(data / "kcorr.csv"), "--out", str(tmp_path / "a")]) == 0
    rows = (tmp_path / "a" / "metrics.csv").read_text()
    assert "\n2,zone_build" in rows
    assert main(["find-clusters", "--config", str(cfg), "--partitions", "1",
                 "--galaxies", str(data / "galaxies.csv"), "--kcorr", str(data / "kcorr.csv"),
                 "--out", str(tmp_path / "b")]) == 0
    assert "\n1,zone_build" not in (tmp_path / "b" / "metrics.csv").read_text()


def test_zero_clusters_without_field(tmp_path):
    rc = main(["find-clusters", "--target", TARGET, "--seed", "1", "--n-field", "0",
               "--clusters", "0", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "clusters.csv").read_text() == "objid,ra,dec,z,i,ngal,chi2\n"


def test_bench_single_count(data, capsys):
    rc = main(["bench", "--target", TARGET, "--galaxies", str(data / "galaxies.csv"),
               "--kcorr", str(data / "kcorr.csv"), "--partition-counts", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "ratio 1node/1node: wall 100%  work 100%" in out


def test_oracle_check_zero_trials(capsys):
    assert main(["oracle-check", "--seed", "1", "--trials", "0"]) == 0
    assert "0 trials agree" in capsys.readouterr().out


def test_oracle_check_catches_broken_window(monkeypatch, capsys):
    from maxbcg.zones import ZoneTable

    original = ZoneTable._ra_half_widths
    monkeypatch.setattr(ZoneTable, "_ra_half_widths",
                        lambda self, dec, r, zones: original(self, dec, r, zones) * 0.5)
    assert main(["oracle-check", "--seed", "0", "--trials", "20", "--pipeline-trials", "0"]) == 2
    assert "FAIL neighbor trial seed=" in capsys.readouterr().out
