"""Command-line front end: ``maxbcg {generate,find-clusters,compare,bench,oracle-check}``.

Exit codes: 0 success, 1 validation/input error, 2 comparison mismatch.
"""

from __future__ import annotations

import argparse
import csv
import filecmp
import json
import logging
import os
import sys
import time
from pathlib import Path

from .catalog import (
    CatalogFormatError,
    GalaxyCatalog,
    RegionBounds,
    generate_synthetic_catalog,
    generate_synthetic_kcorr,
    load_kcorr,
    plant_isolated_clusters,
    read_catalog,
    write_galaxy_csv,
    write_kcorr,
)
from .checks import neighbor_trial, pipeline_trial
from .partition import (
    OUTPUT_FILES,
    GeometryError,
    RunGeometry,
    execute_plan,
    plan_partitions,
)
from .zones import ZoneConfig

log = logging.getLogger("maxbcg")

EXIT_OK, EXIT_INVALID, EXIT_MISMATCH = 0, 1, 2

DEFAULTS = {
    "buffer": 0.5,
    "partitions": 1,
    "zone_height": 30.0,
    "threads": None,
    "n_field": 10_000,
    "clusters": 5,
    "members": 10,
    "radius_cap": 0.5,
}


class UsageError(Exception):
    pass


def _add_shared(p: argparse.ArgumentParser, synthetic=True):
    p.add_argument("--config", type=Path, help="JSON file of option defaults; flags win")
    p.add_argument("--galaxies", type=Path, help="galaxy CSV (raw or derived columns)")
    p.add_argument("--kcorr", type=Path, help="k-correction CSV")
    p.add_argument("--coverage", help="MINRA,MAXRA,MINDEC,MAXDEC actually covered by --galaxies")
    p.add_argument("--target", help="MINRA,MAXRA,MINDEC,MAXDEC")
    p.add_argument("--buffer", type=float, help="buffer width, deg (default 0.5)")
    p.add_argument("--partitions", type=int, help="declination slabs (default 1)")
    p.add_argument("--zone-height", type=float, help="zone height, arcsec (default 30)")
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="random seed; required for synthetic data")
    if synthetic:
        p.add_argument("--n-field", type=int, help="synthetic field galaxies (default 10000)")
        p.add_argument("--clusters", type=int, help="planted clusters (default 5)")
        p.add_argument("--members", type=int, help="members per planted cluster (default 10)")
        p.add_argument("--radius-cap", type=float, help="synthetic k-table radius cap, deg")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxbcg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic galaxy catalog and k-table")
    _add_shared(p)

    p = sub.add_parser("find-clusters", help="run the cluster finder")
    _add_shared(p)

    p = sub.add_parser("compare", help="diff two result directories")
    p.add_argument("dir_a", type=Path)
    p.add_argument("dir_b", type=Path)

    p = sub.add_parser("bench", help="time the run at several partition counts")
    _add_shared(p)
    p.add_argument("--partition-counts", default="1,3", help="comma list (default 1,3)")

    p = sub.add_parser("oracle-check", help="randomised equivalence against brute force")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--pipeline-trials", type=int, help="default: trials // 5")
    return parser


def _options(args) -> dict:
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(args.config.read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        opts.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, value in vars(args).items():
        if value is not None:
            opts[key] = value
    for key in ("galaxies", "kcorr", "out"):
        if opts.get(key) is not None:
            opts[key] = Path(opts[key])
    return opts


def _region(text, what) -> RegionBounds:
    if text is None:
        raise UsageError(f"--{what} is required")
    try:
        return RegionBounds.parse(text)
    except ValueError as exc:
        raise UsageError(f"--{what}: {exc}") from None


def _geometry(opts) -> RunGeometry:
    return RunGeometry.from_target(_region(opts.get("target"), "target"), float(opts["buffer"]))


def _synthetic(opts, geometry: RunGeometry):
    if opts.get("seed") is None:
        raise UsageError("--seed is required for synthetic data")
    seed = int(opts["seed"])
    kcorr = generate_synthetic_kcorr(1000, float(opts["radius_cap"]))
    planted = plant_isolated_clusters(
        geometry.target, int(opts["clusters"]), int(opts["members"]), kcorr, seed=seed,
    )
    catalog, truth = generate_synthetic_catalog(
        geometry.data_area, int(opts["n_field"]), planted, kcorr, seed=seed, return_truth=True
    )
    return catalog, kcorr, truth


def _inputs(opts, geometry: RunGeometry):
    """(catalog, kcorr) from files, or synthesised when no files are given."""
    if opts.get("galaxies") is None and opts.get("kcorr") is None:
        catalog, kcorr, _ = _synthetic(opts, geometry)
        return catalog, kcorr
    if opts.get("galaxies") is None or opts.get("kcorr") is None:
        raise UsageError("--galaxies and --kcorr go together")
    for key in ("galaxies", "kcorr"):
        if not opts[key].is_file():
            raise UsageError(f"--{key}: no such file {opts[key]}")
    kcorr = load_kcorr(opts["kcorr"])
    catalog = read_catalog(opts["galaxies"])
    coverage = opts.get("coverage")
    sidecar = opts["galaxies"].with_name("coverage.json")
    if coverage is None and sidecar.is_file():
        coverage = ",".join(str(v) for v in json.loads(sidecar.read_text())["region"])
    if coverage is not None:
        geometry.check_coverage(_region(coverage, "coverage"))
    return catalog, kcorr


def _run(opts, catalog: GalaxyCatalog, kcorr, geometry, n: int):
    config = ZoneConfig(zone_height=float(opts["zone_height"]) / 3600.0)
    plan = plan_partitions(catalog, geometry, n, kcorr, config)
    threads = opts.get("threads")
    return execute_plan(catalog, plan, kcorr, config=config, workers=threads)


def cmd_generate(opts) -> int:
    if opts.get("out") is None:
        raise UsageError("--out is required")
    geometry = _geometry(opts)
    catalog, kcorr, truth = _synthetic(opts, geometry)
    out = opts["out"]
    out.mkdir(parents=True, exist_ok=True)
    write_galaxy_csv(catalog, out / "galaxies.csv")
    write_kcorr(kcorr, out / "kcorr.csv")
    p = geometry.data_area
    (out / "coverage.json").write_text(
        json.dumps({"region": [p.min_ra, p.max_ra, p.min_dec, p.max_dec]}) + "\n"
    )
    with open(out / "planted.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("bcgObjID", "memberObjIDs"))
        for bcg, members in zip(truth.bcgs, truth.members):
            w.writerow((bcg, " ".join(str(m) for m in members)))
    print(f"wrote {len(catalog)} galaxies ({len(truth.bcgs)} planted clusters) "
          f"and {len(kcorr)} k-correction rows to {out}")
    return EXIT_OK


def cmd_find_clusters(opts) -> int:
    if opts.get("out") is None:
        raise UsageError("--out is required")
    geometry = _geometry(opts)
    catalog, kcorr = _inputs(opts, geometry)
    result = _run(opts, catalog, kcorr, geometry, int(opts["partitions"]))
    result.write(opts["out"])
    report = result.metrics.report()
    (opts["out"] / "metrics.txt").write_text(report + "\n")
    print(report)
    print(f"{len(result.candidates)} candidates, {len(result.clusters)} clusters, "
          f"{len(result.members)} member rows -> {opts['out']}")
    return EXIT_OK


def _row_diff(path_a: Path, path_b: Path) -> str:
    with open(path_a, encoding="utf-8") as fa, open(path_b, encoding="utf-8") as fb:
        a, b = fa.read().splitlines(), fb.read().splitlines()
    for k, (x, y) in enumerate(zip(a, b), start=1):
        if x != y:
            return f"line {k}: {x!r} != {y!r}"
    return f"line {min(len(a), len(b)) + 1}: row counts differ ({len(a)} vs {len(b)})"


def cmd_compare(dir_a: Path, dir_b: Path) -> int:
    missing = [str(d / f) for d in (dir_a, dir_b) for f in OUTPUT_FILES if not (d / f).is_file()]
    if missing:
        raise UsageError("missing result files: " + ", ".join(missing))
    status = EXIT_OK
    for name in OUTPUT_FILES:
        a, b = dir_a / name, dir_b / name
        if filecmp.cmp(a, b, shallow=False):
            print(f"{name}: identical")
        else:
            print(f"{name}: DIFFERENT at {_row_diff(a, b)}")
            status = EXIT_MISMATCH
    return status


def cmd_bench(opts, counts: list[int]) -> int:
    geometry = _geometry(opts)
    catalog, kcorr = _inputs(opts, geometry)
    print(f"{len(catalog)} galaxies, {os.cpu_count()} cores")
    header = (f"{'n':>3}{'wall_s':>10}{'zone_s':>9}{'cand_s':>9}{'clus_s':>9}"
              f"{'memb_s':>9}{'work':>10}{'clusters':>10}")
    print(header)
    rows = {}
    for n in counts:
        t0 = time.perf_counter()
        result = _run(opts, catalog, kcorr, geometry, n)
        wall = time.perf_counter() - t0
        ph = result.metrics.phase_totals()
        rows[n] = (wall, result.metrics.work)
        print(f"{n:>3}{wall:>10.3f}{ph['zone_build'].wall_s:>9.3f}{ph['candidate_phase'].wall_s:>9.3f}"
              f"{ph['cluster_phase'].wall_s:>9.3f}{ph['members_phase'].wall_s:>9.3f}"
              f"{result.metrics.work:>10d}{len(result.clusters):>10d}")
    base = counts[0]
    for n in counts:
        wall, work = rows[n]
        print(f"ratio {base}node/{n}node: wall {100 * rows[base][0] / wall:.0f}%  "
              f"work {100 * work / rows[base][1]:.0f}%")
    return EXIT_OK


def cmd_oracle_check(seed: int, trials: int, pipeline_trials: int | None) -> int:
    if pipeline_trials is None:
        pipeline_trials = trials // 5
    for kind, fn, count in (("neighbor", neighbor_trial, trials),
                            ("pipeline", pipeline_trial, pipeline_trials)):
        for t in range(count):
            failure = fn(seed + t)
            if failure:
                print(f"FAIL {kind} trial seed={seed + t}: {failure}")
                return EXIT_MISMATCH
        print(f"{kind}: {count} trials agree")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "compare":
            return cmd_compare(args.dir_a, args.dir_b)
        if args.command == "oracle-check":
            return cmd_oracle_check(args.seed, args.trials, args.pipeline_trials)
        opts = _options(args)
        if args.command == "generate":
            return cmd_generate(opts)
        if args.command == "find-clusters":
            return cmd_find_clusters(opts)
        if args.command == "bench":
            try:
                counts = [int(c) for c in args.partition_counts.split(",")]
            except ValueError:
                raise UsageError(f"bad --partition-counts {args.partition_counts!r}") from None
            return cmd_bench(opts, counts)
    except (UsageError, GeometryError, CatalogFormatError, ValueError, OSError) as exc:
        print(f"maxbcg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
