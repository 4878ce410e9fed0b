"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict that is printed in the terminal summary.
"""

import csv
import dataclasses
import json
import math
import statistics
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from conftest import VERDICTS
from odkanon.artifacts import strip_timing
from odkanon.bench import (
    NA,
    BenchPlan,
    CorridorConfig,
    DatasetSpec,
    SynthConfig,
    gen_corridors,
    gen_synthetic,
    run_benchmark,
)
from odkanon.cli import main
from odkanon.generalize import REACHED_K, SparseGeneralizer
from odkanon.metrics import compute_metrics, min_k_audit
from odkanon.model import Mode, build_od, effective_k
from odkanon.pipeline import run_algorithm
from odkanon.suppress import SuppressionConfig, prefilter
from odkanon.treebuild import DESTINATION, ORIGIN
from oracles import oracle_for

P, Q = Mode.PARTICIPANT, Mode.POPULATION
SUITE_SIZE = 100
BETAS = (0.0, 0.05, 0.1)

# log-normal weights with sigma 1.5 on one-to-one commuter corridors
CROSS_LEVELS = 1

# clustered commuting flows; two levels of slack at resolution 5
CLUSTERED = dict(
    n_trips=5000,
    target_resolution=5,
    n_hotspots=10,
    hotspot_concentration=0.95,
    hotspot_spread=2,
)
CLUSTERED_LEVELS = 2


def verdict(n, ok, detail):
    VERDICTS[n] = f"{'PASS' if ok else 'FAIL'} criterion {n:>2}: {detail}"
    assert ok, VERDICTS[n]


def suite_config(i):
    return SynthConfig(
        seed=1000 + i,
        n_trips=1000 + 9000 * i // (SUITE_SIZE - 1),
        target_resolution=5,
        n_hotspots=5 + 3 * (i % 7),
        hotspot_concentration=0.3 + 0.1 * (i % 6),
        trips_per_participant=5 + 4 * (i % 5),
    )


def suite_params(i):
    return (5 if i % 2 == 0 else 10), (P if i // 2 % 2 == 0 else Q)


@pytest.fixture(scope="module")
def suite():
    runs = []
    t0 = time.perf_counter()
    for i in range(SUITE_SIZE):
        ds = gen_synthetic(suite_config(i))
        base_k, mode = suite_params(i)
        out = run_algorithm(ds, "odkanon", base_k, mode, 0.1, 5)
        audit = min_k_audit(out.result, ds, mode, out.k, out.suppressed_pairs)
        runs.append((ds, out, audit))
    return runs, time.perf_counter() - t0


@pytest.fixture(scope="module")
def oigh_suite(suite):
    runs = []
    for ds, out, _ in suite[0]:
        runs.append((ds, run_algorithm(ds, "oigh", out.base_k, out.mode)))
    return runs


@pytest.fixture(scope="module")
def oracle_suite():
    runs = []
    for i in range(50):
        ds = gen_synthetic(
            SynthConfig(
                seed=2000 + i,
                n_trips=200 + 16 * i,
                target_resolution=2 + i % 3,
                n_hotspots=2 + i % 5,
                hotspot_concentration=0.5 + 0.1 * (i % 4),
                trips_per_participant=3 + i % 6,
            )
        )
        alg = "odkanon" if i % 2 == 0 else "oigh"
        mode = P if i // 2 % 2 == 0 else Q
        runs.append((ds, run_algorithm(ds, alg, 5, mode, 0.1, 2)))
    return runs


def test_k_anonymity_guarantee(suite):
    runs, elapsed = suite
    reached = [(out, a) for _, out, a in runs if out.result.terminated == REACHED_K]
    bad = [a for _, a in reached if a.cells_below != 0]
    ok = reached and not bad and elapsed < 120
    verdict(1, ok, f"{len(reached)}/{len(runs)} runs reached k, {len(bad)} failed the audit, {elapsed:.1f} s total")


def test_suppression_budget(suite):
    over = 0
    zero_beta_suppressed = 0
    checked = 0
    for ds, out, _ in suite[0]:
        od = build_od(ds, out.mode)
        n = len(od)
        for beta in BETAS:
            if beta == 0.1:
                rep = out.suppression
            else:
                _, rep = prefilter(od, ds.hierarchy, SuppressionConfig(out.k, 5, beta))
            cap = math.floor(n * Fraction(str(beta)))
            pairs = {(o, d) for o, d, _ in rep.suppressed_pairs}
            if len(pairs) != rep.suppressed_row_count or len(pairs) > cap or not pairs <= set(od.entries):
                over += 1
            if beta == 0 and pairs:
                zero_beta_suppressed += 1
            checked += 1
    ok = over == 0 and zero_beta_suppressed == 0
    verdict(2, ok, f"{checked} (run, beta) pairs, {over} over budget, {zero_beta_suppressed} suppressions at beta=0")


def close(a, b):
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def test_metric_oracle_equivalence(oracle_suite):
    mismatches = []
    compared = 0
    for i, (ds, out) in enumerate(oracle_suite):
        for em in (P, Q):
            k = effective_k(out.base_k, ds, em)
            m = compute_metrics(out.result, ds, em, out.base_k, out.suppressed_pairs)
            orc = oracle_for(out.result, ds, em.value, k, out.suppressed_pairs)
            has_valid = bool(orc.valid())
            want = {
                "c_dm": orc.c_dm(),
                "c_avg": orc.c_avg() if has_valid else None,
                "g_bar": orc.g_bar() if has_valid else None,
                "e": orc.reconstruction_loss(),
            }
            got = {"c_dm": m.c_dm, "c_avg": m.c_avg, "g_bar": m.g_bar, "e": m.recon_loss}
            for name in want:
                compared += 1
                if not close(got[name], want[name]):
                    mismatches.append((i, em.value, name, got[name], want[name]))
    verdict(3, not mismatches, f"{compared} metric values on {len(oracle_suite)} datasets, {len(mismatches)} mismatches")


def test_metric_bounds(suite, oracle_suite):
    bad = []
    runs = [(ds, out) for ds, out, _ in suite[0]] + list(oracle_suite)
    for ds, out in runs:
        for em in (P, Q):
            m = compute_metrics(out.result, ds, em, out.base_k, out.suppressed_pairs)
            if m.c_avg is not None and not (m.c_avg >= 1 and m.g_bar >= 2):
                bad.append((out.algorithm, em.value, m.c_avg, m.g_bar))
            if not 0 <= m.recon_loss <= 2:
                bad.append((out.algorithm, em.value, m.recon_loss))
    identity = []
    for i in range(10):
        ds = gen_synthetic(SynthConfig(seed=3000 + i, n_trips=1000, target_resolution=4))
        # every trip twice, so each occupied leaf pair already holds k=2
        ds = dataclasses.replace(ds, records=ds.records * 2)
        for alg in ("odkanon", "oigh"):
            out = run_algorithm(ds, alg, 2, P, 0.1, 2)
            m = compute_metrics(out.result, ds, P, 2)
            identity.append(m.recon_loss == 0 and m.g_bar == 2)
    ok = not bad and all(identity)
    verdict(4, ok, f"{len(runs)} runs in two modes, {len(bad)} out of bounds; identity exact on "
            f"{sum(identity)}/{len(identity)}")


def unit_weights(ds):
    return dataclasses.replace(ds, records=tuple(dataclasses.replace(r, weight=1.0) for r in ds.records))


def test_weighted_consistency():
    diffs = []
    suppressed_any = 0
    for seed in range(20):
        ds = unit_weights(gen_synthetic(SynthConfig(seed=4000 + seed, n_trips=3000, target_resolution=4)))
        p = run_algorithm(ds, "odkanon", 10, P, 0.1, 2)
        q = run_algorithm(ds, "odkanon", 10, Q, 0.1, 2)
        if p.result.origin_map != q.result.origin_map or p.result.destination_map != q.result.destination_map:
            diffs.append((seed, "maps"))
        if p.suppressed_pairs != q.suppressed_pairs:
            diffs.append((seed, "suppression"))
        suppressed_any += bool(p.suppressed_pairs)
        for em in (P, Q):
            mp = compute_metrics(p.result, ds, em, 10, p.suppressed_pairs)
            mq = compute_metrics(q.result, ds, em, 10, q.suppressed_pairs)
            for name in ("c_dm", "c_avg", "g_bar", "recon_loss"):
                if not close(getattr(mp, name), getattr(mq, name)):
                    diffs.append((seed, em.value, name))
    verdict(5, not diffs, f"20 seeds, {len(diffs)} differences, suppression active on {suppressed_any} seeds")


def test_cross_protection():
    hits = 0
    detail = []
    for seed in range(20):
        ds = gen_corridors(CorridorConfig(seed=seed))
        kp, kq = effective_k(10, ds, P), effective_k(10, ds, Q)
        p = run_algorithm(ds, "odkanon", 10, P, 0.1, CROSS_LEVELS)
        q = run_algorithm(ds, "odkanon", 10, Q, 0.1, CROSS_LEVELS)
        a = min_k_audit(p.result, ds, Q, kq, p.suppressed_pairs)
        b = min_k_audit(q.result, ds, P, kp, q.suppressed_pairs)
        hits += a.cells_below >= 1 and b.cells_below >= 1
        detail.append((a.cells_below, b.cells_below))
    verdict(6, hits >= 15, f"{hits}/20 seeds show sub-k cells in both cross audits, "
            f"median {statistics.median(a for a, _ in detail)} and {statistics.median(b for _, b in detail)} cells")


def test_baseline_trend():
    ours, theirs, g_wins = [], [], 0
    for seed in range(20):
        ds = gen_synthetic(SynthConfig(seed=seed, **CLUSTERED))
        m = {}
        for alg in ("odkanon", "oigh"):
            out = run_algorithm(ds, alg, 10, P, 0.1, CLUSTERED_LEVELS)
            m[alg] = compute_metrics(out.result, ds, P, 10, out.suppressed_pairs)
        ours.append(m["odkanon"].c_avg)
        theirs.append(m["oigh"].c_avg)
        g_wins += m["odkanon"].g_bar < m["oigh"].g_bar
    a, b = statistics.median(ours), statistics.median(theirs)
    verdict(7, a < b and g_wins >= 14, f"median C_AVG {a:.2f} vs {b:.2f}, lower G in {g_wins}/20 seeds")


def homogeneous(result, ds, suppressed):
    h = ds.hierarchy
    kept = [r for r in ds.records if (r.origin, r.destination) not in suppressed]
    for axis, mapping, leaves in (
        (ORIGIN, result.origin_map, {r.origin for r in kept}),
        (DESTINATION, result.destination_map, {r.destination for r in kept}),
    ):
        if not leaves <= set(mapping):
            return False
        if any(z != leaf and not h.is_ancestor(z, leaf) for leaf, z in mapping.items()):
            return False
        zones = set(mapping.values())
        if any(a in zones for z in zones for a in h.lineage(z)[1:]):
            return False
    return True


def test_homogeneity(suite, oigh_suite, oracle_suite):
    runs = [(ds, out) for ds, out, _ in suite[0]] + list(oigh_suite) + list(oracle_suite)
    bad = [i for i, (ds, out) in enumerate(runs) if not homogeneous(out.result, ds, out.suppressed_pairs)]
    verdict(8, not bad, f"{len(runs)} ODkAnon and OIGH results, {len(bad)} not an antichain cover")


def replay_conserves(out):
    """Replay the recorded merges and check volume is kept at every step."""
    res = out.result
    work = out.od.without(out.suppressed_pairs)
    g = SparseGeneralizer(work, res.origin_tree, res.destination_tree, out.k)
    for axis, parent, cost in res.merges:
        st = g.axes[axis]
        other = g.axes[DESTINATION if axis == ORIGIN else ORIGIN].lines
        members = list(st.members[parent])
        before = sum(st.marginal[m] for m in members)
        touched = {o for m in members for o in st.lines[m]}
        cross = {o: sum(other[o].values()) for o in touched}
        g.apply_merge(axis, parent)
        if before != cost or st.marginal[parent] != before or sum(st.lines[parent].values()) != before:
            return False
        if any(sum(other[o].values()) != v for o, v in cross.items()):
            return False
    total = sum(sum(line.values()) for line in g.axes[ORIGIN].lines.values())
    return (
        total == work.total_volume() == res.matrix.total_volume()
        and g.zone_map(ORIGIN) == res.origin_map
        and g.zone_map(DESTINATION) == res.destination_map
    )


def test_conservation(suite):
    runs = suite[0]
    bad, merges = [], 0
    for i, (ds, out, _) in enumerate(runs):
        work = out.od.without(out.suppressed_pairs)
        if out.result.matrix.total_count() != work.total_count():
            bad.append(i)
        elif out.mode is P:
            merges += len(out.result.merges)
            if not replay_conserves(out):
                bad.append(i)
    regions_bad = []
    for i in range(0, SUITE_SIZE, 5):
        ds = runs[i][0]
        base_k, mode = suite_params(i)
        out = run_algorithm(ds, "mondrian", base_k, mode)
        members = np.sort(np.concatenate([r.members for r in out.result.regions]))
        volumes = [r.volume(mode) for r in out.result.regions]
        if not np.array_equal(members, np.arange(len(ds))) or min(volumes) < out.k:
            regions_bad.append(i)
        if not math.isclose(math.fsum(volumes), ds.total_volume(mode), rel_tol=1e-12):
            regions_bad.append(i)
    ok = not bad and not regions_bad
    verdict(9, ok, f"{merges} merges replayed, {len(bad)} runs lost volume, "
            f"{len(regions_bad)} of {len(range(0, SUITE_SIZE, 5))} region partitions invalid")


def test_performance_envelope():
    ds = gen_synthetic(SynthConfig(seed=0, n_trips=100_000, target_resolution=6))
    leaves = len({r.origin for r in ds.records} | {r.destination for r in ds.records})
    times = {}
    for alg in ("odkanon", "oigh"):
        t0 = time.perf_counter()
        run_algorithm(ds, alg, 10, P)
        times[alg] = time.perf_counter() - t0
    ok = leaves >= 20_000 and all(t < 60 for t in times.values())
    verdict(10, ok, f"{leaves} distinct leaves, ODkAnon {times['odkanon']:.1f} s, OIGH {times['oigh']:.1f} s")


def snapshot(root):
    out = {}
    for path in sorted(Path(root).rglob("*")):
        if not path.is_file():
            continue
        key = str(path.relative_to(root))
        if path.suffix == ".json":
            out[key] = strip_timing(json.loads(path.read_text()))
        elif path.suffix == ".csv":
            with open(path, newline="") as fh:
                out[key] = [{k: v for k, v in r.items() if k != "time_s"} for r in csv.DictReader(fh)]
        else:
            out[key] = path.read_bytes()
    return out


def test_cli_determinism(tmp_path):
    trips = tmp_path / "synth" / "trips.csv"
    data = ["--input", str(trips), "--hierarchy", "synthetic:4"]
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({
        "datasets": [{"name": "s", "synth": {"n_trips": 800, "target_resolution": 3, "seed": 4}}],
        "segments": ["whole", "sex"],
        "base_k": 5,
    }))
    commands = {
        "synth": ["synth", "--n-trips", "3000", "--resolution", "4", "--seed", "9"],
        "odkanon": ["anonymize", *data, "--algorithm", "odkanon", "--metrics", "c_dm,c_avg,g_bar,e"],
        "oigh": ["anonymize", *data, "--algorithm", "oigh", "--mode", "population", "--metrics", "c_dm,g_bar"],
        "mondrian": ["anonymize", *data, "--algorithm", "mondrian", "--metrics", "c_dm,c_avg"],
        "metrics": ["metrics", *data, "--result", str(tmp_path / "odkanon")],
        "audit": ["audit", *data, "--k", "5"],
        "segment": ["segment", *data, "--by", "age", "--algorithm", "odkanon,oigh,mondrian", "--mode",
                    "participant,population"],
        "bench": ["bench", "--plan", str(plan)],
    }
    differing = []
    for name, argv in commands.items():
        out = tmp_path / name
        codes = [main([*argv, "--output", str(out)])]
        first = snapshot(out)
        codes.append(main([*argv, "--output", str(out)]))
        if set(codes) != {0} or not first or snapshot(out) != first:
            differing.append(name)
    verdict(11, not differing, f"{len(commands)} commands run twice, differing: {differing or 'none'}")


def test_timeout_protocol():
    tiny = DatasetSpec("tiny", synth=SynthConfig(seed=1, n_trips=200, target_resolution=2))
    big = DatasetSpec("big", synth=SynthConfig(seed=2, n_trips=60_000, target_resolution=6))
    all_na = run_benchmark(BenchPlan(datasets=[tiny, big], base_k=5, time_limit_s=0.001))
    blank = all(c["status"] == "timeout" for c in all_na["cells"]) and all(
        r["c_dm"] == NA and r["time_s"] == ">0.001" for r in all_na["rows"]
    )
    mixed = run_benchmark(BenchPlan(datasets=[tiny, big], base_k=5, time_limit_s=0.5))
    alone = run_benchmark(BenchPlan(datasets=[tiny], base_k=5))

    def rows(report, name=None):
        cells = [c for c in report["cells"] if name is None or c["dataset"] == name]
        return [[{k: v for k, v in r.items() if k != "time_s"} for r in c["rows"]] for c in cells]

    big_cells = [c for c in mixed["cells"] if c["dataset"] == "big"]
    tiny_cells = [c for c in mixed["cells"] if c["dataset"] == "tiny"]
    ok = (
        blank
        and all(c["status"] == "timeout" for c in big_cells)
        and all(c["status"] == "ok" for c in tiny_cells)
        and rows(mixed, "tiny") == rows(alone)
    )
    timed_out = sum(c["status"] == "timeout" for c in mixed["cells"])
    verdict(12, ok, f"1 ms budget: all {len(all_na['cells'])} cells N/A; mixed plan: {timed_out} timed out, "
            f"{len(tiny_cells)} sibling cells match an unlimited run")
