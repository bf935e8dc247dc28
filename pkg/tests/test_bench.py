import json
import math
from collections import defaultdict

import numpy as np
import pytest

from mcreg import bench, simgen
from mcreg.cli import main


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    assert main(["bench", "--model", "3", "--reps", "2", "--seed", "5", "--out", str(d)]) == 0
    return d


def test_aggregation_identity(bench_dir):
    rows = bench.read_results_csv(bench_dir / "bench_results.csv")
    summary = json.loads((bench_dir / "bench_summary.json").read_text())
    assert summary["reps"] == 2 and not summary["partial"]
    vals = defaultdict(list)
    for rep, m, key, v in rows:
        vals[m, key].append(float(v))
    for m in ("amcr", "sep"):
        assert len({r for r, mm, _, _ in rows if mm == m}) == 2
        for key in bench.METRIC_ORDER:
            v = vals[m, key]
            got = summary["methods"][m][key]
            assert got["n"] == 2
            assert got["mean"] == pytest.approx(sum(v) / 2, rel=1e-12, abs=1e-15)
            # sample sd / sqrt(R), recomputed by hand
            mu = sum(v) / len(v)
            sd = math.sqrt(sum((x - mu) ** 2 for x in v) / (len(v) - 1))
            assert got["stderr"] == pytest.approx(sd / math.sqrt(2), rel=1e-9, abs=1e-15)


def test_bench_files(bench_dir):
    summary = json.loads((bench_dir / "bench_summary.json").read_text())
    assert summary["model"] == 3 and summary["spec"]["q"] == 25
    header = (bench_dir / "bench_results.csv").read_text().splitlines()[0]
    assert header == "rep,method,metric,value"


def test_replication_seed_stable():
    assert bench.replication_seed(0, 0) == bench.replication_seed(0, 0)
    seeds = {bench.replication_seed(0, r) for r in range(100)}
    assert len(seeds) == 100 and all(0 <= s < 2 ** 63 for s in seeds)


def test_table_format():
    assert bench.table_format(3.2849, 0.0741) == "3.28(.074)"
    assert bench.table_format(float("nan"), 0.1) == "NA"
    assert bench.table_format(1.0, float("nan")) == "1.00"


def test_failures_recorded(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(bench, "tune_sep", boom)
    res = bench.run_bench(simgen.ModelSpec(4, 3, 60, 1.0, 1.0), 2, methods=("amcr", "sep"))
    s = bench.summarize_results(res)
    assert s["partial"] and len(s["failures"]) == 2
    assert s["methods"]["amcr"]["frob"]["n"] == 2
    assert any(m == "sep" and k == "error" for _, m, k, _ in bench.long_rows(res))


def test_threads_do_not_change_results():
    spec = simgen.ModelSpec(4, 3, 60, 1.0, 1.0)
    a = bench.run_bench(spec, 3, seed=1, threads=1)
    b = bench.run_bench(spec, 3, seed=1, threads=3)
    assert a == b


def test_normality_study_shapes():
    spec = simgen.ModelSpec(5, 5, 400, 1.75, 0.4, seed=0)
    stats, rec = bench.normality_study(spec, 4, seed=1, k=2)
    assert stats.shape == (4,) and rec.dtype == bool
    assert np.all(np.isnan(stats) == ~rec)
