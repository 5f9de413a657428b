import json

import pytest

from multisparse._optim import OptConfig
from multisparse.bench import (COMPLEXITY, BenchConfig, cell, run_bench, synthetic_dataset,
                               uncached_latency)


@pytest.fixture(scope="module")
def report():
    cfg = BenchConfig(sizes=(300, 600), p=100, u=20, n_queries=50, uncached_budget_s=1.0,
                      uncached_max_repeats=5, hyper_subsample=200,
                      opt=OptConfig(max_iter=10, restarts=0))
    return run_bench(cfg)


def test_every_cell_measured(report):
    assert len(report.cells) == 8
    for c in report.cells:
        assert c.status == "ok"
        assert c.cached_ms > 0 and c.uncached_ms > 0
        assert 1 <= c.uncached_repeats <= 5


def test_sizes_recorded(report):
    assert cell(report, "spgp", 600).sizes == {"n": 600, "m": 60}
    assert cell(report, "msgp", 300).sizes["M"] == 3
    with pytest.raises(KeyError):
        cell(report, "gp", 999)


def test_json_and_table(report):
    doc = json.loads(report.to_json())
    assert doc["complexity"] == COMPLEXITY
    assert len(report.table().splitlines()) == 9


def test_uncached_timeout_reported():
    med, reps = uncached_latency(lambda q: sum(range(10_000)), [0, 1, 2], 10.0, 3, timeout=0.0)
    assert med is None and reps == 1


def test_master_too_small():
    with pytest.raises(ValueError):
        run_bench(BenchConfig(sizes=(100,)), synthetic_dataset(50))
