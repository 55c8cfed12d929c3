"""Smoke test for the treeclust Python module.

Run with `python python/smoke_test.py` or `pytest python/smoke_test.py`
after `pip install -e crates/python --no-build-isolation`.
"""

import json
import math
from pathlib import Path

import jsonschema
import pytest

import treeclust

SCHEMA = Path(__file__).resolve().parent.parent / "docs" / "dendrogram.schema.json"


def test_three_point_example():
    hier = treeclust.dbscan_hierarchy([[0.0], [0.5], [3.0]], 1.0)
    assert hier.n == 3
    assert hier.clusters_at(treeclust.lambda_of_k(2, 3, 1.0, 1)) == [[0, 1]]
    assert hier.clusters_at(0.0) == [[0, 1], [2]]
    assert hier.merge_height(0, 2) is None
    level, cid = hier.smallest_containing_cluster([0, 1])
    assert cid == 0 and math.isclose(level, 2 / 6)
    assert hier.nesting_violations() == 0


def test_lambda_of_k():
    assert treeclust.lambda_of_k(0, 100, 0.5, 1) == 0.0
    assert math.isclose(treeclust.lambda_of_k(10, 100, 0.5, 1), 0.1)


def test_two_bump_split_and_schema():
    pts = treeclust.sample("gaussian-two-bump", 2000, 0)
    assert len(pts) == 2000 and len(pts[0]) == 1
    assert pts == treeclust.sample("gaussian-two-bump", 2000, 0)
    h = treeclust.optimal_bandwidth(2000, 1, 2.0, 0.5)
    hier = treeclust.modified_dbscan_hierarchy(pts, h, 2)
    assert hier.algorithm == "mdbscan"
    splits = hier.splits(0.1)
    assert len(splits) == 1
    assert len(splits[0].children) == 2
    doc = json.loads(hier.to_json(0.1))
    jsonschema.validate(doc, json.loads(SCHEMA.read_text()))
    assert sum(s["significant"] for s in doc["splits"]) == 1


def test_kde_mass_and_density():
    pts = treeclust.sample("lipschitz-two-bump", 500, 3)
    xs = [[-4 + i * 0.001] for i in range(8001)]
    est = treeclust.kde(pts, xs, 0.3)
    assert abs(sum(est) * 0.001 - 1.0) < 5e-3
    truth = treeclust.density("lipschitz-two-bump", xs)
    assert abs(sum(truth) * 0.001 - 1.0) < 1e-3


def test_gap_level_set():
    pts = treeclust.sample("gap-disk-square", 3000, 1)
    ls = treeclust.gap_level_set(pts, 0.2157, 0.0163, 0.163, 0.0919)
    assert ls.k >= 1 and len(ls.centers) > 0
    assert ls.contains([-1.0, -1.0])
    assert not ls.contains([2.9, -2.9])


def test_errors():
    with pytest.raises(ValueError):
        treeclust.sample("nope", 10, 0)
    with pytest.raises(ValueError):
        treeclust.dbscan_hierarchy([[0.0, 1.0], [2.0]], 1.0)
    with pytest.raises(ValueError):
        treeclust.dbscan_hierarchy([[0.0]], 1.0).merge_height(0, 5)


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
