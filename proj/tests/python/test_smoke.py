import json
import math
import pathlib

import pytest

import bikepref

SAMPLE = pathlib.Path(__file__).resolve().parents[2] / "data" / "sample"


def test_weights_and_detour_ratio():
    a = bikepref.Alpha(3, 10)
    assert bikepref.edge_weight(60, True, a) == pytest.approx(18.0)
    assert bikepref.edge_weight(100, False, a) == pytest.approx(70.0)
    assert bikepref.max_detour_ratio(0.1) == 9.0
    assert bikepref.max_detour_ratio(0.38) == pytest.approx(1.6316, abs=5e-4)


def test_network_and_routing():
    net = bikepref.load_network(SAMPLE / "network.geojson")
    assert net.num_edges == 264
    assert "cycleway" in net.road_types()
    cost, edges = bikepref.shortest_path(net, 0, net.num_nodes - 1)
    assert cost == sum(net.edge(e)["length_m"] for e in edges)
    wcost, wedges = bikepref.shortest_path(net, 0, net.num_nodes - 1, ["cycleway"], bikepref.Alpha(1, 5))
    assert wcost <= 0.8 * cost + 1e-9  # the geometric path is one candidate
    assert bikepref.min_decomposition(net, ["cycleway"], bikepref.Alpha(1, 5), 0, wedges) == []


def test_table_one_agreement():
    counts = [[125, 10, 17], [20, 135, 63], [39, 47, 141]]
    assert bikepref.contingency_agreement(counts) == pytest.approx(401 / 597)


def test_clustering_helpers():
    rows = [[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]]
    z = bikepref.znormalize(rows)
    assert sum(r[0] for r in z) == pytest.approx(0.0, abs=1e-12)
    assignment, sse = bikepref.kmeans(rows, 2, restarts=5, seed=3)
    assert assignment[0] == assignment[1] != assignment[2] == assignment[3]
    assert sse == pytest.approx(0.01)
    w = bikepref.relieff([[0.0, 0.5], [0.1, 0.2], [1.0, 0.4], [0.9, 0.3]], [0, 0, 1, 1], 1)
    assert w[0] > w[1]


def test_pipeline_run_and_route(tmp_path):
    h1 = bikepref.run_all(SAMPLE / "config.toml", tmp_path / "a")
    h2 = bikepref.run_all(SAMPLE / "config.toml", tmp_path / "b")
    assert h1 == h2 == bikepref.config_hash(SAMPLE / "config.toml")
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    model = json.loads((tmp_path / "a" / "model_biking.json").read_text())
    assert model["config_hash"] == h1
    assert 0.1 <= model["alpha"] <= 0.9

    r = bikepref.route(SAMPLE / "config.toml", tmp_path / "a" / "model_biking.json",
                       (7.1, 50.7), (7.11, 50.705), tmp_path / "route")
    assert r["length_m"] >= r["shortest_length_m"]
    assert math.isfinite(r["w_alpha_cost"])


def test_errors_map_to_value_error(tmp_path):
    with pytest.raises(ValueError):
        bikepref.load_network(tmp_path / "missing.geojson")
    with pytest.raises(bikepref.UsageError):
        bikepref.kmeans([[0.0], [1.0]], 3)
