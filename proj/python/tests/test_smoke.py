import itertools
import random

import numpy as np
import pytest

import gdnn


def ring(n):
    return np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int64)


def test_graph_basics():
    g = gdnn.Graph(ring(6), 6)
    assert g.num_nodes == 6
    assert g.num_edges == 6
    assert g.degree(0) == 2
    assert sorted(g.neighbors(0)) == [1, 5]
    assert g.has_edge(3, 2)
    assert g.edges().shape == (6, 2)
    assert gdnn.Graph(ring(6)[::-1].copy(), 6).fingerprint == g.fingerprint


def test_bad_edges_raise():
    with pytest.raises(gdnn.DataError):
        gdnn.Graph(np.array([[0, 7]]), 3)
    with pytest.raises(gdnn.GdnnError):
        gdnn.Graph(np.zeros((2, 3), dtype=np.int64), 3)


def test_distances_match_networkx():
    nx = pytest.importorskip("networkx")
    rng = random.Random(3)
    for trial in range(10):
        n = rng.randint(5, 40)
        pairs = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < 0.1]
        g = gdnn.Graph(np.array(pairs, dtype=np.int64).reshape(-1, 2), n)
        ref = nx.Graph()
        ref.add_nodes_from(range(n))
        ref.add_edges_from(pairs)
        targets = gdnn.select_targets(g, min(4, n), "random", trial)
        feats = gdnn.encode_features(g, targets)
        assert feats.shape == (n, len(targets))
        for j, t in enumerate(targets):
            lengths = nx.single_source_shortest_path_length(ref, t)
            bfs = gdnn.bfs_distances(g, t)
            for v in range(n):
                assert feats[v, j] == lengths.get(v, n)
                assert bfs[v] == lengths.get(v, -1)


def test_degree_targets():
    g = gdnn.Graph(np.array([[0, 1], [0, 2], [0, 3], [1, 2]]), 5)
    assert gdnn.select_targets(g, 2, "max_degree") == [0, 1]
    assert gdnn.select_targets(g, 2, "min_degree") == [3, 4]


def test_hits_against_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(50):
        pos = rng.integers(0, 5, size=rng.integers(1, 20)).astype(float)
        neg = rng.integers(0, 5, size=rng.integers(1, 30)).astype(float)
        k = int(rng.integers(1, 40))
        if k > neg.size:
            with pytest.raises(gdnn.ConfigError):
                gdnn.hits_at_k(pos, neg, k)
            continue
        kth = np.sort(neg)[::-1][k - 1]
        assert gdnn.hits_at_k(pos, neg, k) == pytest.approx(float(np.mean(pos > kth)))


def test_gradcheck_suite():
    cases = gdnn.gradcheck()
    assert cases
    for case in cases:
        assert case["max_rel_error"] < 1e-5, case["name"]
        assert case["coordinates"] > 0


def write_edges(path, pairs):
    path.write_text("".join(f"{u} {v}\n" for u, v in pairs))


def test_pipeline_round_trip(tmp_path):
    rng = random.Random(1)
    n = 30
    pairs = [(u, v) for u, v in itertools.combinations(range(n), 2) if rng.random() < 0.2]
    write_edges(tmp_path / "edges.txt", pairs)
    summary = gdnn.import_dataset(str(tmp_path / "edges.txt"), out=str(tmp_path / "data"), seed=2)
    assert summary["num_nodes"] == n
    assert summary["train"] + summary["valid"] + summary["test"] == len(pairs)

    (tmp_path / "run.toml").write_text(
        "[data]\nsplit_dir = data\n"
        "[features]\nk = 8\n"
        "[model]\nhidden_dim = 8\n"
        "[train]\nepochs = 5\nseeds = 0,1\neval_every = 5\n"
        "[output]\ndir = out\n"
    )
    feats = gdnn.encode(str(tmp_path / "run.toml"), str(tmp_path / "feat"))
    assert feats.shape == (n, 8)

    result = gdnn.train(str(tmp_path / "run.toml"), {"train.epochs": "10"})
    assert result["runs"] == 2
    assert result["failure"] is None
    assert 0.0 <= result["valid_mean"] <= 1.0

    ckpt = tmp_path / "out" / "checkpoint_seed1.gdnn"
    ev = gdnn.evaluate(str(ckpt))
    assert 0.0 <= ev["valid_hits"] <= 1.0
    assert ev == gdnn.evaluate(str(ckpt))

    probs = gdnn.predict(str(ckpt), np.array(pairs[:5]))
    assert probs.shape == (5,)
    assert np.all((probs > 0) & (probs < 1))
    assert np.array_equal(probs, gdnn.predict(str(ckpt), np.array(pairs[:5])))


def test_config_errors(tmp_path):
    (tmp_path / "bad.toml").write_text("[model]\nno_such_key = 1\n")
    with pytest.raises(gdnn.ConfigError):
        gdnn.train(str(tmp_path / "bad.toml"))
