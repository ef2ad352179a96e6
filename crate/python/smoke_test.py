"""Smoke test for the graphfolk_py extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math

import graphfolk_py as gf


def check_graph():
    g = gf.Graph([("a", "b"), ("b", "a"), ("b", "c")])
    assert g.num_vertices == 3 and g.num_edges == 2, g
    assert g.ids() == ["a", "b", "c"]
    assert sorted(g.neighbors("b")) == ["a", "c"]
    assert g.has_edge("c", "b") and not g.has_edge("a", "c")
    parsed = gf.Graph.parse("x,y\ny,z\n", delimiter=",")
    assert parsed.num_edges == 2

    pruned = gf.prune_by_in_degree([("a", "h"), ("b", "h"), ("a", "x")], 2, keep=["x"])
    assert pruned == [("a", "h"), ("b", "h"), ("a", "x")]
    assert gf.prune_by_in_degree([("a", "h"), ("b", "h"), ("a", "x")], 2) == [("a", "h"), ("b", "h")]

    try:
        gf.Graph.parse("lonely\n")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed edge list accepted")


def check_noise():
    noise = gf.NoiseDistribution([1, 16, 81])
    probs = noise.probs()
    expected = [c ** 0.75 for c in (1, 16, 81)]
    total = sum(expected)
    assert all(abs(p - e / total) < 1e-12 for p, e in zip(probs, expected))
    draws = noise.sample(20000, seed=3)
    freq = draws.count(2) / len(draws)
    assert abs(freq - probs[2]) < 0.02, freq
    assert noise.sample(100, seed=9) == noise.sample(100, seed=9)


def check_pipeline():
    edges, labels = gf.generate_sbm(0.3, 0.01, block_sizes=[30, 30], classes=[1, 2],
                                    income_means=[20000.0, 50000.0], seed=5)
    assert len(labels) == 60
    g = gf.Graph(edges)
    corpus = gf.Corpus.from_graph(g, walk_length=40, walks_per_vertex=5, seed=5)
    assert len(corpus) == 5 * g.num_vertices
    assert corpus.num_tokens == 40 * len(corpus)

    emb = gf.train_embedding(corpus, dim=8, epochs=3, seed=5)
    again = gf.train_embedding(corpus, dim=8, epochs=3, seed=5)
    assert emb.vectors() == again.vectors()
    assert emb.dim == 8 and len(emb.epoch_losses) == 3
    assert all(math.isfinite(x) for row in emb.vectors() for x in row)
    assert emb.to_text().splitlines()[0] == f"{len(emb.ids())} 8"

    by_id = {row[0]: row for row in labels}
    ids = [i for i in emb.ids() if i in by_id]
    rows = [emb.vector(i) for i in ids]
    classes = [by_id[i][1] for i in ids]
    incomes = [by_id[i][2] for i in ids]

    occ = gf.nested_cv([("embedding", rows)], classes=classes, folds=5, inner_folds=3, seed=5)
    agg = occ["aggregate"]
    assert agg["pooled_accuracy"] > agg["majority_baseline"] + 30.0, agg
    assert len(occ["folds"]) == 5

    inc = gf.nested_cv([("embedding", rows)], incomes=incomes, folds=5, inner_folds=3, seed=5)
    assert inc["aggregate"]["mae"] < inc["aggregate"]["mean_baseline_mae"], inc["aggregate"]

    assert abs(gf.accuracy([1, 2, 2], [1, 2, 3]) - 200 / 3) < 1e-12
    mae, rho = gf.regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 5.0])
    assert abs(mae - 2 / 3) < 1e-12 and rho > 0.9
    return agg["pooled_accuracy"]


if __name__ == "__main__":
    check_graph()
    check_noise()
    acc = check_pipeline()
    print(f"smoke test ok (SBM accuracy {acc:.1f}%)")
