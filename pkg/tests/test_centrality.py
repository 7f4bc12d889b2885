import itertools
import json
from collections import deque

import numpy as np
import pytest

from telegraph.centrality import (
    betweenness_centrality,
    degree_centrality,
    forward_degree_centrality,
    save_scores,
    top_k_table,
    undirected_adjacency,
)
from telegraph.graph import (
    ChannelNode,
    EdgeKind,
    IngestRecord,
    MessageNode,
    TelegraphGraph,
    build_graph,
)


def message_graph(n_nodes, edge_pairs):
    """Hand-assembled graph of message nodes with arbitrary FORWARDED topology.

    Centrality treats all edge kinds as plain undirected links, so tests can
    use free-form structure without the build-time duplication rule.
    """
    graph = TelegraphGraph()
    for i in range(n_nodes):
        graph.messages[f"n{i}"] = MessageNode(f"n{i}")
    for a, b in edge_pairs:
        graph.edges.add((f"n{a}", EdgeKind.FORWARDED, f"n{b}"))
    return graph


def brute_force_betweenness(adj):
    """Exhaustive shortest-path counting over unordered pairs (BFS oracle)."""

    def bfs(source):
        dist = {source: 0}
        sigma = {source: 1.0}
        queue = deque([source])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] = sigma.get(w, 0.0) + sigma[v]
        return dist, sigma

    nodes = sorted(adj)
    sweeps = {v: bfs(v) for v in nodes}
    scores = {v: 0.0 for v in nodes}
    for u, v in itertools.combinations(nodes, 2):
        dist_u, sigma_u = sweeps[u]
        dist_v, sigma_v = sweeps[v]
        if v not in dist_u:
            continue
        total = sigma_u[v]
        for x in nodes:
            if x in (u, v) or x not in dist_u or x not in dist_v:
                continue
            if dist_u[x] + dist_v[x] == dist_u[v]:
                scores[x] += sigma_u[x] * sigma_v[x] / total
    return scores


class TestDegree:
    def test_isolated_node_scores_zero(self):
        graph = TelegraphGraph()
        graph.channels["c0"] = ChannelNode("c0")
        assert degree_centrality(graph).scores == {"c0": 0.0}

    def test_triangle(self):
        graph = message_graph(3, [(0, 1), (1, 2), (2, 0)])
        assert set(degree_centrality(graph).scores.values()) == {2.0}

    def test_sums_to_twice_edge_count(self):
        records = [IngestRecord(f"m{i}", f"c{i % 3}") for i in range(10)]
        records += [
            IngestRecord(f"f{i}", "c9", forwarded_from_message_id=f"m{i}") for i in range(4)
        ]
        graph, _ = build_graph(records)
        scores = degree_centrality(graph).scores
        assert sum(scores.values()) == 2 * len(graph.edges)

    def test_counts_all_edge_kinds(self):
        graph, _ = build_graph(
            [
                IngestRecord("m1", "A"),
                IngestRecord("m2", "B", forwarded_from_message_id="m1"),
            ]
        )
        scores = degree_centrality(graph).scores
        # m1: IS_PART_OF out + FORWARDED in; m2: IS_PART_OF out + FORWARDED out
        assert scores["m1"] == 2.0 and scores["m2"] == 2.0
        assert scores["A"] == 1.0 and scores["B"] == 1.0


class TestForwardDegree:
    def test_only_membership_edges_all_zero(self):
        graph, _ = build_graph([IngestRecord(f"m{i}", "A") for i in range(5)])
        result = forward_degree_centrality(graph)
        assert set(result.scores.values()) == {0.0}

    def test_toy_projection(self):
        # channel A's message forwarded into B and C
        graph, _ = build_graph(
            [
                IngestRecord("m1", "A"),
                IngestRecord("m2", "B", forwarded_from_message_id="m1"),
                IngestRecord("m3", "C", forwarded_from_message_id="m1"),
            ]
        )
        result = forward_degree_centrality(graph)
        assert result.out_scores["A"] == 2.0 and result.in_scores["A"] == 0.0
        assert result.out_scores["B"] == 0.0 and result.in_scores["B"] == 1.0
        assert result.out_scores["C"] == 0.0 and result.in_scores["C"] == 1.0
        assert result.scores["A"] == 2.0

    def test_chained_forward_credits_root_channel(self):
        graph, _ = build_graph(
            [
                IngestRecord("m1", "A"),
                IngestRecord("m2", "B", forwarded_from_message_id="m1"),
                IngestRecord("m3", "C", forwarded_from_message_id="m2"),
            ]
        )
        result = forward_degree_centrality(graph)
        # both forwards resolve to m1, so A originates twice
        assert result.out_scores["A"] == 2.0
        assert result.in_scores["B"] == 1.0 and result.in_scores["C"] == 1.0

    def test_in_plus_out_equals_total(self):
        rng = np.random.default_rng(21)
        records = [IngestRecord(f"m{i}", f"c{rng.integers(0, 8)}") for i in range(40)]
        records += [
            IngestRecord(f"f{i}", f"c{rng.integers(0, 8)}", forwarded_from_message_id=f"m{rng.integers(0, 40)}")
            for i in range(30)
        ]
        graph, _ = build_graph(records)
        result = forward_degree_centrality(graph)
        for channel in graph.channels:
            assert result.scores[channel] == result.in_scores[channel] + result.out_scores[channel]


class TestBetweenness:
    def test_complete_graph_all_zero(self):
        graph = message_graph(3, [(0, 1), (1, 2), (2, 0)])
        assert set(betweenness_centrality(graph).scores.values()) == {0.0}

    def test_path_center_scores_one(self):
        graph = message_graph(3, [(0, 1), (1, 2)])
        scores = betweenness_centrality(graph).scores
        assert scores["n1"] == 1.0
        assert scores["n0"] == scores["n2"] == 0.0

    def test_star_center(self):
        graph = message_graph(4, [(0, 1), (0, 2), (0, 3)])
        scores = betweenness_centrality(graph).scores
        assert scores["n0"] == 3.0
        assert scores["n1"] == scores["n2"] == scores["n3"] == 0.0

    def test_disconnected_components(self):
        graph = message_graph(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
        scores = betweenness_centrality(graph).scores
        assert scores["n1"] == 1.0 and scores["n4"] == 1.0

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 50))
        density = rng.uniform(0.03, 0.25)
        edges = [
            (a, b)
            for a in range(n)
            for b in range(a + 1, n)
            if rng.random() < density
        ]
        graph = message_graph(n, edges)
        fast = betweenness_centrality(graph).scores
        slow = brute_force_betweenness(undirected_adjacency(graph))
        assert fast.keys() == slow.keys()
        for node in fast:
            assert fast[node] == pytest.approx(slow[node], abs=1e-9)

    def test_relabeling_invariance(self):
        edges = [(0, 1), (1, 2), (2, 3), (1, 3), (3, 4)]
        base = betweenness_centrality(message_graph(5, edges)).scores
        mapping = {0: 4, 1: 2, 2: 0, 3: 1, 4: 3}
        relabeled = betweenness_centrality(
            message_graph(5, [(mapping[a], mapping[b]) for a, b in edges])
        ).scores
        for old, new in mapping.items():
            assert base[f"n{old}"] == pytest.approx(relabeled[f"n{new}"], abs=1e-12)

    def test_progress_reporting(self):
        graph = message_graph(4, [(0, 1), (1, 2), (2, 3)])
        seen = []
        betweenness_centrality(graph, progress=lambda done, total: seen.append((done, total)))
        assert seen == [(1, 4), (2, 4), (3, 4), (4, 4)]

    def test_checkpoint_resume(self, tmp_path):
        graph = message_graph(8, [(i, i + 1) for i in range(7)])
        full = betweenness_centrality(graph).scores
        ckpt = tmp_path / "bc.json"

        calls = {"n": 0}

        class Stop(Exception):
            pass

        def interrupt(done, total):
            calls["n"] += 1
            if done == 3:
                raise Stop()

        with pytest.raises(Stop):
            betweenness_centrality(graph, progress=interrupt, checkpoint_path=ckpt, checkpoint_every=1)
        saved = json.loads(ckpt.read_text())
        assert saved["completed_sources"] == 3
        resumed = betweenness_centrality(graph, checkpoint_path=ckpt, checkpoint_every=1).scores
        assert resumed == full

    def test_source_sampling_subset(self):
        graph = message_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        sampled = betweenness_centrality(graph, sources=["n0", "n4"]).scores
        # n0 and n4 each see two paths through n2 (to the two far nodes), halved
        assert sampled["n2"] == pytest.approx((2.0 + 2.0) / 2.0)


class TestReporting:
    def make_graph(self):
        return build_graph(
            [
                IngestRecord("m1", "A", channel_name="Alpha", channel_subscriber_count=10),
                IngestRecord("m2", "B", forwarded_from_message_id="m1", channel_name="Beta"),
                IngestRecord("m3", "C", forwarded_from_message_id="m1", channel_name="Gamma"),
            ]
        )[0]

    def test_scores_file_sorted_descending(self, tmp_path):
        graph = self.make_graph()
        result = forward_degree_centrality(graph)
        save_scores(result, tmp_path / "scores.jsonl")
        rows = [json.loads(line) for line in (tmp_path / "scores.jsonl").read_text().splitlines()]
        values = [r["score"] for r in rows]
        assert values == sorted(values, reverse=True)
        assert all("in" in r and "out" in r for r in rows)

    def test_top_k_table_ties_break_by_name(self):
        graph = self.make_graph()
        result = forward_degree_centrality(graph)
        table = top_k_table(graph, result, k=3)
        lines = table.strip().splitlines()
        assert "Alpha" in lines[2]
        # B and C tie at total 1; Beta sorts before Gamma
        assert "Beta" in lines[3] and "Gamma" in lines[4]

    def test_top_helper(self):
        graph = self.make_graph()
        result = degree_centrality(graph)
        top = result.top(2)
        assert len(top) == 2
        assert top[0][1] >= top[1][1]
