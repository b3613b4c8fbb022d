import json
import random
from collections import deque

import pytest

from districtlab.citygraph import (
    CityGraph,
    DisconnectedGraphError,
    GraphInvariantError,
    GraphParseError,
    build_grid,
    load_graph,
    save_graph,
)


def bfs_component_count(n_vertices, edges):
    """Independent connectivity oracle: plain breadth-first traversal."""
    adj = {v: [] for v in range(n_vertices)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = set()
    components = 0
    for start in range(n_vertices):
        if start in seen:
            continue
        components += 1
        queue = deque([start])
        seen.add(start)
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return components


class TestBuildGrid:
    def test_paper_grid_dimensions(self):
        g = build_grid(30, 30, 1000)
        assert g.num_vertices == 900
        assert g.total_population == 900_000
        assert g.num_edges == 2 * 30 * 29  # 1740

    def test_single_vertex(self):
        g = build_grid(1, 1, 5)
        assert g.num_vertices == 1
        assert g.num_edges == 0
        assert g.total_population == 5

    def test_two_by_two_hand_enumerated(self):
        g = build_grid(2, 2, 10)
        assert g.num_vertices == 4
        assert g.total_population == 40
        assert g.subgroup_population == 0
        assert set(g.edge_list()) == {(0, 1), (0, 2), (1, 3), (2, 3)}

    @pytest.mark.parametrize("rows,cols", [(1, 7), (3, 4), (5, 5), (2, 9)])
    def test_edge_count_formula(self, rows, cols):
        g = build_grid(rows, cols, 1)
        assert g.num_edges == rows * (cols - 1) + cols * (rows - 1)

    def test_degree_profile(self):
        g = build_grid(4, 5, 1)
        degrees = sorted(len(nbrs) for nbrs in g.neighbors)
        corners = degrees.count(2)
        sides = degrees.count(3)
        interior = degrees.count(4)
        assert corners == 4
        assert sides == 2 * (4 - 2) + 2 * (5 - 2)
        assert interior == (4 - 2) * (5 - 2)

    @pytest.mark.parametrize("rows,cols,pop", [(0, 3, 1), (3, 0, 1), (-1, 2, 1), (2, 2, 0)])
    def test_invalid_arguments(self, rows, cols, pop):
        with pytest.raises(ValueError):
            build_grid(rows, cols, pop)


class TestInvariants:
    def test_pop_q_bound(self):
        with pytest.raises(GraphInvariantError, match="pop_q"):
            CityGraph("bad", [10, 10], [5, 11], [(0, 1)])

    def test_self_loop(self):
        with pytest.raises(GraphInvariantError, match="self-loop"):
            CityGraph("bad", [1, 1], [0, 0], [(0, 1), (1, 1)])

    def test_duplicate_edge(self):
        with pytest.raises(GraphInvariantError, match="duplicate"):
            CityGraph("bad", [1, 1], [0, 0], [(0, 1), (1, 0)])

    def test_disconnected(self):
        with pytest.raises(DisconnectedGraphError) as err:
            CityGraph("bad", [1, 1, 1, 1], [0, 0, 0, 0], [(0, 1), (2, 3)])
        assert err.value.component_count == 2

    def test_with_pop_q_shares_structure_and_checks(self):
        g = build_grid(2, 3, 7)
        h = g.with_pop_q([1, 2, 3, 0, 7, 5])
        assert h.subgroup_population == 18
        assert h.pop_total is g.pop_total
        with pytest.raises(GraphInvariantError):
            g.with_pop_q([8, 0, 0, 0, 0, 0])

    def test_connectivity_matches_bfs_oracle(self):
        rng = random.Random(7)
        for trial in range(60):
            n = rng.randint(2, 100)
            possible = [(u, v) for u in range(n) for v in range(u + 1, n)]
            edges = rng.sample(possible, min(len(possible), rng.randint(1, 2 * n)))
            oracle = bfs_component_count(n, edges)
            if oracle == 1:
                g = CityGraph("t", [1] * n, [0] * n, edges)
                assert g.is_connected()
            else:
                with pytest.raises(DisconnectedGraphError) as err:
                    CityGraph("t", [1] * n, [0] * n, edges)
                assert err.value.component_count == oracle


class TestFileRoundTrip:
    def test_grid_round_trip(self, tmp_path):
        g = build_grid(30, 30, 1000)
        path = tmp_path / "grid.json"
        save_graph(g, path)
        assert load_graph(path) == g

    def test_modeled_template_round_trip(self, tmp_path):
        from districtlab.templates import city_template

        g = city_template("minneapolis")
        path = tmp_path / "minn.json"
        save_graph(g, path)
        h = load_graph(path)
        assert h == g

    def test_external_ids_preserved(self, tmp_path):
        doc = {
            "name": "ext",
            "nodes": [
                {"id": 40, "pop": 10, "q": 3},
                {"id": 7, "pop": 5, "q": 0},
                {"id": 900, "pop": 2, "q": 2},
            ],
            "edges": [[40, 7], [7, 900]],
        }
        path = tmp_path / "ext.json"
        path.write_text(json.dumps(doc))
        g = load_graph(path)
        assert g.external_ids == [40, 7, 900]
        assert g.total_population == 17
        out = tmp_path / "ext2.json"
        save_graph(g, out)
        assert load_graph(out) == g
        reloaded = json.loads(out.read_text())
        assert {n["id"] for n in reloaded["nodes"]} == {40, 7, 900}

    def test_parse_error(self, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("this is not json")
        with pytest.raises(GraphParseError):
            load_graph(path)

    def test_invariant_error_names_vertex(self, tmp_path):
        nodes = [{"id": i, "pop": 10, "q": 0} for i in range(9)]
        nodes[7]["q"] = 11
        doc = {"name": "bad", "nodes": nodes, "edges": [[i, i + 1] for i in range(8)]}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(GraphInvariantError, match="vertex 7"):
            load_graph(path)

    def test_disconnected_file_reports_components(self, tmp_path):
        doc = {
            "name": "split",
            "nodes": [{"id": i, "pop": 1, "q": 0} for i in range(4)],
            "edges": [[0, 1], [2, 3]],
        }
        path = tmp_path / "split.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(DisconnectedGraphError) as err:
            load_graph(path)
        assert err.value.component_count == 2

    def test_unwritable_path_mentions_path(self, tmp_path):
        g = build_grid(2, 2, 1)
        bad = tmp_path / "missing-dir" / "g.json"
        with pytest.raises(OSError, match="missing-dir"):
            save_graph(g, bad)

    def test_byte_identical_output(self, tmp_path):
        g = build_grid(5, 5, 10)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_graph(g, a)
        save_graph(g, b)
        assert a.read_bytes() == b.read_bytes()
