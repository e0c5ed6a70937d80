"""Topology construction, reachability, and the q/P/Q certificates."""
import math

import numpy as np
import pytest

from simlab.errors import SingularSystem, ValidationError
from simlab.graph import DirectedTopology, build_matrices, check_reachability, singular_values

from conftest import random_reachable_topology


def two_node():
    return DirectedTopology(adjacency=[[0, 0], [1, 0]], pinning=[1, 0])


class TestBuildMatrices:
    def test_two_node_worked_example(self):
        # hand inversion of the lower-triangular L+B = [[1,0],[-1,1]]
        gm = build_matrices(two_node())
        np.testing.assert_allclose(gm.q, [1.0, 2.0], atol=1e-14)
        np.testing.assert_allclose(np.diag(gm.p_matrix), [1.0, 0.5], atol=1e-14)
        np.testing.assert_allclose(gm.q_matrix, [[2.0, -0.5], [-0.5, 1.0]], atol=1e-14)
        eigs = np.linalg.eigvalsh(gm.q_matrix)
        expected = [(3 - math.sqrt(2)) / 2, (3 + math.sqrt(2)) / 2]
        np.testing.assert_allclose(eigs, expected, atol=1e-12)

    def test_single_pinned_follower(self):
        gm = build_matrices(DirectedTopology(adjacency=[[0.0]], pinning=[1.0]))
        np.testing.assert_allclose(gm.q, [1.0])
        np.testing.assert_allclose(gm.p_matrix, [[1.0]])
        np.testing.assert_allclose(gm.q_matrix, [[2.0]])

    def test_four_node_chain_forward_substitution(self):
        a = np.zeros((4, 4))
        a[1, 0] = a[2, 1] = a[3, 2] = 1.0
        topo = DirectedTopology(adjacency=a, pinning=[1, 0, 0, 0])
        gm = build_matrices(topo)
        # oracle: forward substitution on the bidiagonal L+B
        lb = gm.lb
        q = np.empty(4)
        for i in range(4):
            q[i] = (1.0 - lb[i, :i] @ q[:i]) / lb[i, i]
        np.testing.assert_allclose(gm.q, q, atol=1e-14)
        np.testing.assert_allclose(gm.q, [1, 2, 3, 4], atol=1e-14)
        np.testing.assert_allclose(np.diag(gm.p_matrix), [1, 1 / 2, 1 / 3, 1 / 4], atol=1e-14)

    def test_unreachable_is_singular(self):
        topo = DirectedTopology(adjacency=np.zeros((2, 2)), pinning=[1, 0])
        with pytest.raises(SingularSystem):
            build_matrices(topo)

    def test_random_topologies_pd_certificates(self):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            topo = random_reachable_topology(rng)
            gm = build_matrices(topo)
            assert np.array_equal(gm.q_matrix, gm.q_matrix.T)  # exact by construction
            assert np.linalg.eigvalsh(gm.q_matrix)[0] > 1e-10
            assert np.linalg.eigvalsh(gm.p_matrix)[0] > 1e-10
            residual = np.max(np.abs(gm.lb @ gm.q - 1.0))
            assert residual < 1e-12

    def test_sv_summary_fields(self):
        gm = build_matrices(two_node())
        sv = gm.sv_summary
        assert sv.a_max == pytest.approx(1.0)
        assert sv.db_min == pytest.approx(1.0)
        assert sv.lb_max == pytest.approx(math.sqrt((3 + math.sqrt(5)) / 2), abs=1e-12)
        assert sv.p_min == pytest.approx(0.5)

    def test_known_indefinite_q_heavy_weights(self):
        # documented limitation of the q-based scaling: a pinned star with
        # edge weight 10 is a perfectly valid spanning tree, yet Q is
        # indefinite (the guarantee needs benign weights / low branching)
        a = np.zeros((3, 3))
        a[1, 0] = a[2, 0] = 10.0
        gm = build_matrices(DirectedTopology(adjacency=a, pinning=[1, 0, 0]))
        assert np.linalg.eigvalsh(gm.q_matrix)[0] < 0

    def test_known_indefinite_q_high_branching(self):
        # unit weights but five children under one node also break it
        n = 8
        a = np.zeros((n, n))
        parents = [None, 0, 1, 2, 2, 2, 2, 2]
        for i in range(1, n):
            a[i, parents[i]] = 1.0
        gm = build_matrices(DirectedTopology(adjacency=a, pinning=[1] + [0] * (n - 1)))
        assert np.linalg.eigvalsh(gm.q_matrix)[0] < 0


class TestTopologyValidation:
    def test_self_loop_rejected(self):
        with pytest.raises(ValidationError, match="no_self_loops"):
            DirectedTopology(adjacency=[[1.0]], pinning=[1.0])

    def test_unpinned_rejected(self):
        with pytest.raises(ValidationError, match="pinning"):
            DirectedTopology(adjacency=[[0, 0], [1, 0]], pinning=[0, 0])

    def test_negative_weight_rejected(self):
        with pytest.raises(ValidationError, match="nonnegative"):
            DirectedTopology(adjacency=[[0, -1], [0, 0]], pinning=[1, 0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            DirectedTopology(adjacency=[[0, 0], [0, 0]], pinning=[1.0])


class TestReachability:
    def test_pinned_root_feeds_chain(self):
        ok, missing = check_reachability(two_node())
        assert ok and missing == []

    def test_isolated_follower(self):
        topo = DirectedTopology(adjacency=np.zeros((2, 2)), pinning=[1, 0])
        ok, missing = check_reachability(topo)
        assert not ok
        assert missing == [2]

    def test_four_node_chain(self):
        a = np.zeros((4, 4))
        a[1, 0] = a[2, 1] = a[3, 2] = 1.0
        topo = DirectedTopology(adjacency=a, pinning=[1, 0, 0, 0])
        ok, missing = check_reachability(topo)
        assert ok and missing == []

    def test_agrees_with_networkx(self):
        nx = pytest.importorskip("networkx")
        rng = np.random.default_rng(11)
        for _ in range(40):
            n = int(rng.integers(1, 9))
            a = (rng.random((n, n)) < 0.25).astype(float)
            np.fill_diagonal(a, 0.0)
            b = (rng.random(n) < 0.4).astype(float)
            if not b.any():
                b[int(rng.integers(0, n))] = 1.0
            topo = DirectedTopology(adjacency=a, pinning=b)
            graph = nx.DiGraph()
            graph.add_nodes_from(range(n))
            for i in range(n):
                for j in range(n):
                    if a[i, j] > 0:
                        graph.add_edge(j, i)  # information flows j -> i
            reached = set()
            for root in np.nonzero(b > 0)[0]:
                reached.add(int(root))
                reached |= {int(v) for v in nx.descendants(graph, int(root))}
            expected_missing = sorted(set(range(n)) - reached)
            ok, missing = check_reachability(topo)
            assert ok == (not expected_missing)
            assert missing == [v + 1 for v in expected_missing]


class TestSingularValues:
    def test_identity(self):
        np.testing.assert_allclose(singular_values(np.eye(2)), [1.0, 1.0])

    def test_zero(self):
        np.testing.assert_allclose(singular_values(np.zeros((2, 2))), [0.0, 0.0])

    def test_two_by_two_gram_oracle(self):
        # eigenvalues of M^T M by the quadratic formula
        m = np.array([[1.0, 0.0], [-1.0, 1.0]])
        gram = m.T @ m
        tr, det = np.trace(gram), np.linalg.det(gram)
        disc = math.sqrt(tr * tr - 4 * det)
        expected = np.sqrt([(tr + disc) / 2, (tr - disc) / 2])
        got = singular_values(m)
        np.testing.assert_allclose(got, expected, rtol=1e-10)
        np.testing.assert_allclose(got, [1.618033988749895, 0.618033988749895], rtol=1e-10)

    def test_nonincreasing_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = rng.normal(size=(int(rng.integers(1, 7)), int(rng.integers(1, 7))))
            sv = singular_values(m)
            assert np.all(sv >= 0)
            assert np.all(np.diff(sv) <= 1e-15)

    def test_product_matches_determinant(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            n = int(rng.integers(1, 7))
            m = rng.normal(size=(n, n))
            prod = float(np.prod(singular_values(m)))
            det = abs(float(np.linalg.det(m)))
            assert prod == pytest.approx(det, rel=1e-8, abs=1e-12)
