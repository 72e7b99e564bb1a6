import math

import numpy as np
import pytest
import scipy.sparse as sp

from mgclust import autodiff as ad
from mgclust.autodiff import (
    DiffValue,
    EdgeSet,
    Tape,
    finite_difference_gradient,
    max_relative_error,
    zero_grads,
)


def star_edge_set(n=3):
    """Node 0 linked to all others, everyone self-looped."""
    dense = np.eye(n)
    dense[0, :] = 1.0
    dense[:, 0] = 1.0
    return EdgeSet.from_adjacency(sp.csr_matrix(dense))


class TestTapeSemantics:
    def test_leaf_grad_matches_shape(self):
        t = Tape()
        v = t.leaf(np.ones((3, 2)))
        assert v.grad.shape == (3, 2)
        assert not v.grad.any()

    def test_backward_requires_scalar_root(self):
        t = Tape()
        v = t.leaf(np.ones((2, 2)))
        with pytest.raises(ValueError):
            t.backward(v)

    def test_disconnected_leaf_stays_zero(self):
        t = Tape()
        x = t.leaf(np.ones((2, 2)))
        unused = t.leaf(np.ones((2, 2)))
        t.backward(ad.frobenius_sq(x))
        assert not unused.grad.any()

    def test_repeated_backward_accumulates(self):
        t = Tape()
        x = t.leaf(np.arange(4.0).reshape(2, 2))
        root = ad.frobenius_sq(x)
        t.backward(root)
        first = x.grad.copy()
        t.backward(root)
        np.testing.assert_array_equal(x.grad, 2 * first)
        zero_grads([x])
        assert not x.grad.any()

    def test_cross_tape_operands_rejected(self):
        a = Tape().leaf(np.ones((2, 2)))
        b = Tape().leaf(np.ones((2, 2)))
        with pytest.raises(ValueError):
            ad.add(a, b)

    def test_adopt_rebinds_parameter(self):
        p = DiffValue(np.ones((2, 2)))
        t1, t2 = Tape(), Tape()
        t1.adopt(p)
        t1.backward(ad.frobenius_sq(p))
        t2.adopt(p)
        t2.backward(ad.frobenius_sq(p))
        np.testing.assert_array_equal(p.grad, 4 * p.data)


class TestOpValues:
    def test_sigmoid_at_zero(self):
        t = Tape()
        x = t.leaf(np.zeros((1, 1)))
        y = ad.sigmoid(x)
        t.backward(ad.sum_all(y))
        assert y.data[0, 0] == 0.5
        assert x.grad[0, 0] == 0.25

    def test_frobenius_of_zero_matrix(self):
        t = Tape()
        assert ad.frobenius_sq(t.leaf(np.zeros((3, 4)))).item() == 0.0

    def test_frobenius_gradient_is_2x(self):
        t = Tape()
        x = t.leaf(np.arange(6.0).reshape(2, 3))
        t.backward(ad.frobenius_sq(x))
        np.testing.assert_array_equal(x.grad, 2 * x.data)

    def test_spmm_identity(self):
        t = Tape()
        h = t.leaf(np.arange(6.0).reshape(3, 2))
        out = ad.spmm(sp.identity(3, format="csr"), h)
        np.testing.assert_array_equal(out.data, h.data)

    def test_spmm_hand_value_and_gradient(self):
        t = Tape()
        h = t.leaf(np.array([[1.0], [3.0]]))
        a_hat = sp.csr_matrix(np.full((2, 2), 0.5))
        out = ad.spmm(a_hat, h)
        np.testing.assert_allclose(out.data, [[2.0], [2.0]])
        t.backward(ad.sum_all(out))
        # d sum(A h)/dh = column sums of A
        np.testing.assert_allclose(h.grad, [[1.0], [1.0]])

    def test_spmm_shape_mismatch(self):
        t = Tape()
        with pytest.raises(ValueError):
            ad.spmm(sp.identity(3, format="csr"), t.leaf(np.ones((2, 2))))

    def test_matmul_shape_mismatch(self):
        t = Tape()
        with pytest.raises(ValueError):
            ad.matmul(t.leaf(np.ones((2, 3))), t.leaf(np.ones((2, 3))))

    def test_log_clamps_at_floor(self):
        t = Tape()
        x = t.leaf(np.array([[0.0, 1.0]]))
        y = ad.log(x)
        assert y.data[0, 0] == math.log(1e-12)
        assert y.data[0, 1] == 0.0
        t.backward(ad.sum_all(y))
        assert x.grad[0, 0] == 0.0  # flat inside the clamp
        assert x.grad[0, 1] == 1.0


class TestNeighborhoodSoftmax:
    def test_single_neighbor_coefficient_is_one(self):
        es = EdgeSet.from_adjacency(sp.identity(2, format="csr"))
        t = Tape()
        out = ad.neighborhood_softmax(t.leaf(np.array([[3.0], [-1.0]])), es)
        np.testing.assert_array_equal(out.data, [[1.0], [1.0]])

    def test_equal_scores_split_evenly(self):
        es = star_edge_set(2)
        t = Tape()
        scores = t.leaf(np.zeros((es.n_edges, 1)))
        out = ad.neighborhood_softmax(scores, es)
        np.testing.assert_allclose(out.data, 0.5)

    def test_softmax_of_1_2_3(self):
        es = star_edge_set(3)
        t = Tape()
        scores = np.zeros((es.n_edges, 1))
        scores[:3, 0] = [1.0, 2.0, 3.0]  # node 0's segment
        out = ad.neighborhood_softmax(t.leaf(scores), es)
        expected = np.exp([1.0, 2.0, 3.0])
        expected /= expected.sum()
        np.testing.assert_allclose(out.data[:3, 0], expected, rtol=1e-12)

    def test_shift_invariance(self):
        rng = np.random.default_rng(3)
        es = star_edge_set(5)
        t = Tape()
        scores = rng.standard_normal((es.n_edges, 1))
        a = ad.neighborhood_softmax(t.leaf(scores), es)
        b = ad.neighborhood_softmax(t.leaf(scores + 17.5), es)
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12)

    def test_segments_sum_to_one(self):
        rng = np.random.default_rng(4)
        es = star_edge_set(6)
        t = Tape()
        out = ad.neighborhood_softmax(t.leaf(rng.standard_normal((es.n_edges, 1))), es)
        sums = np.add.reduceat(out.data[:, 0], es.indptr[:-1])
        np.testing.assert_allclose(sums, 1.0, atol=1e-12)


class TestEdgeSet:
    def test_requires_nonempty_rows(self):
        with pytest.raises(ValueError):
            EdgeSet(np.array([0, 1, 1]), np.array([0]), 2)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            EdgeSet(np.array([0, 1, 2]), np.array([0, 5]), 2)

    def test_neighbor_list_roundtrip(self):
        es = star_edge_set(3)
        neigh = es.neighbor_list()
        np.testing.assert_array_equal(neigh[0], [0, 1, 2])
        np.testing.assert_array_equal(neigh[1], [0, 1])


def _fd_check(build, params, tol=1e-7):
    """FD-verify the gradient of build() (fresh forward) for every param."""
    t = Tape()
    for p in params:
        t.adopt(p)
    zero_grads(params)
    t.backward(build(params))

    def evaluate():
        t2 = Tape()
        clones = []
        for p in params:
            c = DiffValue(p.data)
            t2.adopt(c)
            clones.append(c)
        return build(clones).item()

    for p in params:
        numeric = finite_difference_gradient(evaluate, p)
        assert max_relative_error(p.grad, numeric) < tol


class TestGradientsPerOp:
    """Central finite differences against the tape for every recorded op."""

    def setup_method(self):
        self.rng = np.random.default_rng(11)

    def param(self, *shape):
        return DiffValue(self.rng.standard_normal(shape))

    def test_matmul(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.matmul(ps[0], ps[1])),
                  [self.param(4, 3), self.param(3, 5)])

    def test_add_broadcast(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.add(ps[0], ps[1])),
                  [self.param(4, 3), self.param(4, 1)])

    def test_sub_broadcast(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.sub(ps[0], ps[1])),
                  [self.param(4, 3), self.param(1, 3)])

    def test_mul_broadcast(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.mul(ps[0], ps[1])),
                  [self.param(4, 3), self.param(4, 1)])

    def test_scale_add_scalar(self):
        _fd_check(lambda ps: ad.sum_all(ad.add_scalar(ad.scale(ps[0], -2.5), 0.75)),
                  [self.param(3, 3)])

    def test_sigmoid(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.sigmoid(ps[0])), [self.param(4, 4)])

    def test_exp_log(self):
        p = DiffValue(self.rng.uniform(0.5, 2.0, (3, 3)))
        _fd_check(lambda ps: ad.sum_all(ad.log(ad.exp(ps[0]))), [p])

    def test_reciprocal(self):
        p = DiffValue(self.rng.uniform(0.5, 2.0, (3, 3)))
        _fd_check(lambda ps: ad.frobenius_sq(ad.reciprocal(ps[0])), [p])

    def test_transpose_row_sum_diag(self):
        _fd_check(
            lambda ps: ad.sum_all(ad.mul(ad.row_sum(ps[0]), ad.diag_part(ad.matmul(ps[0], ad.transpose(ps[0]))))),
            [self.param(4, 4)],
        )

    def test_row_l2_normalize(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.row_l2_normalize(ps[0])), [self.param(5, 3)])

    def test_row_l2_normalize_tangent_at_unit_row(self):
        # At a unit row the Jacobian is the tangent-space projector I - x x^T.
        x = np.array([[0.6, 0.8]])
        t = Tape()
        v = t.leaf(x)
        t.backward(ad.sum_all(ad.mul(ad.row_l2_normalize(v), t.leaf(np.array([[1.0, 0.0]])))))
        projector = np.eye(2) - x.T @ x
        np.testing.assert_allclose(v.grad, (projector @ np.array([[1.0], [0.0]])).T, atol=1e-12)

    def test_pairwise_sqdist(self):
        _fd_check(lambda ps: ad.frobenius_sq(ad.pairwise_sqdist(ps[0], ps[1])),
                  [self.param(5, 3), self.param(2, 3)])

    def test_spmm(self):
        a_hat = sp.csr_matrix(np.abs(self.rng.standard_normal((4, 4))))
        _fd_check(lambda ps: ad.frobenius_sq(ad.spmm(a_hat, ps[0])), [self.param(4, 3)])

    def test_edge_affinity(self):
        es = star_edge_set(4)
        _fd_check(lambda ps: ad.frobenius_sq(ad.edge_affinity(ps[0], ps[1], es)),
                  [self.param(4, 1), self.param(4, 1)])

    def test_neighborhood_softmax(self):
        es = star_edge_set(4)
        w = DiffValue(self.rng.standard_normal((es.n_edges, 1)))
        _fd_check(
            lambda ps: ad.sum_all(ad.mul(ad.neighborhood_softmax(ps[0], es), ps[1])),
            [self.param(es.n_edges, 1), w],
        )

    def test_edge_aggregate(self):
        es = star_edge_set(4)
        _fd_check(
            lambda ps: ad.frobenius_sq(ad.edge_aggregate(ps[0], ps[1], es)),
            [self.param(es.n_edges, 1), self.param(4, 3)],
        )

    def test_edge_dot(self):
        es = star_edge_set(5)
        _fd_check(lambda ps: ad.frobenius_sq(ad.edge_dot(ps[0], es)), [self.param(5, 3)])
