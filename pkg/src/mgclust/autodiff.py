"""Reverse-mode automatic differentiation over dense matrices and CSR graph ops.

A deliberately small engine: every value is a 2-D float64 matrix, a ``Tape``
records operations in execution order, and ``Tape.backward`` replays the
record in exact reverse. There is no control-flow capture, no higher-order
differentiation, and no GPU path.

Reduction order is fixed so results are reproducible bit for bit on a given
machine: sparse patterns are CSR with ascending column indices, segment
reductions run in ascending edge order, and dense reductions use numpy's
default (C-order) accumulation.
"""

import numpy as np
import scipy.sparse as sp

_LOG_FLOOR = 1e-12
_NORM_FLOOR = 1e-12


def _as_matrix(x):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a scalar or 2-D array, got shape {a.shape}")
    return a


class DiffValue:
    """A dense matrix participating in a recorded computation.

    ``grad`` always has the same shape as ``data``. After ``Tape.backward``
    from a scalar root, ``grad`` holds the derivative of that root with
    respect to ``data``; repeated backward calls accumulate additively until
    the grad is explicitly zeroed (see ``zero_grads``).
    """

    __slots__ = ("data", "grad", "node_id", "tape")

    def __init__(self, data):
        self.data = _as_matrix(data)
        self.grad = np.zeros_like(self.data)
        self.node_id = None
        self.tape = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.shape != (1, 1):
            raise ValueError(f"item() requires a 1x1 value, got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self):
        return f"DiffValue(shape={self.data.shape}, node_id={self.node_id})"


class _Record:
    __slots__ = ("value", "parents", "backward")

    def __init__(self, value, parents, backward):
        self.value = value
        self.parents = parents
        self.backward = backward


class Tape:
    """Ordered record of operations; backward visits it in exact reverse."""

    def __init__(self):
        self._records = []
        self._next_id = 0

    def __len__(self):
        return len(self._records)

    def adopt(self, value):
        """Register an existing DiffValue (typically a parameter) as a leaf.

        The value keeps its data and accumulated grad; only its tape binding
        changes. Returns the value for chaining.
        """
        value.tape = self
        value.node_id = self._next_id
        self._next_id += 1
        self._records.append(_Record(value, (), None))
        return value

    def leaf(self, data):
        """Create a new leaf value on this tape."""
        return self.adopt(DiffValue(data))

    def _emit(self, data, parents, backward):
        for p in parents:
            if p.tape is not self:
                raise ValueError("operand belongs to a different tape")
        out = DiffValue(data)
        out.tape = self
        out.node_id = self._next_id
        self._next_id += 1
        self._records.append(_Record(out, parents, backward))
        return out

    def reset(self):
        """Drop all records. Previously issued values become unusable."""
        self._records.clear()
        self._next_id = 0

    def backward(self, root):
        """Accumulate d(root)/d(value) into ``grad`` of every reachable value.

        ``root`` must be a 1x1 value on this tape. Calling backward again
        without zeroing grads adds another full gradient pass.
        """
        if root.tape is not self:
            raise ValueError("root does not belong to this tape")
        if root.data.shape != (1, 1):
            raise ValueError(f"backward root must be 1x1, got {root.data.shape}")
        adjoint = {root.node_id: np.ones((1, 1))}
        for rec in reversed(self._records):
            g = adjoint.pop(rec.value.node_id, None)
            if g is None:
                continue
            rec.value.grad += g
            if rec.backward is None:
                continue
            for parent, pg in zip(rec.parents, rec.backward(g)):
                pid = parent.node_id
                prev = adjoint.get(pid)
                # Never mutate stored adjoints in place: backward closures may
                # return views that alias the upstream gradient.
                adjoint[pid] = pg if prev is None else prev + pg


def zero_grads(values):
    for v in values:
        v.grad[...] = 0.0


# ---------------------------------------------------------------------------
# Graph edge structure shared by the sparse ops
# ---------------------------------------------------------------------------


class EdgeSet:
    """CSR-ordered (node, neighbor) pairs of one graph layer.

    Column indices are sorted within each row and every node has at least one
    neighbor (the self-loop), which the segment ops rely on. ``row_index`` and
    ``indices`` together enumerate all E directed pairs in fixed order.
    """

    __slots__ = ("n_nodes", "indptr", "indices", "row_index", "counts")

    def __init__(self, indptr, indices, n_nodes):
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        if indptr.shape != (n_nodes + 1,):
            raise ValueError("indptr length must be n_nodes + 1")
        counts = np.diff(indptr)
        if np.any(counts < 1):
            raise ValueError("every node needs at least one neighbor (self-loop)")
        if indices.size and (indices.min() < 0 or indices.max() >= n_nodes):
            raise ValueError("neighbor index out of range")
        self.n_nodes = n_nodes
        self.indptr = indptr
        self.indices = indices
        self.counts = counts
        self.row_index = np.repeat(np.arange(n_nodes, dtype=np.int64), counts)

    @classmethod
    def from_adjacency(cls, mat):
        m = sp.csr_matrix(mat)
        if m.shape[0] != m.shape[1]:
            raise ValueError("adjacency must be square")
        m.sort_indices()
        return cls(m.indptr, m.indices, m.shape[0])

    @property
    def n_edges(self):
        return self.indices.size

    def neighbor_list(self):
        return [self.indices[self.indptr[i]:self.indptr[i + 1]] for i in range(self.n_nodes)]


def _edge_set_of(layer):
    return layer.edge_set if hasattr(layer, "edge_set") else layer


def _sddmm(row_index, col_index, x, y):
    """Per-pair row dot products: out[k] = x[row_index[k]] . y[col_index[k]].

    Chunked so the gathered temporaries stay bounded regardless of edge count.
    """
    n = row_index.size
    out = np.empty(n, dtype=np.float64)
    step = max(1, 8_000_000 // max(1, x.shape[1]))
    for start in range(0, n, step):
        s = slice(start, min(start + step, n))
        out[s] = np.einsum("ij,ij->i", x[row_index[s]], y[col_index[s]])
    return out


def _edge_csr(values, es):
    return sp.csr_matrix((values, es.indices, es.indptr), shape=(es.n_nodes, es.n_nodes))


# ---------------------------------------------------------------------------
# Dense ops
# ---------------------------------------------------------------------------


def _unbroadcast(g, shape):
    for axis in (0, 1):
        if shape[axis] == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a, b):
    try:
        return np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ValueError(f"shapes {a.data.shape} and {b.data.shape} do not broadcast")


def matmul(a, b):
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return a.tape._emit(a.data @ b.data, (a, b), backward)


def add(a, b):
    _check_broadcast(a, b)

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return a.tape._emit(a.data + b.data, (a, b), backward)


def sub(a, b):
    _check_broadcast(a, b)

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return a.tape._emit(a.data - b.data, (a, b), backward)


def mul(a, b):
    """Elementwise product with numpy broadcasting."""
    _check_broadcast(a, b)

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return a.tape._emit(a.data * b.data, (a, b), backward)


def scale(a, c):
    c = float(c)

    def backward(g):
        return (g * c,)

    return a.tape._emit(a.data * c, (a,), backward)


def add_scalar(a, c):
    c = float(c)

    def backward(g):
        return (g,)

    return a.tape._emit(a.data + c, (a,), backward)


def elementwise_sigmoid(a):
    # Branch on sign to stay stable for large |x|.
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)

    def backward(g):
        return (g * y * (1.0 - y),)

    return a.tape._emit(y, (a,), backward)


sigmoid = elementwise_sigmoid


def exp(a):
    y = np.exp(a.data)

    def backward(g):
        return (g * y,)

    return a.tape._emit(y, (a,), backward)


def log(a, floor=_LOG_FLOOR):
    """Natural log with the argument clamped below at ``floor``."""
    clamped = np.maximum(a.data, floor)
    y = np.log(clamped)

    def backward(g):
        return (np.where(a.data > floor, g / clamped, 0.0),)

    return a.tape._emit(y, (a,), backward)


def reciprocal(a):
    y = 1.0 / a.data

    def backward(g):
        return (-g * y * y,)

    return a.tape._emit(y, (a,), backward)


def transpose(a):
    def backward(g):
        return (g.T,)

    return a.tape._emit(a.data.T, (a,), backward)


def row_sum(a):
    def backward(g):
        return (np.broadcast_to(g, a.data.shape),)

    return a.tape._emit(a.data.sum(axis=1, keepdims=True), (a,), backward)


def sum_all(a):
    def backward(g):
        return (np.broadcast_to(g, a.data.shape),)

    return a.tape._emit(np.array([[a.data.sum()]]), (a,), backward)


def diag_part(a):
    n, m = a.data.shape
    if n != m:
        raise ValueError(f"diag_part requires a square matrix, got {a.data.shape}")

    def backward(g):
        full = np.zeros_like(a.data)
        np.fill_diagonal(full, g[:, 0])
        return (full,)

    return a.tape._emit(np.diagonal(a.data).reshape(n, 1).copy(), (a,), backward)


def frobenius_sq(a):
    def backward(g):
        return (2.0 * g[0, 0] * a.data,)

    return a.tape._emit(np.array([[np.sum(a.data * a.data)]]), (a,), backward)


def row_l2_normalize(a, floor=_NORM_FLOOR):
    """Scale each row to unit L2 norm; rows with norm <= floor divide by floor."""
    norms = np.sqrt(np.sum(a.data * a.data, axis=1, keepdims=True))
    denom = np.maximum(norms, floor)
    y = a.data / denom

    def backward(g):
        dot = np.sum(g * y, axis=1, keepdims=True)
        return (np.where(norms > floor, (g - y * dot) / denom, g / denom),)

    return a.tape._emit(y, (a,), backward)


def pairwise_sqdist(a, b):
    """Squared Euclidean distances between rows of a (N x F) and b (k x F)."""
    if a.data.shape[1] != b.data.shape[1]:
        raise ValueError(f"feature widths differ: {a.data.shape} vs {b.data.shape}")
    diff = a.data[:, None, :] - b.data[None, :, :]
    y = np.einsum("ijk,ijk->ij", diff, diff)

    def backward(g):
        ga = 2.0 * (a.data * g.sum(axis=1, keepdims=True) - g @ b.data)
        gb = 2.0 * (b.data * g.sum(axis=0)[:, None] - g.T @ a.data)
        return ga, gb

    return a.tape._emit(y, (a, b), backward)


# ---------------------------------------------------------------------------
# Sparse / per-edge ops
# ---------------------------------------------------------------------------


def spmm(a_hat, h):
    """Product of a constant sparse matrix with a recorded dense matrix."""
    mat = sp.csr_matrix(a_hat)
    if mat.shape[1] != h.data.shape[0]:
        raise ValueError(f"spmm shape mismatch: {mat.shape} @ {h.data.shape}")
    mat_t = mat.T.tocsr()

    def backward(g):
        return (mat_t @ g,)

    return h.tape._emit(mat @ h.data, (h,), backward)


def edge_affinity(u, v, layer):
    """Per-pair sums u[i] + v[j] over all (i, j in neighbors(i)) pairs."""
    es = _edge_set_of(layer)
    if u.data.shape != (es.n_nodes, 1) or v.data.shape != (es.n_nodes, 1):
        raise ValueError("edge_affinity expects two (n_nodes x 1) columns")
    y = (u.data[es.row_index, 0] + v.data[es.indices, 0]).reshape(-1, 1)

    def backward(g):
        gu = np.bincount(es.row_index, weights=g[:, 0], minlength=es.n_nodes)
        gv = np.bincount(es.indices, weights=g[:, 0], minlength=es.n_nodes)
        return gu.reshape(-1, 1), gv.reshape(-1, 1)

    return u.tape._emit(y, (u, v), backward)


def neighborhood_softmax(e, layer):
    """Softmax of per-pair scores within each node's neighbor segment.

    Stabilized by subtracting the per-node maximum before exponentiation;
    each node's coefficients sum to 1.
    """
    es = _edge_set_of(layer)
    if e.data.shape != (es.n_edges, 1):
        raise ValueError(f"expected ({es.n_edges} x 1) scores, got {e.data.shape}")
    flat = e.data[:, 0]
    starts = es.indptr[:-1]
    seg_max = np.maximum.reduceat(flat, starts)
    shifted = np.exp(flat - np.repeat(seg_max, es.counts))
    seg_sum = np.add.reduceat(shifted, starts)
    coef = shifted / np.repeat(seg_sum, es.counts)

    def backward(g):
        seg_dot = np.add.reduceat(g[:, 0] * coef, starts)
        return ((coef * (g[:, 0] - np.repeat(seg_dot, es.counts))).reshape(-1, 1),)

    return e.tape._emit(coef.reshape(-1, 1), (e,), backward)


def edge_aggregate(coef, values, layer):
    """Weighted neighbor sum: out[i] = sum_j coef[(i,j)] * values[j]."""
    es = _edge_set_of(layer)
    if coef.data.shape != (es.n_edges, 1):
        raise ValueError(f"expected ({es.n_edges} x 1) coefficients, got {coef.data.shape}")
    if values.data.shape[0] != es.n_nodes:
        raise ValueError("values row count must equal n_nodes")
    w = _edge_csr(coef.data[:, 0], es)
    w_t = w.T.tocsr()

    def backward(g):
        g_coef = _sddmm(es.row_index, es.indices, g, values.data).reshape(-1, 1)
        return g_coef, w_t @ g

    return coef.tape._emit(w @ values.data, (coef, values), backward)


def edge_dot(z, layer):
    """Per-pair dot products z[i] . z[j] over all neighbor pairs."""
    es = _edge_set_of(layer)
    if z.data.shape[0] != es.n_nodes:
        raise ValueError("row count must equal n_nodes")
    y = _sddmm(es.row_index, es.indices, z.data, z.data).reshape(-1, 1)

    def backward(g):
        w = _edge_csr(g[:, 0], es)
        return (w @ z.data + w.T.tocsr() @ z.data,)

    return z.tape._emit(y, (z,), backward)


# ---------------------------------------------------------------------------
# Finite-difference checking
# ---------------------------------------------------------------------------


def finite_difference_gradient(evaluate, value, step=1e-5):
    """Central finite differences of ``evaluate()`` w.r.t. one value's data.

    ``evaluate`` must rebuild the computation from current data and return a
    float. The value's data is perturbed in place and restored.
    """
    grad = np.zeros_like(value.data)
    flat = value.data.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = evaluate()
        flat[i] = orig - step
        f_minus = evaluate()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric, abs_floor=1e-8):
    """Worst-case relative disagreement, ignoring entries within abs_floor."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("gradient shapes differ")
    diff = np.abs(a - b)
    ref = np.maximum(np.abs(a), np.abs(b))
    mask = diff > abs_floor
    if not np.any(mask):
        return 0.0
    return float(np.max(diff[mask] / ref[mask]))
