"""Hand-set networks, constructions and independent oracles shared by the tests.

The oracles avoid the package's LP kernel and geometry code: they use plain
Python loops for forward passes and scipy's HiGHS for every LP.
"""
import itertools
import json
from pathlib import Path

import numpy as np
from scipy.optimize import linprog

from relu_pwa.network import ReluNetwork, random_network

DATA = Path(__file__).parent / "data"

ACCEPTANCE_NETS = {
    "2-10-10-2": (2, 10, 10, 2),
    "2-20-20-2": (2, 20, 20, 2),
    "3-10-10-3": (3, 10, 10, 3),
}
ACCEPTANCE_SEED = 0
ACCEPTANCE_LINES = []
ACCEPTANCE_BIAS = 0.3


def acceptance_net(name):
    return random_network(ACCEPTANCE_NETS[name], seed=ACCEPTANCE_SEED, bias_scale=ACCEPTANCE_BIAS)


# ---------------------------------------------------------------------------
# hand-set networks


def relu_net():
    """y = relu(x)."""
    return ReluNetwork(([[1.0]], [[1.0]]), ([0.0], [0.0]))


def identity_net():
    """y = relu(x) - relu(-x) = x."""
    return ReluNetwork(([[1.0], [-1.0]], [[1.0, -1.0]]), ([0.0, 0.0], [0.0]))


def abs_net():
    """y = relu(x) + relu(-x) = |x|."""
    return ReluNetwork(([[1.0], [-1.0]], [[1.0, 1.0]]), ([0.0, 0.0], [0.0]))


def identity_net_2d():
    I = np.eye(2)
    return ReluNetwork((np.vstack([I, -I]), np.hstack([I, -I])), (np.zeros(4), np.zeros(2)))


def net_2_3_1():
    W1 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b1 = np.array([0.0, 0.0, -0.5])
    return ReluNetwork((W1, np.array([[1.0, -1.0, 2.0]])), (b1, np.array([0.0])))


def net_1_2_2_1():
    """Layer-1 flip at x = 0 zeroes the normal of the layer-2 neurons."""
    W1 = np.array([[1.0], [1.0]])
    b1 = np.array([0.0, -1.0])
    W2 = np.array([[1.0, 0.0], [-1.0, 2.0]])
    b2 = np.array([-0.5, 0.25])
    return ReluNetwork((W1, W2, np.array([[1.0, 1.0]])), (b1, b2, np.array([0.0])))


def hand_nets():
    """Five small nets (at most 8 hidden neurons) with their domains."""
    from relu_pwa.geometry import Polyhedron

    deep = ReluNetwork(
        (
            np.array([[1.0, -1.0], [0.5, 1.0], [-1.0, 0.2]]),
            np.array([[1.0, 1.0, 0.0], [0.0, -1.0, 1.0], [1.0, 0.0, -1.0]]),
            np.array([[1.0, 0.5, 0.0], [-0.5, 1.0, 0.3]]),
            np.array([[1.0, -1.0]]),
        ),
        (np.array([0.1, -0.2, 0.3]), np.array([-0.1, 0.2, 0.0]), np.array([0.05, -0.05]), np.array([0.0])),
    )
    zero_weight = ReluNetwork(
        (np.zeros((2, 2)), np.array([[1.0, 1.0], [1.0, -1.0]]), np.array([[1.0, 2.0]])),
        (np.array([5.0, 3.0]), np.array([-8.5, 0.0]), np.array([0.0])),
    )
    return [
        ("2-3-1", net_2_3_1(), Polyhedron.from_box([-1, -1], [1, 1])),
        ("1-2-2-1", net_1_2_2_1(), Polyhedron.from_box([-2], [2])),
        ("2-3-3-2-1", deep, Polyhedron.from_box([-1, -1], [1, 1])),
        ("2-2-2-1 constant first layer", zero_weight, Polyhedron.from_box([-1, -1], [1, 1])),
        ("2-8-1", random_network((2, 8, 1), seed=3, bias_scale=0.3), Polyhedron.from_box([-1, -1], [1, 1])),
    ]


def clamp_net():
    """x+ = clamp(0.5 x, -1, 1) per axis in 2-D."""
    I = np.eye(2)
    W1 = np.vstack([0.5 * I, 0.5 * I])
    b1 = np.array([1.0, 1.0, -1.0, -1.0])
    return ReluNetwork((W1, np.hstack([I, -I])), (b1, -np.ones(2)))


def residual_net(g: ReluNetwork, eps: float, shift: float = 10.0) -> ReluNetwork:
    """x -> x + eps * g(x), with the identity carried through neurons that stay active.

    The carried neurons compute relu(x + shift), which is affine as long as
    every coordinate stays above -shift.
    """
    n = g.input_dim
    Ws, bs = [], []
    for i, (W, b) in enumerate(zip(g.weights[:-1], g.biases[:-1])):
        k = W.shape[0]
        if i == 0:
            Wn = np.vstack([W, np.eye(n)])
            bn = np.concatenate([b, shift * np.ones(n)])
        else:
            kp = g.weights[i - 1].shape[0]
            Wn = np.zeros((k + n, kp + n))
            Wn[:k, :kp] = W
            Wn[k:, kp:] = np.eye(n)
            bn = np.concatenate([b, np.zeros(n)])
        Ws.append(Wn)
        bs.append(bn)
    Ws.append(np.hstack([eps * g.weights[-1], np.eye(n)]))
    bs.append(eps * g.biases[-1] - shift)
    return ReluNetwork(tuple(Ws), tuple(bs))


def affine_control_net(A, B, c=None, shift=10.0):
    """(x, u) -> A x + B u + c using always-active neurons."""
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    n, m = A.shape[0], B.shape[1]
    c = np.zeros(n) if c is None else np.asarray(c, float)
    W2 = np.hstack([A, B])
    return ReluNetwork((np.eye(n + m), W2), (shift * np.ones(n + m), c - shift * W2.sum(axis=1)))


def pwa_control_net():
    """x+ = 4 x + u - 3 relu(x - 2); its invariant set in [-3, 3] is [-1, 1]."""
    W1 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    b1 = np.array([10.0, 10.0, -2.0])
    return ReluNetwork((W1, np.array([[4.0, 1.0, -3.0]])), (b1, np.array([-50.0])))


# ---------------------------------------------------------------------------
# oracles


def oracle_forward(net: ReluNetwork, x):
    """Forward pass with explicit loops; returns (output, preactivations per layer)."""
    z = [float(v) for v in x]
    pres = []
    L = len(net.weights)
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for r in range(W.shape[0]):
            s = float(b[r])
            for c in range(W.shape[1]):
                s += float(W[r, c]) * z[c]
            out.append(s)
        if i < L - 1:
            pres.append(out)
            z = [v if v > 0 else 0.0 for v in out]
        else:
            z = out
    return np.array(z), pres


def oracle_pattern_constraints(net: ReluNetwork, bits):
    """Constraints ``G x <= h`` of a pattern by symbolic propagation.

    Each hidden neuron's preactivation on the pattern's region is ``p x + q``;
    an active neuron needs ``p x + q >= 0`` and an inactive one ``<= 0``.
    """
    n = net.input_dim
    lin = [np.eye(n)[i] for i in range(n)]
    off = [0.0] * n
    G, h = [], []
    k = 0
    for W, b in zip(net.weights[:-1], net.biases[:-1]):
        new_lin, new_off = [], []
        for r in range(W.shape[0]):
            p = sum(W[r, c] * lin[c] for c in range(W.shape[1]))
            q = b[r] + sum(W[r, c] * off[c] for c in range(W.shape[1]))
            if bits[k]:
                G.append(-p)
                h.append(q)
                new_lin.append(p)
                new_off.append(q)
            else:
                G.append(p)
                h.append(-q)
                new_lin.append(0 * p)
                new_off.append(0.0)
            k += 1
        lin, off = new_lin, new_off
    return np.array(G).reshape(-1, n), np.array(h)


def inscribed_radius(G, h, lo, hi):
    """Largest ball radius inside ``{G x <= h} ∩ box`` via HiGHS; -inf if empty."""
    n = len(lo)
    I = np.eye(n)
    A = np.vstack([G, I, -I]) if len(G) else np.vstack([I, -I])
    b = np.concatenate([h, hi, -np.asarray(lo)]) if len(G) else np.concatenate([hi, -np.asarray(lo)])
    norms = np.linalg.norm(A, axis=1)
    A_aux = np.column_stack([A, norms])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    bounds = [(None, None)] * n + [(None, 10.0)]
    res = linprog(c, A_ub=A_aux, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        return -np.inf
    return -res.fun


def brute_force_patterns(net: ReluNetwork, lo, hi, min_radius=1e-9):
    """All patterns realized on a set with interior inside the box.

    An active neuron whose preactivation is a nonpositive constant on the
    region can never be strictly positive, so such patterns are not realized
    by any point even when their closed polyhedron has interior.
    """
    out = set()
    for bits in itertools.product([0, 1], repeat=net.n_hidden):
        G, h = oracle_pattern_constraints(net, bits)
        active = np.array(bits, dtype=bool)
        constant = np.linalg.norm(G, axis=1) <= 1e-12
        if np.any(active & constant & (h <= 1e-12)):
            continue
        if inscribed_radius(G, h, lo, hi) > min_radius:
            out.add("".join(map(str, bits)))
    return out


def lift_feasible(A, b, keep, x):
    """Is ``x`` (on the kept coordinates) extendable to a point of ``{A z <= b}``?"""
    dim = A.shape[1]
    drop = [d for d in range(dim) if d not in keep]
    A_keep, A_drop = A[:, keep], A[:, drop]
    rhs = b - A_keep @ x
    if not drop:
        return bool(np.all(rhs >= -1e-9))
    res = linprog(np.zeros(len(drop)), A_ub=A_drop, b_ub=rhs, bounds=[(None, None)] * len(drop), method="highs")
    return res.status == 0


def vertex_enumeration_facets(A, b, tol=1e-9):
    """Rows of a bounded 2-D polygon that carry an edge (two distinct vertices)."""
    M = A.shape[0]
    verts = []
    for i in range(M):
        for j in range(i + 1, M):
            D = A[[i, j]]
            if abs(np.linalg.det(D)) < 1e-12:
                continue
            v = np.linalg.solve(D, b[[i, j]])
            if np.all(A @ v <= b + 1e-9):
                verts.append(v)
    verts = np.array(verts)
    facets = []
    for i in range(M):
        on = verts[np.abs(verts @ A[i] - b[i]) <= 1e-7]
        if on.shape[0] >= 2 and np.max(np.linalg.norm(on - on[0], axis=1)) > tol:
            facets.append(i)
    return facets


def facet_point(poly, i):
    """A point of facet ``i`` as far as possible from the other rows (HiGHS)."""
    A, b = poly.A, poly.b
    others = [j for j in range(A.shape[0]) if j != i]
    n = A.shape[1]
    Ao = A[others]
    norms = np.linalg.norm(Ao, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(
        c,
        A_ub=np.column_stack([Ao, norms]),
        b_ub=b[others],
        A_eq=np.append(A[i], 0.0)[None, :],
        b_eq=[b[i]],
        bounds=[(None, None)] * n + [(None, 10.0)],
        method="highs",
    )
    if res.status != 0:
        return None, -np.inf
    return res.x[:n], res.x[n]


def load_golden():
    return json.loads((DATA / "golden.json").read_text())
