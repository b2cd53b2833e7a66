"""Network simplex kernel for the dense transportation problem.

Sources are nodes ``0..n1-1``, sinks ``n1..n1+n2-1`` and an artificial root
closes the spanning tree. Real arcs ``e = i * n2 + j`` run source to sink and
are uncapacitated; artificial arc ``n1 * n2 + u`` links node ``u`` with the
root (towards it for nonnegative supply, away from it otherwise).

The tree is kept strongly feasible (every zero-flow arc points towards the
root) and the leaving arc is chosen by Cunningham's last-blocking-arc rule,
which rules out cycling. Pricing is a block search over real arcs resumed
where the previous search stopped; ties go to the earliest arc scanned.

Node potentials are split into an exact offset inherited from the artificial
arc that hangs the node's subtree off the root (0 or the big-M cost) and a
local part built from real costs only. Reduced costs of arcs inside one
subtree never see the big-M constant, so pricing stays accurate.
"""

import numpy as np
from numba import njit

UP = 1
DOWN = -1

OPTIMAL = 0
MAX_ITER_REACHED = 1
UNBOUNDED = 2


@njit(cache=True)
def _ends(e, n1, n2, n_real, art_up, root):
    if e < n_real:
        return e // n2, n1 + e % n2
    u = e - n_real
    if art_up[u]:
        return u, root
    return root, u


@njit(cache=True)
def _arc_cost(e, C, n2, n_real, art_up, art):
    if e < n_real:
        return C[e // n2, e % n2]
    if art_up[e - n_real]:
        return 0.0
    return art


@njit(cache=True)
def _rebuild(basis, C, n1, n2, art_up, art, parent, pred_slot, pred_dir, depth,
             local, offset, start, adj, fill, queue, seen):
    n_nodes = n1 + n2
    root = n_nodes
    n_real = n1 * n2
    start[:] = 0
    for s in range(n_nodes):
        a, b = _ends(basis[s], n1, n2, n_real, art_up, root)
        start[a + 1] += 1
        start[b + 1] += 1
    for u in range(n_nodes + 1):
        start[u + 1] += start[u]
    fill[:] = start[:-1]
    for s in range(n_nodes):
        a, b = _ends(basis[s], n1, n2, n_real, art_up, root)
        adj[fill[a]] = s
        fill[a] += 1
        adj[fill[b]] = s
        fill[b] += 1

    seen[:] = False
    seen[root] = True
    parent[root] = -1
    depth[root] = 0
    local[root] = 0.0
    offset[root] = 0.0
    queue[0] = root
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for k in range(start[u], start[u + 1]):
            s = adj[k]
            e = basis[s]
            a, b = _ends(e, n1, n2, n_real, art_up, root)
            v = b if a == u else a
            if seen[v]:
                continue
            seen[v] = True
            parent[v] = u
            pred_slot[v] = s
            depth[v] = depth[u] + 1
            c = _arc_cost(e, C, n2, n_real, art_up, art)
            # reduced cost c + pi[tail] - pi[head] is zero on tree arcs
            if a == v:
                pred_dir[v] = UP
                p = local[u] - c
            else:
                pred_dir[v] = DOWN
                p = local[u] + c
            if u == root:
                offset[v] = p
                local[v] = 0.0
            else:
                offset[v] = offset[u]
                local[v] = p
            queue[tail] = v
            tail += 1


@njit(cache=True)
def network_simplex(C, a, b, max_iter, tol):
    """Solve min <P, C> over couplings of ``a`` and ``b``.

    Returns ``(basis, flow, local, offset, status, iterations)`` where
    ``basis`` holds the arc ids of the final spanning tree and ``flow`` their
    flows. Potentials are ``local + offset`` per node (root last).
    """
    n1, n2 = C.shape
    n_nodes = n1 + n2
    root = n_nodes
    n_real = n1 * n2

    max_abs = 0.0
    for i in range(n1):
        for j in range(n2):
            if abs(C[i, j]) > max_abs:
                max_abs = abs(C[i, j])
    art = (max_abs + 1.0) * n_nodes

    art_up = np.empty(n_nodes, dtype=np.bool_)
    basis = np.empty(n_nodes, dtype=np.int64)
    flow = np.empty(n_nodes)
    for u in range(n_nodes):
        supply = a[u] if u < n1 else -b[u - n1]
        art_up[u] = supply >= 0.0
        basis[u] = n_real + u
        flow[u] = abs(supply)
    in_tree = np.zeros(n_real, dtype=np.bool_)

    parent = np.empty(n_nodes + 1, dtype=np.int64)
    pred_slot = np.empty(n_nodes + 1, dtype=np.int64)
    pred_dir = np.zeros(n_nodes + 1, dtype=np.int64)
    depth = np.empty(n_nodes + 1, dtype=np.int64)
    local = np.empty(n_nodes + 1)
    offset = np.empty(n_nodes + 1)
    start = np.empty(n_nodes + 2, dtype=np.int64)
    adj = np.empty(2 * n_nodes, dtype=np.int64)
    fill = np.empty(n_nodes + 1, dtype=np.int64)
    queue = np.empty(n_nodes + 1, dtype=np.int64)
    seen = np.empty(n_nodes + 1, dtype=np.bool_)

    _rebuild(basis, C, n1, n2, art_up, art, parent, pred_slot, pred_dir, depth,
             local, offset, start, adj, fill, queue, seen)

    block = max(int(np.sqrt(n_real)), 10)
    next_arc = 0
    it = 0
    status = OPTIMAL
    while True:
        # block pricing
        e_in = -1
        best = 0.0
        cnt = block
        last = next_arc
        for k in range(n_real):
            e = next_arc + k
            if e >= n_real:
                e -= n_real
            last = e
            if not in_tree[e]:
                i = e // n2
                j = n1 + e % n2
                red = (C[i, e % n2] + local[i] - local[j]) + (offset[i] - offset[j])
                if red < best:
                    best = red
                    e_in = e
            cnt -= 1
            if cnt == 0:
                if best < -tol:
                    break
                cnt = block
        if e_in < 0 or best >= -tol:
            break
        next_arc = last + 1
        if next_arc >= n_real:
            next_arc = 0
        if it >= max_iter:
            status = MAX_ITER_REACHED
            break
        it += 1

        first = e_in // n2
        second = n1 + e_in % n2
        u = first
        v = second
        while u != v:
            if depth[u] > depth[v]:
                u = parent[u]
            elif depth[v] > depth[u]:
                v = parent[v]
            else:
                u = parent[u]
                v = parent[v]
        join = u

        delta = np.inf
        u_out = -1
        u = first
        while u != join:
            if pred_dir[u] == UP:
                d = flow[pred_slot[u]]
                if d < delta:
                    delta = d
                    u_out = u
            u = parent[u]
        u = second
        while u != join:
            if pred_dir[u] == DOWN:
                d = flow[pred_slot[u]]
                if d <= delta:
                    delta = d
                    u_out = u
            u = parent[u]
        if u_out < 0:
            status = UNBOUNDED
            break

        if delta > 0.0:
            u = first
            while u != join:
                if pred_dir[u] == UP:
                    flow[pred_slot[u]] -= delta
                else:
                    flow[pred_slot[u]] += delta
                u = parent[u]
            u = second
            while u != join:
                if pred_dir[u] == UP:
                    flow[pred_slot[u]] += delta
                else:
                    flow[pred_slot[u]] -= delta
                u = parent[u]

        s_out = pred_slot[u_out]
        e_out = basis[s_out]
        if e_out < n_real:
            in_tree[e_out] = False
        in_tree[e_in] = True
        basis[s_out] = e_in
        flow[s_out] = delta
        _rebuild(basis, C, n1, n2, art_up, art, parent, pred_slot, pred_dir,
                 depth, local, offset, start, adj, fill, queue, seen)

    return basis, flow, local, offset, status, it
