"""Compiled numerical kernels.

Two hot paths live here: Euclidean ground distances between word-vector
sets, and an exact transportation network simplex. Both are plain scalar
loops compiled with numba so that every caller (cached or not, scalar or
batched) produces bitwise-identical values.
"""

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_PIVOT_LIMIT = 1


@njit(cache=True, nogil=True)
def pairwise_distances(vx, vy):
    """Euclidean distance matrix between the rows of vx and vy (float64).

    Each entry is an independent sequential sum over coordinates, so
    sub-blocks, transposes and scalar calls all agree bitwise.
    """
    m = vx.shape[0]
    n = vy.shape[0]
    d = vx.shape[1]
    out = np.empty((m, n), np.float64)
    for i in range(m):
        for j in range(n):
            s = 0.0
            for k in range(d):
                t = vx[i, k] - vy[j, k]
                s += t * t
            out[i, j] = np.sqrt(s)
    return out


@njit(cache=True, nogil=True)
def wmd_row(doc_vecs, doc_weights, omega_vecs, omega_weights, offsets,
            perturbation, enter_tol):
    """Transportation objectives of one document against packed omegas.

    omega_vecs / omega_weights hold all random documents concatenated;
    offsets[j]:offsets[j+1] delimits the j-th one. Returns the objective
    per omega, or -1.0 where the solver failed. Calls the same kernels as
    the scalar path, so values agree bitwise with per-cell evaluation.
    """
    r = offsets.shape[0] - 1
    m = doc_vecs.shape[0]
    out = np.empty(r, np.float64)
    for j in range(r):
        lo = offsets[j]
        hi = offsets[j + 1]
        cost = pairwise_distances(doc_vecs, omega_vecs[lo:hi])
        max_pivots = 200 * m * (hi - lo) + 1000
        flow, obj, u, v, pivots, status = solve_transportation(
            cost, doc_weights, omega_weights[lo:hi], perturbation,
            enter_tol, max_pivots)
        out[j] = obj if status == STATUS_OK else -1.0
    return out


@njit(cache=True, nogil=True)
def wmd_pairs_direct(vx, wx, vecs, weights, offsets, js, perturbation,
                     enter_tol):
    """Objectives of one document (vx, wx) against documents js of a
    packed corpus, distances computed on the fly. Documents of the packed
    corpus are delimited by offsets[k]:offsets[k+1] in vecs / weights."""
    out = np.empty(js.size, np.float64)
    m = vx.shape[0]
    for t in range(js.size):
        j = js[t]
        vy = vecs[offsets[j]:offsets[j + 1]]
        wy = weights[offsets[j]:offsets[j + 1]]
        cost = pairwise_distances(vx, vy)
        max_pivots = 200 * m * vy.shape[0] + 1000
        flow, obj, u, v, pivots, status = solve_transportation(
            cost, wx, wy, perturbation, enter_tol, max_pivots)
        out[t] = obj if status == STATUS_OK else -1.0
    return out


@njit(cache=True, nogil=True)
def wmd_pairs_gather(row_block, wx, col_slots, weights, offsets, js,
                     perturbation, enter_tol):
    """Objectives of one document against documents js, with costs
    gathered from a prefetched distance block.

    row_block[:, col_slots[offsets[j] + t]] is the distance from the
    document's words to word t of document j; weights is the packed
    weight array of the column-side corpus."""
    out = np.empty(js.size, np.float64)
    m = row_block.shape[0]
    for t in range(js.size):
        j = js[t]
        lo = offsets[j]
        hi = offsets[j + 1]
        width = hi - lo
        cost = np.empty((m, width), np.float64)
        for a in range(m):
            for c in range(width):
                cost[a, c] = row_block[a, col_slots[lo + c]]
        wy = weights[lo:hi]
        max_pivots = 200 * m * width + 1000
        flow, obj, u, v, pivots, status = solve_transportation(
            cost, wx, wy, perturbation, enter_tol, max_pivots)
        out[t] = obj if status == STATUS_OK else -1.0
    return out


@njit(cache=True, nogil=True)
def _rebuild_potentials(cost, row_adj, row_deg, col_adj, col_deg,
                        u, v, stack, seen_row, seen_col):
    """Solve u_i + v_j = cost_ij over the basis tree, anchored at u_0 = 0."""
    m = u.shape[0]
    n = v.shape[0]
    for i in range(m):
        seen_row[i] = 0
    for j in range(n):
        seen_col[j] = 0
    u[0] = 0.0
    seen_row[0] = 1
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if node < m:
            i = node
            for t in range(row_deg[i]):
                j = row_adj[i, t]
                if seen_col[j] == 0:
                    v[j] = cost[i, j] - u[i]
                    seen_col[j] = 1
                    stack[sp] = m + j
                    sp += 1
        else:
            j = node - m
            for t in range(col_deg[j]):
                i2 = col_adj[j, t]
                if seen_row[i2] == 0:
                    u[i2] = cost[i2, j] - v[j]
                    seen_row[i2] = 1
                    stack[sp] = i2
                    sp += 1


@njit(cache=True, nogil=True)
def solve_transportation(cost, supply, demand, perturbation, enter_tol,
                         max_pivots):
    """Exact transportation simplex for min <cost, F> with fixed marginals.

    supply and demand must be strictly positive and sum to the same total.
    Pivoting is deterministic: entering arc is the most negative reduced
    cost with ties broken by lowest row then lowest column index; after a
    run of degenerate pivots the rule falls back to Bland's first-negative
    scan in the same lexicographic order. Degeneracy is held off by adding
    `perturbation` to every supply (balanced on the last demand); the
    returned flows are recomputed from the unperturbed marginals on the
    final basis tree, so the perturbation never reaches the caller.

    Returns (flow, objective, u, v, pivots, status) where u, v are the
    final dual potentials (reduced cost of (i, j) is cost_ij - u_i - v_j).
    """
    m = cost.shape[0]
    n = cost.shape[1]
    nodes = m + n
    nb = m + n - 1

    a = np.empty(m, np.float64)
    b = np.empty(n, np.float64)
    for i in range(m):
        a[i] = supply[i] + perturbation
    for j in range(n):
        b[j] = demand[j]
    b[n - 1] += m * perturbation

    in_basis = np.zeros((m, n), np.uint8)
    flow = np.zeros((m, n), np.float64)
    row_adj = np.empty((m, n), np.int64)
    row_deg = np.zeros(m, np.int64)
    col_adj = np.empty((n, m), np.int64)
    col_deg = np.zeros(n, np.int64)

    # Least-cost start: allocate at the cheapest live cell and cross out
    # exactly one exhausted line per step (ties broken lexicographically),
    # which yields m + n - 1 basic arcs forming a tree and usually lands
    # much closer to the optimum than a cost-blind start.
    live_row = np.ones(m, np.uint8)
    live_col = np.ones(n, np.uint8)
    rows_left = m
    cols_left = n
    for step in range(nb):
        best = np.inf
        bi = -1
        bj = -1
        for i in range(m):
            if live_row[i] == 1:
                for j in range(n):
                    if live_col[j] == 1 and cost[i, j] < best:
                        best = cost[i, j]
                        bi = i
                        bj = j
        f = a[bi] if a[bi] < b[bj] else b[bj]
        flow[bi, bj] = f
        in_basis[bi, bj] = 1
        row_adj[bi, row_deg[bi]] = bj
        row_deg[bi] += 1
        col_adj[bj, col_deg[bj]] = bi
        col_deg[bj] += 1
        a[bi] -= f
        b[bj] -= f
        if step == nb - 1:
            break
        # Live supply always equals live demand, so a zero line is
        # available whenever the "exhausted" side is down to one line.
        if a[bi] == 0.0 and rows_left > 1:
            live_row[bi] = 0
            rows_left -= 1
        elif b[bj] == 0.0 and cols_left > 1:
            live_col[bj] = 0
            cols_left -= 1
        elif a[bi] == 0.0:
            live_col[bj] = 0
            cols_left -= 1
        else:
            live_row[bi] = 0
            rows_left -= 1

    u = np.empty(m, np.float64)
    v = np.empty(n, np.float64)
    stack = np.empty(nodes, np.int64)
    seen_row = np.empty(m, np.uint8)
    seen_col = np.empty(n, np.uint8)
    prev_node = np.empty(nodes, np.int64)
    arc_i = np.empty(nodes, np.int64)
    arc_j = np.empty(nodes, np.int64)

    pivots = 0
    stall = 0
    bland = False
    status = STATUS_OK

    while True:
        _rebuild_potentials(cost, row_adj, row_deg, col_adj, col_deg,
                            u, v, stack, seen_row, seen_col)

        ei = -1
        ej = -1
        if bland:
            for i in range(m):
                if ei >= 0:
                    break
                for j in range(n):
                    if in_basis[i, j] == 0:
                        if cost[i, j] - u[i] - v[j] < -enter_tol:
                            ei = i
                            ej = j
                            break
        else:
            best = -enter_tol
            for i in range(m):
                for j in range(n):
                    if in_basis[i, j] == 0:
                        r = cost[i, j] - u[i] - v[j]
                        if r < best:
                            best = r
                            ei = i
                            ej = j
        if ei < 0:
            break
        if pivots >= max_pivots:
            status = STATUS_PIVOT_LIMIT
            break

        # Unique tree path from row node ei to column node ej.
        for k in range(nodes):
            prev_node[k] = -2
        prev_node[ei] = -1
        stack[0] = ei
        sp = 1
        target = m + ej
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if node == target:
                break
            if node < m:
                i = node
                for t in range(row_deg[i]):
                    cn = m + row_adj[i, t]
                    if prev_node[cn] == -2:
                        prev_node[cn] = node
                        stack[sp] = cn
                        sp += 1
            else:
                j = node - m
                for t in range(col_deg[j]):
                    rn = col_adj[j, t]
                    if prev_node[rn] == -2:
                        prev_node[rn] = node
                        stack[sp] = rn
                        sp += 1

        # Collect path arcs walking back from ej; positions are later
        # re-indexed from the ei side where the alternation starts at -theta.
        length = 0
        cur = target
        while cur != ei:
            par = prev_node[cur]
            if cur < m:
                arc_i[length] = cur
                arc_j[length] = par - m
            else:
                arc_i[length] = par
                arc_j[length] = cur - m
            length += 1
            cur = par

        theta = np.inf
        li = -1
        lj = -1
        for t2 in range(length):
            t = length - 1 - t2
            if t % 2 == 0:
                fi = arc_i[t2]
                fj = arc_j[t2]
                f = flow[fi, fj]
                if f < theta or (f == theta and
                                 (fi < li or (fi == li and fj < lj))):
                    theta = f
                    li = fi
                    lj = fj

        flow[ei, ej] = theta
        for t2 in range(length):
            t = length - 1 - t2
            if t % 2 == 0:
                flow[arc_i[t2], arc_j[t2]] -= theta
            else:
                flow[arc_i[t2], arc_j[t2]] += theta
        flow[li, lj] = 0.0

        in_basis[li, lj] = 0
        for t in range(row_deg[li]):
            if row_adj[li, t] == lj:
                row_adj[li, t] = row_adj[li, row_deg[li] - 1]
                row_deg[li] -= 1
                break
        for t in range(col_deg[lj]):
            if col_adj[lj, t] == li:
                col_adj[lj, t] = col_adj[lj, col_deg[lj] - 1]
                col_deg[lj] -= 1
                break
        in_basis[ei, ej] = 1
        row_adj[ei, row_deg[ei]] = ej
        row_deg[ei] += 1
        col_adj[ej, col_deg[ej]] = ei
        col_deg[ej] += 1

        pivots += 1
        if theta <= 0.0:
            stall += 1
            if stall > nodes:
                bland = True
        else:
            stall = 0
            bland = False

    # Strip the perturbation: rebuild basic flows from the original
    # marginals by peeling leaves off the final tree.
    res_row = supply.copy()
    res_col = demand.copy()
    live_row = row_deg.copy()
    live_col = col_deg.copy()
    removed = np.zeros((m, n), np.uint8)
    out = np.zeros((m, n), np.float64)
    queue = np.empty(nodes, np.int64)
    qh = 0
    qt = 0
    for i in range(m):
        if live_row[i] == 1:
            queue[qt] = i
            qt += 1
    for j in range(n):
        if live_col[j] == 1:
            queue[qt] = m + j
            qt += 1

    objective = 0.0
    processed = 0
    while qh < qt and processed < nb:
        node = queue[qh]
        qh += 1
        if node < m:
            i = node
            if live_row[i] != 1:
                continue
            jj = -1
            for t in range(row_deg[i]):
                j2 = row_adj[i, t]
                if removed[i, j2] == 0:
                    jj = j2
                    break
            if jj < 0:
                continue
            f = res_row[i]
            if f < 0.0:
                f = 0.0
            out[i, jj] = f
            objective += f * cost[i, jj]
            res_row[i] = 0.0
            res_col[jj] -= f
            removed[i, jj] = 1
            live_row[i] = 0
            live_col[jj] -= 1
            if live_col[jj] == 1:
                queue[qt] = m + jj
                qt += 1
            processed += 1
        else:
            j = node - m
            if live_col[j] != 1:
                continue
            ii = -1
            for t in range(col_deg[j]):
                i2 = col_adj[j, t]
                if removed[i2, j] == 0:
                    ii = i2
                    break
            if ii < 0:
                continue
            f = res_col[j]
            if f < 0.0:
                f = 0.0
            out[ii, j] = f
            objective += f * cost[ii, j]
            res_col[j] = 0.0
            res_row[ii] -= f
            removed[ii, j] = 1
            live_col[j] = 0
            live_row[ii] -= 1
            if live_row[ii] == 1:
                queue[qt] = ii
                qt += 1
            processed += 1

    return out, objective, u, v, pivots, status
