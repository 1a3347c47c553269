"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation (same traversal order,
same sequential accumulation) so both backends grow identical trees.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

CRIT_MSE = 0
CRIT_CAUSAL = 1


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def _sample_features(state: int, p: int, mtry: int) -> tuple[int, list[int]]:
    perm = list(range(p))
    for i in range(mtry):
        state, r = splitmix64(state)
        j = i + r % (p - i)
        perm[i], perm[j] = perm[j], perm[i]
    return state, sorted(perm[:mtry])


def _seq_sum(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.cumsum(a)[-1])


def grow_tree(X, y, t, arm, w, order, criterion, max_depth, min_leaf, mtry, seed):
    """Grow one tree depth-first.

    ``order`` is a ``(p, m)`` array of per-feature stable argsorts of ``X``;
    it is consumed (partitioned in place).  Returns the node arrays
    ``(feature, threshold, left, right, value, count, improvement)``.
    """
    X = np.asarray(X, dtype=np.float64)
    m, p = X.shape
    order = np.array(order, dtype=np.int64, copy=True)
    wy = w * y
    wyy = wy * y
    wt = w * t
    wty = wt * y
    wtt = wt * t
    arm = np.asarray(arm, dtype=np.int64)

    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    count = np.zeros(cap, dtype=np.int64)
    improvement = np.zeros(cap)

    state = seed & MASK64
    n_nodes = 1
    # (node, start, end, depth, parent_value)
    stack = [(0, 0, m, 0, 0.0)]
    goes_left = np.zeros(m, dtype=bool)
    while stack:
        node, start, end, depth, parent_value = stack.pop()
        seg0 = order[0, start:end]
        cnt = end - start
        count[node] = cnt
        if criterion == CRIT_MSE:
            sw = _seq_sum(w[seg0])
            swy = _seq_sum(wy[seg0])
            value[node] = swy / sw if sw > 0 else parent_value
            n1 = 0
            n0 = 0
        else:
            stt = _seq_sum(wtt[seg0])
            sty = _seq_sum(wty[seg0])
            value[node] = sty / stt if stt >= 1e-8 else parent_value
            n1 = int(arm[seg0].sum())
            n0 = cnt - n1

        if max_depth >= 0 and depth >= max_depth:
            continue
        if criterion == CRIT_MSE:
            if cnt < 2 * min_leaf:
                continue
        elif n0 < 2 * min_leaf or n1 < 2 * min_leaf:
            continue

        state, feats = _sample_features(state, p, mtry)
        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        best_parent = 0.0
        for f in feats:
            idx = order[f, start:end]
            xs = X[idx, f]
            if xs[0] == xs[-1]:
                continue
            distinct = xs[:-1] != xs[1:]
            nl = np.arange(1, cnt, dtype=np.int64)
            if criterion == CRIT_MSE:
                cw = np.cumsum(w[idx])
                cwy = np.cumsum(wy[idx])
                tot_w = cw[-1]
                tot_wy = cwy[-1]
                lw = cw[:-1]
                ly = cwy[:-1]
                rw = tot_w - lw
                ry = tot_wy - ly
                ok = distinct & (nl >= min_leaf) & (cnt - nl >= min_leaf) & (lw > 0) & (rw > 0)
                if not ok.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    score = ly * ly / lw + ry * ry / rw
                parent = tot_wy * tot_wy / tot_w
            else:
                ctt = np.cumsum(wtt[idx])
                cty = np.cumsum(wty[idx])
                cww = np.cumsum(w[idx])
                c1 = np.cumsum(arm[idx])
                tot_tt = ctt[-1]
                tot_ty = cty[-1]
                tot_w = cww[-1]
                ltt = ctt[:-1]
                lty = cty[:-1]
                lw = cww[:-1]
                rtt = tot_tt - ltt
                rty = tot_ty - lty
                rw = tot_w - lw
                l1 = c1[:-1]
                l0 = nl - l1
                r1 = n1 - l1
                r0 = n0 - l0
                ok = (
                    distinct
                    & (l1 >= min_leaf) & (l0 >= min_leaf)
                    & (r1 >= min_leaf) & (r0 >= min_leaf)
                    & (ltt >= 1e-8) & (rtt >= 1e-8)
                )
                if not ok.any():
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    thl = lty / ltt
                    thr = rty / rtt
                    score = lw * (thl * thl) + rw * (thr * thr)
                th0 = tot_ty / tot_tt
                parent = tot_w * (th0 * th0)
            score = np.where(ok, score, -np.inf)
            i = int(np.argmax(score))
            if score[i] > best_score:
                best_score = float(score[i])
                best_f = f
                lo = xs[i]
                hi = xs[i + 1]
                mid = lo + (hi - lo) * 0.5
                best_thr = mid if mid < hi else lo
                best_parent = float(parent)

        if best_f < 0:
            continue
        gain = best_score - best_parent
        if criterion == CRIT_MSE:
            scale = _seq_sum(wyy[seg0])
        else:
            scale = best_parent
        if not gain > 1e-12 * abs(scale):
            continue

        seg = order[best_f, start:end]
        goes_left[seg] = X[seg, best_f] <= best_thr
        n_left = int(goes_left[seg].sum())
        for g in range(p):
            s = order[g, start:end]
            gl = goes_left[s]
            order[g, start:end] = np.concatenate([s[gl], s[~gl]])

        feature[node] = best_f
        threshold[node] = best_thr
        improvement[node] = gain
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        mid = start + n_left
        stack.append((rid, mid, end, depth + 1, value[node]))
        stack.append((lid, start, mid, depth + 1, value[node]))

    sl = slice(0, n_nodes)
    return (feature[sl].copy(), threshold[sl].copy(), left[sl].copy(), right[sl].copy(),
            value[sl].copy(), count[sl].copy(), improvement[sl].copy())


def apply_tree(feature, threshold, left, right, X):
    """Leaf index reached by every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.int64)
    active = np.flatnonzero(feature[node] >= 0)
    while active.size:
        nd = node[active]
        f = feature[nd]
        go_left = X[active, f] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return node


def enet_cd_gram(G, c, beta, lam1, lam2, tol, max_sweeps):
    """Cyclic coordinate descent on ``0.5 b'Gb - c'b + lam1|b|_1 + lam2/2 |b|^2``.

    ``beta`` is updated in place.  Returns ``(sweeps, converged)``.
    """
    d = G.shape[0]
    q = G @ beta
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(d):
            gjj = G[j, j]
            old = beta[j]
            if gjj <= 0.0:
                new = 0.0
            else:
                rho = c[j] - q[j] + gjj * old
                if rho > lam1:
                    new = (rho - lam1) / (gjj + lam2)
                elif rho < -lam1:
                    new = (rho + lam1) / (gjj + lam2)
                else:
                    new = 0.0
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                q += delta * G[:, j]
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            return sweep, True
    return max_sweeps, False


def _tie_pairs(sorted_vals) -> int:
    total = 0
    run = 1
    for i in range(1, len(sorted_vals)):
        if sorted_vals[i] == sorted_vals[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def kendall_counts(u_sorted, v_by_u):
    """Knight's O(n log n) tie-aware pair counts.

    ``u_sorted`` is ``u`` sorted ascending and ``v_by_u`` holds ``v`` in the
    same lexicographic ``(u, v)`` order.  Returns
    ``(n0, ties_u, ties_v, ties_uv, discordant_swaps)``.
    """
    u = [float(a) for a in u_sorted]
    v = [float(a) for a in v_by_u]
    n = len(u)
    n0 = n * (n - 1) // 2
    ties_u = _tie_pairs(u)
    ties_uv = 0
    run = 1
    for i in range(1, n):
        if u[i] == u[i - 1] and v[i] == v[i - 1]:
            run += 1
        else:
            ties_uv += run * (run - 1) // 2
            run = 1
    ties_uv += run * (run - 1) // 2

    swaps = 0
    buf = v[:]
    tmp = [0.0] * n
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i, j, k = lo, mid, lo
            while i < mid and j < hi:
                if buf[j] < buf[i]:
                    tmp[k] = buf[j]
                    swaps += mid - i
                    j += 1
                else:
                    tmp[k] = buf[i]
                    i += 1
                k += 1
            while i < mid:
                tmp[k] = buf[i]
                i += 1
                k += 1
            while j < hi:
                tmp[k] = buf[j]
                j += 1
                k += 1
        buf, tmp = tmp, buf
        width *= 2
    ties_v = _tie_pairs(buf)
    return n0, ties_u, ties_v, ties_uv, swaps
