# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: tree growth, tree routing, elastic-net coordinate
descent and Kendall pair counting.

Arithmetic order matches ``_pykernels`` so both backends agree.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport INFINITY, fabs

cnp.import_array()

cdef enum:
    CRIT_MSE = 0


cdef inline uint64_t _splitmix(uint64_t* state) nogil:
    state[0] = state[0] + <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _seq_sum(const double[::1] a, const int64_t[:, ::1] order,
                            Py_ssize_t start, Py_ssize_t end) nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(start, end):
        s += a[order[0, i]]
    return s


def grow_tree(const double[:, ::1] X, const double[::1] y, const double[::1] t,
              arm_in, const double[::1] w, order_in, int criterion, int max_depth,
              int min_leaf, int mtry, seed):
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef int64_t[:, ::1] order = np.array(order_in, dtype=np.int64, copy=True, order="C")
    cdef int64_t[::1] arm = np.ascontiguousarray(arm_in, dtype=np.int64)
    cdef double[::1] wy = np.multiply(w, y)
    cdef double[::1] wyy = np.multiply(wy, y)
    cdef double[::1] wt = np.multiply(w, t)
    cdef double[::1] wty = np.multiply(wt, y)
    cdef double[::1] wtt = np.multiply(wt, t)

    cdef Py_ssize_t cap = 2 * m + 1
    feature_a = np.full(cap, -1, dtype=np.int64)
    threshold_a = np.zeros(cap)
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    value_a = np.zeros(cap)
    count_a = np.zeros(cap, dtype=np.int64)
    improvement_a = np.zeros(cap)
    cdef int64_t[::1] feature = feature_a
    cdef double[::1] threshold = threshold_a
    cdef int64_t[::1] left = left_a
    cdef int64_t[::1] right = right_a
    cdef double[::1] value = value_a
    cdef int64_t[::1] count = count_a
    cdef double[::1] improvement = improvement_a

    # stack of (node, start, end, depth) plus parent value
    cdef int64_t[:, ::1] stack = np.zeros((cap, 4), dtype=np.int64)
    cdef double[::1] stack_pv = np.zeros(cap)
    cdef Py_ssize_t sp = 0
    cdef int64_t[::1] perm = np.zeros(p, dtype=np.int64)
    cdef int64_t[::1] feats = np.zeros(p, dtype=np.int64)
    cdef int64_t[::1] tmp = np.zeros(m, dtype=np.int64)
    cdef unsigned char[::1] goes_left = np.zeros(m, dtype=np.uint8)

    cdef uint64_t state = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t r
    cdef Py_ssize_t n_nodes = 1
    cdef Py_ssize_t node, start, end, depth, cnt, i, j, k, fi, f, g, s, n_left, mid_pos
    cdef Py_ssize_t lid, rid, n1, n0, nl, l1, l0, r1, r0
    cdef int64_t swap_tmp
    cdef double parent_value, sw, swy, stt, sty
    cdef double best_score, best_thr, best_parent, fscore, fparent, score
    cdef double lw, ly, rw, ry, tot_w, tot_wy, ltt, lty, rtt, rty, tot_tt, tot_ty
    cdef double thl, thr, th0, lo, hi, midv, gain, scale
    cdef Py_ssize_t best_f, fbest_i
    cdef Py_ssize_t idx

    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = m
    stack[0, 3] = 0
    stack_pv[0] = 0.0
    sp = 1
    with nogil:
        while sp > 0:
            sp -= 1
            node = stack[sp, 0]
            start = stack[sp, 1]
            end = stack[sp, 2]
            depth = stack[sp, 3]
            parent_value = stack_pv[sp]
            cnt = end - start
            count[node] = cnt
            n1 = 0
            n0 = 0
            if criterion == CRIT_MSE:
                sw = _seq_sum(w, order, start, end)
                swy = _seq_sum(wy, order, start, end)
                if sw > 0:
                    value[node] = swy / sw
                else:
                    value[node] = parent_value
            else:
                stt = _seq_sum(wtt, order, start, end)
                sty = _seq_sum(wty, order, start, end)
                if stt >= 1e-8:
                    value[node] = sty / stt
                else:
                    value[node] = parent_value
                for i in range(start, end):
                    n1 += arm[order[0, i]]
                n0 = cnt - n1

            if max_depth >= 0 and depth >= max_depth:
                continue
            if criterion == CRIT_MSE:
                if cnt < 2 * min_leaf:
                    continue
            elif n0 < 2 * min_leaf or n1 < 2 * min_leaf:
                continue

            # partial Fisher-Yates feature draw, then ascending order
            for i in range(p):
                perm[i] = i
            for i in range(mtry):
                r = _splitmix(&state)
                j = i + <Py_ssize_t>(r % <uint64_t>(p - i))
                swap_tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = swap_tmp
            for i in range(mtry):
                feats[i] = perm[i]
            for i in range(1, mtry):
                k = i
                while k > 0 and feats[k - 1] > feats[k]:
                    swap_tmp = feats[k - 1]
                    feats[k - 1] = feats[k]
                    feats[k] = swap_tmp
                    k -= 1

            best_score = -INFINITY
            best_f = -1
            best_thr = 0.0
            best_parent = 0.0
            for fi in range(mtry):
                f = feats[fi]
                if X[order[f, start], f] == X[order[f, end - 1], f]:
                    continue
                fscore = -INFINITY
                fbest_i = -1
                if criterion == CRIT_MSE:
                    tot_w = 0.0
                    tot_wy = 0.0
                    for i in range(start, end):
                        idx = order[f, i]
                        tot_w += w[idx]
                        tot_wy += wy[idx]
                    lw = 0.0
                    ly = 0.0
                    for i in range(start, end - 1):
                        idx = order[f, i]
                        lw += w[idx]
                        ly += wy[idx]
                        nl = i - start + 1
                        if X[idx, f] == X[order[f, i + 1], f]:
                            continue
                        if nl < min_leaf or cnt - nl < min_leaf:
                            continue
                        rw = tot_w - lw
                        ry = tot_wy - ly
                        if not (lw > 0 and rw > 0):
                            continue
                        score = ly * ly / lw + ry * ry / rw
                        if score > fscore:
                            fscore = score
                            fbest_i = i
                    fparent = tot_wy * tot_wy / tot_w
                else:
                    tot_tt = 0.0
                    tot_ty = 0.0
                    tot_w = 0.0
                    for i in range(start, end):
                        idx = order[f, i]
                        tot_tt += wtt[idx]
                        tot_ty += wty[idx]
                        tot_w += w[idx]
                    ltt = 0.0
                    lty = 0.0
                    lw = 0.0
                    l1 = 0
                    for i in range(start, end - 1):
                        idx = order[f, i]
                        ltt += wtt[idx]
                        lty += wty[idx]
                        lw += w[idx]
                        l1 += arm[idx]
                        nl = i - start + 1
                        if X[idx, f] == X[order[f, i + 1], f]:
                            continue
                        l0 = nl - l1
                        r1 = n1 - l1
                        r0 = n0 - l0
                        if l1 < min_leaf or l0 < min_leaf or r1 < min_leaf or r0 < min_leaf:
                            continue
                        rtt = tot_tt - ltt
                        rty = tot_ty - lty
                        if not (ltt >= 1e-8 and rtt >= 1e-8):
                            continue
                        rw = tot_w - lw
                        thl = lty / ltt
                        thr = rty / rtt
                        score = lw * (thl * thl) + rw * (thr * thr)
                        if score > fscore:
                            fscore = score
                            fbest_i = i
                    th0 = tot_ty / tot_tt
                    fparent = tot_w * (th0 * th0)
                if fbest_i < 0:
                    continue
                if fscore > best_score:
                    best_score = fscore
                    best_f = f
                    lo = X[order[f, fbest_i], f]
                    hi = X[order[f, fbest_i + 1], f]
                    midv = lo + (hi - lo) * 0.5
                    if midv < hi:
                        best_thr = midv
                    else:
                        best_thr = lo
                    best_parent = fparent

            if best_f < 0:
                continue
            gain = best_score - best_parent
            if criterion == CRIT_MSE:
                scale = _seq_sum(wyy, order, start, end)
            else:
                scale = best_parent
            if not gain > 1e-12 * fabs(scale):
                continue

            n_left = 0
            for i in range(start, end):
                s = order[best_f, i]
                if X[s, best_f] <= best_thr:
                    goes_left[s] = 1
                    n_left += 1
                else:
                    goes_left[s] = 0
            for g in range(p):
                k = 0
                for i in range(start, end):
                    s = order[g, i]
                    if goes_left[s]:
                        tmp[k] = s
                        k += 1
                for i in range(start, end):
                    s = order[g, i]
                    if not goes_left[s]:
                        tmp[k] = s
                        k += 1
                for i in range(cnt):
                    order[g, start + i] = tmp[i]

            feature[node] = best_f
            threshold[node] = best_thr
            improvement[node] = gain
            lid = n_nodes
            rid = n_nodes + 1
            n_nodes += 2
            left[node] = lid
            right[node] = rid
            mid_pos = start + n_left
            stack[sp, 0] = rid
            stack[sp, 1] = mid_pos
            stack[sp, 2] = end
            stack[sp, 3] = depth + 1
            stack_pv[sp] = value[node]
            sp += 1
            stack[sp, 0] = lid
            stack[sp, 1] = start
            stack[sp, 2] = mid_pos
            stack[sp, 3] = depth + 1
            stack_pv[sp] = value[node]
            sp += 1

    return (feature_a[:n_nodes].copy(), threshold_a[:n_nodes].copy(),
            left_a[:n_nodes].copy(), right_a[:n_nodes].copy(),
            value_a[:n_nodes].copy(), count_a[:n_nodes].copy(),
            improvement_a[:n_nodes].copy())


def apply_tree(const int64_t[::1] feature, const double[::1] threshold,
               const int64_t[::1] left, const int64_t[::1] right, X_in):
    cdef const double[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    out_a = np.zeros(n, dtype=np.int64)
    cdef int64_t[::1] out = out_a
    cdef Py_ssize_t i
    cdef int64_t node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = node
    return out_a


def enet_cd_gram(const double[:, ::1] G, const double[::1] c, double[::1] beta,
                 double lam1, double lam2, double tol, int max_sweeps):
    cdef Py_ssize_t d = G.shape[0]
    cdef double[::1] q = np.asarray(G) @ np.asarray(beta)
    cdef Py_ssize_t j, k
    cdef int sweep, done = 0, used = max_sweeps
    cdef double gjj, old, new, rho, delta, max_delta
    with nogil:
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
                    for k in range(d):
                        q[k] += delta * G[k, j]
                    if fabs(delta) > max_delta:
                        max_delta = fabs(delta)
            if max_delta < tol:
                done = 1
                used = sweep
                break
    return used, bool(done)


cdef inline long long _tie_pairs(const double[::1] a) nogil:
    cdef Py_ssize_t i
    cdef long long total = 0, run = 1
    for i in range(1, a.shape[0]):
        if a[i] == a[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    return total + run * (run - 1) // 2


def kendall_counts(u_sorted, v_by_u):
    cdef const double[::1] u = np.ascontiguousarray(u_sorted, dtype=np.float64)
    buf_a = np.array(v_by_u, dtype=np.float64, copy=True)
    tmp_a = np.empty_like(buf_a)
    cdef double[::1] buf = buf_a
    cdef double[::1] tmp = tmp_a
    cdef double[::1] swap_view
    cdef Py_ssize_t n = u.shape[0]
    cdef long long n0 = <long long>n * (n - 1) // 2
    cdef long long ties_u, ties_uv = 0, run = 1, swaps = 0
    cdef Py_ssize_t i, j, k, lo, mid, hi, width
    ties_u = _tie_pairs(u)
    if True:
        for i in range(1, n):
            if u[i] == u[i - 1] and buf[i] == buf[i - 1]:
                run += 1
            else:
                ties_uv += run * (run - 1) // 2
                run = 1
        ties_uv += run * (run - 1) // 2
        width = 1
        while width < n:
            lo = 0
            while lo < n:
                mid = lo + width
                if mid > n:
                    mid = n
                hi = lo + 2 * width
                if hi > n:
                    hi = n
                i = lo
                j = mid
                k = lo
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
                lo += 2 * width
            swap_view = buf
            buf = tmp
            tmp = swap_view
            width *= 2
    return int(n0), int(ties_u), int(_tie_pairs(buf)), int(ties_uv), int(swaps)
