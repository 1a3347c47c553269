"""Time the compiled and numpy kernel backends on identical inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each kernel is
called through both backends, outputs are checked for equality, and the best
wall time of ``--repeat`` runs is reported along with the speed-up.
"""
import argparse
import time

import numpy as np

from catekit import kernels


def tree_case(m, p, criterion, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, p))
    y = X[:, 0] + np.sin(X[:, 1]) + rng.standard_normal(m)
    t = rng.standard_normal(m)
    a = rng.integers(0, 2, m)
    w = np.ones(m)
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    return (X, y, t, a, w, order, criterion, -1, 5, max(p // 3, 1), seed)


def enet_case(d, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((500, d))
    G = np.ascontiguousarray(Z.T @ Z / 500)
    c = np.ascontiguousarray(Z.T @ (Z[:, 0] + rng.standard_normal(500)) / 500)
    return G, c


def kendall_case(n, seed=0):
    rng = np.random.default_rng(seed)
    u, v = rng.integers(0, 50, n).astype(float), rng.standard_normal(n)
    order = np.lexsort((v, u))
    return u[order], v[order]


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def cases():
    mse = tree_case(2000, 10, kernels.CRIT_MSE)
    causal = tree_case(2000, 10, kernels.CRIT_CAUSAL)
    G, c = enet_case(50)
    ku, kv = kendall_case(20_000)
    probe = np.random.default_rng(1).standard_normal((20_000, 10))
    yield "grow_tree mse m=2000 p=10", lambda k: k.grow_tree(*mse)
    yield "grow_tree causal m=2000 p=10", lambda k: k.grow_tree(*causal)
    tree = kernels.backends()["python"].grow_tree(*mse)
    yield "apply_tree m=20000", lambda k: k.apply_tree(*tree[:4], probe)
    yield "enet_cd_gram d=50", lambda k: k.enet_cd_gram(G, c, np.zeros(50), 0.01, 0.01, 1e-10, 10_000)
    yield "kendall_counts n=20000", lambda k: k.kendall_counts(ku, kv)


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available")
    print(f"{'kernel':32s} {'python [s]':>11s} {'cython [s]':>11s} {'speed-up':>9s} {'equal':>6s}")
    for name, call in cases():
        t_py, out_py = best_time(lambda: call(backends["python"]), args.repeat)
        if "cython" in backends:
            t_cy, out_cy = best_time(lambda: call(backends["cython"]), args.repeat)
            print(f"{name:32s} {t_py:11.4f} {t_cy:11.4f} {t_py / t_cy:8.1f}x {str(same(out_py, out_cy)):>6s}")
        else:
            print(f"{name:32s} {t_py:11.4f} {'-':>11s} {'-':>9s} {'-':>6s}")


if __name__ == "__main__":
    main()
