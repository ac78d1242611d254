"""Compare the compiled and numpy solver kernels on realistic IRS subproblems.

    python benchmarks/bench_qcls.py [--L 100] [--problems 40] [--repeat 3]

Problems come from the default profile, so most of them are infeasible for
plain least squares and exercise the iterative path.
"""

import argparse
import time

import numpy as np

from irsnoma import ScenarioConfig
from irsnoma import _apg_py
from irsnoma.engine import draw_user, prepare
from irsnoma.irs import _lipschitz, build_subproblems

try:
    from irsnoma import _apg_ext
except ImportError:
    _apg_ext = None


def make_problems(L, count):
    scn = prepare(ScenarioConfig(L=L, chi_bs_u=0.5, chi_bs_irs=0.5, trials=count))
    out = []
    trial = 0
    while len(out) < count:
        for u in range(scn.cfg.U):
            real = draw_user(scn, trial, u)
            for p in build_subproblems(real, scn.subsets.polarization_of(u)):
                x0 = _apg_py.project_disk(-np.linalg.lstsq(p.K_mat, p.d_vec, rcond=None)[0])
                out.append((np.ascontiguousarray(p.K_mat), p.d_vec, x0, 1.0 / _lipschitz(p.K_mat)))
        trial += 1
    return out[:count]


def run(fn, problems, repeat):
    best = np.inf
    iters = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        iters = 0
        for K, d, x0, il in problems:
            _, it, _ = fn(K, d, x0, il, 1e-8, 5000)
            iters += it
        best = min(best, time.perf_counter() - t0)
    return best, iters


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=100)
    ap.add_argument("--problems", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    problems = make_problems(args.L, args.problems)
    m, n = problems[0][0].shape
    print(f"{len(problems)} problems, K is {m} x {n}")
    t_py, it_py = run(_apg_py.apg, problems, args.repeat)
    print(f"python  {t_py:8.3f} s  {it_py} iterations  {1e6 * t_py / it_py:7.2f} us/iter")
    if _apg_ext is None:
        print("cython  extension not built")
        return
    t_cy, it_cy = run(_apg_ext.apg, problems, args.repeat)
    print(f"cython  {t_cy:8.3f} s  {it_cy} iterations  {1e6 * t_cy / it_cy:7.2f} us/iter")
    print(f"speedup {t_py / t_cy:.2f}x")


if __name__ == "__main__":
    main()
