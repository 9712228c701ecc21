"""Compare the compiled epoch kernel with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Both kernels run the same epochs from the same state; the script checks the
iterates agree before reporting timings.
"""
import argparse
import time

import numpy as np

from compadmm import SolverConfig, gen_portfolio, gen_synthetic_quadratic, PortfolioSpec
from compadmm import kernels
from compadmm.admm import _draw, _epoch_kernel
from compadmm.estimators import build_reference
from compadmm.problem import OracleLedger


def _cases():
    pb, con, _ = gen_synthetic_quadratic(20, 5, 10, seed=0)
    yield "synthetic q=20 K=50", pb, con, SolverConfig(K=50, N=2, eta=1 / pb.smoothness.L_F)
    pb, con = gen_portfolio(PortfolioSpec(n_assets=20, n_slots=200))
    yield "portfolio N=20 K=200", pb, con, SolverConfig(K=200, N=1, eta=1 / pb.smoothness.L_F, rho=2.0)


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    compiled = kernels.compiled_epoch_inner_loop()
    if compiled is None:
        print("compiled kernel unavailable; only the Python fallback is built")
    print(f"{'case':<24}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    for name, pb, con, cfg in _cases():
        rng = np.random.default_rng(0)
        x0 = rng.standard_normal(pb.q)
        cache = build_reference(pb, x0, 1, OracleLedger())
        draws = _draw(pb, rng, cfg.K, cfg.N)
        etas = np.full(cfg.K, cfg.eta)
        lam0 = np.zeros(con.p)

        def run(fn):
            saved = kernels.epoch_inner_loop
            kernels.epoch_inner_loop = fn
            try:
                return _epoch_kernel(pb, con, cfg.rho, cache, x0, lam0, draws, etas, False, OracleLedger())
            finally:
                kernels.epoch_inner_loop = saved

        t_py, ep_py = _time(lambda: run(kernels.python_epoch_inner_loop), args.repeat)
        if compiled is None:
            print(f"{name:<24}{t_py * 1e3:>14.3f}{'-':>16}{'-':>10}")
            continue
        t_c, ep_c = _time(lambda: run(compiled), args.repeat)
        err = float(np.abs(ep_py.x - ep_c.x).max())
        if err > 1e-9:
            raise SystemExit(f"{name}: kernels disagree by {err:.3e}")
        print(f"{name:<24}{t_py * 1e3:>14.3f}{t_c * 1e3:>16.3f}{t_py / t_c:>10.1f}")


if __name__ == "__main__":
    main()
