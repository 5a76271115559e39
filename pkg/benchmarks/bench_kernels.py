"""Time the compiled LSTM sequence kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Shapes follow desk-scale training: a crop batch and a full-sequence batch.
"""
import argparse
import time

import numpy as np

from framelab.neural import _fallback
from framelab.neural.kernels import compiled_available

SHAPES = [  # (T, B, D, H)
    (12, 8, 9, 64),
    (12, 32, 40, 64),
    (72, 8, 9, 64),
    (72, 32, 64, 64),
]


def make_case(T, B, D, H, seed=0):
    rng = np.random.default_rng(seed)
    xs = rng.standard_normal((T, B, D))
    params = {"Wx": 0.2 * rng.standard_normal((D, 4 * H)),
              "Wh": 0.2 * rng.standard_normal((H, 4 * H)),
              "b": 0.1 * rng.standard_normal((1, 4 * H))}
    d_out = rng.standard_normal((T, B, H))
    return xs, params, d_out


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench(mod, case, repeat):
    xs, params, d_out = case
    fwd = best_of(lambda: mod.lstm_seq_forward(xs, params), repeat)
    _, cache = mod.lstm_seq_forward(xs, params)
    bwd = best_of(lambda: mod.lstm_seq_backward(d_out, cache), repeat)
    return fwd, bwd


def max_diff(a_mod, b_mod, case):
    xs, params, d_out = case
    oa, ca = a_mod.lstm_seq_forward(xs, params)
    ob, cb = b_mod.lstm_seq_forward(xs, params)
    dxa, ga = a_mod.lstm_seq_backward(d_out, ca)
    dxb, gb = b_mod.lstm_seq_backward(d_out, cb)
    diffs = [np.abs(oa - ob).max(), np.abs(dxa - dxb).max()]
    diffs += [np.abs(ga[k] - gb[k]).max() for k in ga]
    return float(max(diffs))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not compiled_available():
        print("compiled extension not built; only numpy timings shown")
        ext = None
    else:
        from framelab.neural import _lstm_ext as ext

    print(f"{'T':>4} {'B':>4} {'D':>4} {'H':>4} | {'numpy fwd':>10} {'numpy bwd':>10} | "
          f"{'ext fwd':>10} {'ext bwd':>10} | {'speedup':>7} {'max|diff|':>10}")
    for shape in SHAPES:
        case = make_case(*shape)
        nf, nb = bench(_fallback, case, args.repeat)
        if ext is None:
            print(f"{shape[0]:4d} {shape[1]:4d} {shape[2]:4d} {shape[3]:4d} | "
                  f"{nf * 1e3:8.2f}ms {nb * 1e3:8.2f}ms |")
            continue
        cf, cb = bench(ext, case, args.repeat)
        print(f"{shape[0]:4d} {shape[1]:4d} {shape[2]:4d} {shape[3]:4d} | "
              f"{nf * 1e3:8.2f}ms {nb * 1e3:8.2f}ms | {cf * 1e3:8.2f}ms {cb * 1e3:8.2f}ms | "
              f"{(nf + nb) / (cf + cb):6.2f}x {max_diff(_fallback, ext, case):10.2e}")


if __name__ == "__main__":
    main()
