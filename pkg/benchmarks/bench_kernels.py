"""Time the hot kernels on every available backend.

    python3 benchmarks/bench_kernels.py --rows 50000 --repeat 5

Each kernel runs on identical inputs per backend; outputs are compared so a
faster but wrong backend shows up as a mismatch rather than a speedup.
"""
import argparse
import random
import timeit

from gymjoin import kernels


def make_inputs(rows: int, seed: int):
    rng = random.Random(seed)
    left = [(rng.randrange(rows), rng.randrange(rows // 4 + 1), rng.randrange(100)) for _ in range(rows)]
    right = [(rng.randrange(rows // 4 + 1), rng.randrange(rows)) for _ in range(rows)]
    return left, right


def cases(left, right):
    return {
        "bucket_rows": lambda k: k.bucket_rows(left, 12345, len(left) ** 2),
        "project": lambda k: k.project(left, [0, 2]),
        "hash_join": lambda k: k.hash_join(left, right, [1], [0], [1]),
        "semijoin": lambda k: k.semijoin(left, [1], right, [0]),
    }


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=20000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = kernels.backends()
    left, right = make_inputs(args.rows, args.seed)
    print(f"rows={args.rows} repeat={args.repeat} backends={', '.join(sorted(backends))}")
    print(f"{'kernel':<12}" + "".join(f"{name:>12}" for name in sorted(backends)) + f"{'speedup':>10}")
    for kname, fn in cases(left, right).items():
        times, outputs = {}, {}
        for bname, mod in sorted(backends.items()):
            outputs[bname] = fn(mod)
            times[bname] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        same = len({repr(sorted(o)) if isinstance(o, list) else repr(o) for o in outputs.values()}) == 1
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        row = f"{kname:<12}" + "".join(f"{times[b] * 1e3:>10.1f}ms" for b in sorted(backends))
        print(row + f"{speedup:>9.1f}x" + ("" if same else "  MISMATCH"))


if __name__ == "__main__":
    main()
