"""Compiled kernels vs the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json]

Each kernel runs on the same seeded inputs under both backends; outputs are
compared before timing so a speedup never hides a disagreement.
"""

import argparse
import json
import random
import timeit

from finitary_oe import _kernels_py as py

try:
    from finitary_oe import _kernels as cy
except ImportError:  # not compiled
    cy = None


def workloads(seed: int) -> dict:
    rng = random.Random(seed)
    sizes = tuple(rng.choice((2, 3, 5)) for _ in range(24))
    words = [tuple(rng.randrange(s) for s in sizes[:16]) for _ in range(2000)]
    shifts = [rng.randrange(-500, 500) for _ in words]
    member = bytearray(rng.random() < 0.01 for _ in range(1 << 16))
    values = [rng.randrange(64) for _ in range(1 << 14)]
    perm = list(range(1 << 14))
    rng.shuffle(perm)
    nxt = [perm[i] if rng.random() < 0.9 else -1 for i in range(len(perm))]
    seen = set()
    for i, j in enumerate(nxt):  # make it injective
        if j in seen:
            nxt[i] = -1
        seen.add(j)

    def jobs(k):
        return {
            "word_index": lambda: [k.word_index(w, sizes) for w in words],
            "index_word": lambda: [k.index_word(i * 7919, sizes, 16) for i in range(2000)],
            "shift_word": lambda: [k.shift_word(w, sizes, n) for w, n in zip(words, shifts)],
            "carry_out": lambda: [k.carry_out(w, sizes, n) for w, n in zip(words, shifts)],
            "first_member": lambda: [k.first_member(member, s, len(member)) for s in range(0, 1 << 16, 512)],
            "first_equal": lambda: [k.first_equal(values, i, i + 1, len(values)) for i in range(0, 4096, 16)],
            "chain_cuts": lambda: k.chain_cuts(nxt, 5),
        }

    return jobs


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args(argv)

    jobs = workloads(args.seed)
    pj = jobs(py)
    cj = jobs(cy) if cy else {}
    rows = []
    for name, fn in pj.items():
        t_py = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        row = {"kernel": name, "python_s": t_py}
        if cy:
            if cj[name]() != fn():
                raise SystemExit(f"{name}: backends disagree")
            t_cy = min(timeit.repeat(cj[name], number=1, repeat=args.repeat))
            row.update(cython_s=t_cy, speedup=t_py / t_cy if t_cy else float("inf"))
        rows.append(row)

    if args.json:
        print(json.dumps({"seed": args.seed, "compiled": cy is not None, "rows": rows}, indent=1))
        return
    if not cy:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<14}{'python ms':>11}{'cython ms':>11}{'speedup':>9}")
    for r in rows:
        c = f"{r['cython_s'] * 1e3:11.2f}{r['speedup']:9.1f}" if cy else ""
        print(f"{r['kernel']:<14}{r['python_s'] * 1e3:11.2f}{c}")


if __name__ == "__main__":
    main()
