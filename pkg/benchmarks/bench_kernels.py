"""Compare the compiled kernels with the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so no environment variable is needed.
Each kernel is checked for identical output before it is timed.
"""

import argparse
import timeit

import numpy as np

from sexism_ensemble import _pykernels, synthetic, tokenizer

try:
    from sexism_ensemble import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _cases():
    recs = synthetic.make_corpus(500, seed=0)
    vocab = tokenizer.build_vocab([r.text for r in recs], 400)
    words = [w for r in recs for w in tokenizer.normalise_words(r.text)]
    rng = np.random.default_rng(0)
    trials, k = 200_000, 7
    shared_flag = (rng.random(trials) < 0.3).astype(np.uint8)
    shared_u, member_u = rng.random(trials), rng.random((trials, k))
    gold = rng.integers(0, 6, 200_000).astype(np.int64)
    pred = rng.integers(0, 6, 200_000).astype(np.int64)
    return {
        f"wordpiece_ids ({len(words)} words)": (
            "wordpiece_ids", (words, vocab.token_to_id, tokenizer.UNK_ID)),
        f"majority_correct_count ({trials} trials, k={k})": (
            "majority_correct_count", (shared_flag, shared_u, member_u, 0.76)),
        "confusion_counts (200000 pairs, 6 labels)": (
            "confusion_counts", (gold, pred, 6)),
    }


def _same(a, b):
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return np.array_equal(np.asarray(a), np.asarray(b))
    return a == b


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; only the Python backend can run")
    print(f"{'kernel':<46} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for label, (name, call_args) in _cases().items():
        py = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py(*call_args), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{label:<46} {t_py:>10.2f} {'-':>10} {'-':>8}")
            continue
        cy = getattr(_ckernels, name)
        if not _same(py(*call_args), cy(*call_args)):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*call_args), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:<46} {t_py:>10.2f} {t_cy:>10.2f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
