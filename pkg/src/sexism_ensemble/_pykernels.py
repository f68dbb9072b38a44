"""Pure-Python implementations of the hot loops; ``_ckernels.pyx`` mirrors them."""

import numpy as np


def wordpiece_ids(words, token_to_id, unk_id, max_chars=100):
    """Greedy longest-match WordPiece ids for already-normalised words.

    A word with no segmentation (or longer than ``max_chars``) becomes a
    single ``unk_id``.
    """
    out = []
    for word in words:
        n = len(word)
        if n > max_chars:
            out.append(unk_id)
            continue
        pieces = []
        start = 0
        while start < n:
            end = n
            found = -1
            while start < end:
                sub = word[start:end] if start == 0 else "##" + word[start:end]
                found = token_to_id.get(sub, -1)
                if found >= 0:
                    break
                end -= 1
            if found < 0:
                pieces = None
                break
            pieces.append(found)
            start = end
        if pieces is None:
            out.append(unk_id)
        else:
            out.extend(pieces)
    return out


def majority_correct_count(shared_flag, shared_u, member_u, p):
    """Count trials in which a strict majority of members is correct.

    Member ``j`` of trial ``t`` is correct when ``member_u[t, j] < p``,
    except in shared trials (``shared_flag[t]``) where every member takes
    the outcome ``shared_u[t] < p``.
    """
    k = member_u.shape[1]
    n_correct = np.count_nonzero(member_u < p, axis=1)
    independent_ok = 2 * n_correct > k
    shared_ok = shared_u < p
    ok = np.where(shared_flag.astype(bool), shared_ok, independent_ok)
    return int(np.count_nonzero(ok))


def confusion_counts(gold, pred, n):
    g = np.asarray(gold, dtype=np.intp)
    q = np.asarray(pred, dtype=np.intp)
    if g.shape != q.shape:
        raise ValueError("gold and pred lengths differ")
    if g.size and (min(g.min(), q.min()) < 0 or max(g.max(), q.max()) >= n):
        raise IndexError("label index out of range")
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (g, q), 1)
    return counts
