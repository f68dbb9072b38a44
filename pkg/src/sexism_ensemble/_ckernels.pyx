# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twins of the loops in ``_pykernels``; results must match exactly."""

import numpy as np


def wordpiece_ids(list words, dict token_to_id, Py_ssize_t unk_id, Py_ssize_t max_chars=100):
    cdef list out = []
    cdef list pieces
    cdef str word, sub
    cdef Py_ssize_t n, start, end, found
    cdef bint failed
    cdef object hit
    for word in words:
        n = len(word)
        if n > max_chars:
            out.append(unk_id)
            continue
        pieces = []
        failed = False
        start = 0
        while start < n:
            end = n
            found = -1
            while start < end:
                if start == 0:
                    sub = word[start:end]
                else:
                    sub = "##" + word[start:end]
                hit = token_to_id.get(sub)
                if hit is not None:
                    found = hit
                    break
                end -= 1
            if found < 0:
                failed = True
                break
            pieces.append(found)
            start = end
        if failed:
            out.append(unk_id)
        else:
            out.extend(pieces)
    return out


def majority_correct_count(const unsigned char[:] shared_flag, const double[:] shared_u,
                           const double[:, :] member_u, double p):
    cdef Py_ssize_t trials = member_u.shape[0]
    cdef Py_ssize_t k = member_u.shape[1]
    cdef Py_ssize_t t, j, n_correct
    cdef long long total = 0
    for t in range(trials):
        if shared_flag[t]:
            if shared_u[t] < p:
                total += 1
            continue
        n_correct = 0
        for j in range(k):
            if member_u[t, j] < p:
                n_correct += 1
        if 2 * n_correct > k:
            total += 1
    return int(total)


def confusion_counts(gold, pred, Py_ssize_t n):
    cdef long long[:] g = np.ascontiguousarray(gold, dtype=np.int64)
    cdef long long[:] q = np.ascontiguousarray(pred, dtype=np.int64)
    counts = np.zeros((n, n), dtype=np.int64)
    cdef long long[:, :] c = counts
    cdef Py_ssize_t i
    if g.shape[0] != q.shape[0]:
        raise ValueError("gold and pred lengths differ")
    for i in range(g.shape[0]):
        if g[i] < 0 or g[i] >= n or q[i] < 0 or q[i] >= n:
            raise IndexError("label index out of range")
        c[g[i], q[i]] += 1
    return counts
