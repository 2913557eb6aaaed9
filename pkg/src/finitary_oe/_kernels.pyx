# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled mixed-radix kernels; see ``_kernels_py`` for the reference."""


def word_index(tuple word, tuple sizes):
    cdef Py_ssize_t j
    idx = 0
    mul = 1
    for j in range(len(word)):
        idx += word[j] * mul
        mul *= sizes[j]
    return idx


def index_word(idx, tuple sizes, Py_ssize_t depth):
    cdef Py_ssize_t j
    cdef list out = []
    for j in range(depth):
        s = sizes[j]
        out.append(idx % s)
        idx //= s
    return tuple(out)


def shift_word(tuple word, tuple sizes, n):
    cdef Py_ssize_t j, L = len(word)
    cdef long long carry, v, s
    cdef list digits
    if -(1 << 60) < n < (1 << 60):
        carry = n
        digits = list(word)
        for j in range(L):
            if carry == 0:
                break
            s = sizes[j]
            v = <long long>digits[j] + carry
            # floor division for negatives
            if v >= 0:
                digits[j] = v % s
                carry = v // s
            else:
                carry = -((-v + s - 1) // s)
                digits[j] = v - carry * s
        if carry != 0:
            return None
        return tuple(digits)
    digits = list(word)
    big = n
    for j in range(L):
        if big == 0:
            break
        vv = digits[j] + big
        digits[j] = vv % sizes[j]
        big = vv // sizes[j]
    if big != 0:
        return None
    return tuple(digits)


def carry_out(tuple word, tuple sizes, n):
    cdef Py_ssize_t j
    carry = n
    for j in range(len(word)):
        if carry == 0:
            return 0
        v = word[j] + carry
        carry = v // sizes[j]
    return carry


def first_member(const unsigned char[:] member, Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t j
    for j in range(start, stop):
        if member[j]:
            return j
    return -1


def first_equal(values, Py_ssize_t i, Py_ssize_t start, Py_ssize_t stop):
    cdef Py_ssize_t j
    target = values[i]
    for j in range(start, stop):
        if values[j] == target:
            return j
    return -1


def chain_cuts(nxt, Py_ssize_t height):
    cdef Py_ssize_t n = len(nxt), i, j, k, h
    cdef list starts = []
    cdef list run
    cdef bytearray has_pred = bytearray(n)
    cdef bytearray seen = bytearray(n)
    for i in range(n):
        j = nxt[i]
        if j >= 0:
            has_pred[j] = 1
    for k in range(2):
        for h in range(n):
            if seen[h] or (k == 0 and has_pred[h]):
                continue
            run = []
            i = h
            while i >= 0 and not seen[i]:
                seen[i] = 1
                run.append(i)
                i = nxt[i]
            for j in range(0, len(run) - height + 1, height):
                starts.append(run[j])
    return starts
