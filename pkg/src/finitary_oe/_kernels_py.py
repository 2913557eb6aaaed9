"""Pure-Python mixed-radix kernels.

Words are little-endian digit tuples: digit 0 is the fastest-moving
coordinate of the odometer.  These functions are the reference
implementation; ``_kernels.pyx`` mirrors them one-for-one.
"""


def word_index(word, sizes):
    idx = 0
    mul = 1
    for j, c in enumerate(word):
        idx += c * mul
        mul *= sizes[j]
    return idx


def index_word(idx, sizes, depth):
    out = []
    for j in range(depth):
        s = sizes[j]
        out.append(idx % s)
        idx //= s
    return tuple(out)


def shift_word(word, sizes, n):
    """Add ``n`` to ``word`` with carry; ``None`` if the carry leaves the word."""
    digits = list(word)
    carry = n
    for j in range(len(digits)):
        if carry == 0:
            break
        s = sizes[j]
        v = digits[j] + carry
        digits[j] = v % s
        carry = v // s
    if carry != 0:
        return None
    return tuple(digits)


def carry_out(word, sizes, n):
    """Carry (possibly negative) that adding ``n`` pushes past the last digit."""
    carry = n
    for j in range(len(word)):
        if carry == 0:
            return 0
        v = word[j] + carry
        carry = v // sizes[j]
    return carry


def first_member(member, start, stop):
    """Smallest ``j`` in ``[start, stop)`` with ``member[j]`` set, else -1."""
    for j in range(start, stop):
        if member[j]:
            return j
    return -1


def first_equal(values, i, start, stop):
    """Smallest ``j`` in ``[start, stop)`` with ``values[j] == values[i]``, else -1."""
    target = values[i]
    for j in range(start, stop):
        if values[j] == target:
            return j
    return -1


def chain_cuts(nxt, height):
    """Cut the partial injection ``nxt`` (-1 = undefined) into runs of ``height``.

    Returns the list of run starts.  Cycles are cut starting at their
    smallest element; chains from their head.  Leftover tails shorter than
    ``height`` are dropped.
    """
    n = len(nxt)
    has_pred = [False] * n
    for i in range(n):
        j = nxt[i]
        if j >= 0:
            has_pred[j] = True
    seen = [False] * n
    starts = []

    def walk(head):
        run = []
        i = head
        while i >= 0 and not seen[i]:
            seen[i] = True
            run.append(i)
            i = nxt[i]
        for k in range(0, len(run) - height + 1, height):
            starts.append(run[k])

    for i in range(n):
        if not has_pred[i] and not seen[i]:
            walk(i)
    for i in range(n):
        if not seen[i]:
            walk(i)
    return starts
