"""Kernel selection: compiled extension when importable, else pure Python.

Set ``FINITARY_OE_PURE=1`` to force the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("FINITARY_OE_PURE") != "1":
    try:
        from finitary_oe._kernels import (  # type: ignore[attr-defined]
            carry_out,
            chain_cuts,
            first_equal,
            first_member,
            index_word,
            shift_word,
            word_index,
        )

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from finitary_oe._kernels_py import (  # noqa: F401
        carry_out,
        chain_cuts,
        first_equal,
        first_member,
        index_word,
        shift_word,
        word_index,
    )

__all__ = [
    "BACKEND",
    "carry_out",
    "chain_cuts",
    "first_equal",
    "first_member",
    "index_word",
    "shift_word",
    "word_index",
]
