"""Truncated power series over generic exact coefficients.

Coefficients only need ``+`` and ``*``, so Fractions, ints and sympy
expressions all work.
"""


def _expand(c):
    return c.expand() if hasattr(c, "expand") else c


def series_mul(a, b, deg):
    """Product of two coefficient lists truncated to degree ``deg``."""
    out = [0] * (deg + 1)
    for i, ai in enumerate(a[: deg + 1]):
        if ai == 0:
            continue
        for j, bj in enumerate(b[: deg + 1 - i]):
            if bj != 0:
                out[i + j] += ai * bj
    return [_expand(c) for c in out]


def series_pow(a, n, deg):
    """``a**n`` truncated to degree ``deg`` by binary exponentiation."""
    result = [1] + [0] * deg
    base = list(a[: deg + 1]) + [0] * max(0, deg + 1 - len(a))
    while n:
        if n & 1:
            result = series_mul(result, base, deg)
        n >>= 1
        if n:
            base = series_mul(base, base, deg)
    return result
