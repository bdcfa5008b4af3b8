"""CKY recognition kernel.

``cky_fill`` completes the boolean recognition tables of a chart in place.
The numba version is used when numba imports and ``STSGKIT_DISABLE_NUMBA``
is not set to a true value; otherwise the numpy version runs.  Both give
identical tables.

Tables, for ``S`` states, ``R`` rules and ``C`` categories:

* ``final[i, j, r]``: rule ``r`` is complete over states ``i..j``;
* ``cat[i, j, c]``: some complete rule with category ``c`` spans ``i..j``;
* ``allowed[i, j, c]``: category ``c`` may be entered at ``i..j``.

``binary`` rows are ``(rule, lhs, left, right)`` and ``unary`` rows
``(rule, lhs, child)``, the latter in dependency order.
"""

import os

_FLAG = os.environ.get("STSGKIT_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - depends on the environment
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


def cky_fill_numpy(final, cat, allowed, binary, unary):
    n = cat.shape[0]
    nb = binary.shape[0]
    if nb:
        b_rule, b_lhs = binary[:, 0], binary[:, 1]
        b_left, b_right = binary[:, 2], binary[:, 3]
    for d in range(1, n):
        for i in range(n - d):
            j = i + d
            if nb and d > 1:
                left = cat[i, i + 1:j][:, b_left]
                right = cat[i + 1:j, j][:, b_right]
                hit = (left & right).any(axis=0) & allowed[i, j, b_lhs]
                if hit.any():
                    final[i, j, b_rule[hit]] = True
                    cat[i, j, b_lhs[hit]] = True
            for u in range(unary.shape[0]):
                r, a, c = unary[u]
                if cat[i, j, c] and allowed[i, j, a]:
                    final[i, j, r] = True
                    cat[i, j, a] = True


def _python_kernel(final, cat, allowed, binary, unary):
    n = cat.shape[0]
    for d in range(1, n):
        for i in range(n - d):
            j = i + d
            for b in range(binary.shape[0]):
                r = binary[b, 0]
                a = binary[b, 1]
                if not allowed[i, j, a]:
                    continue
                left = binary[b, 2]
                right = binary[b, 3]
                for k in range(i + 1, j):
                    if cat[i, k, left] and cat[k, j, right]:
                        final[i, j, r] = True
                        cat[i, j, a] = True
                        break
            for u in range(unary.shape[0]):
                r = unary[u, 0]
                a = unary[u, 1]
                if cat[i, j, unary[u, 2]] and allowed[i, j, a]:
                    final[i, j, r] = True
                    cat[i, j, a] = True


if HAVE_NUMBA:
    _numba_kernel = njit(cache=True, nogil=True)(_python_kernel)
else:  # pragma: no cover
    _numba_kernel = None


def backend() -> str:
    return "numba" if HAVE_NUMBA and not NUMBA_DISABLED else "numpy"


def cky_fill(final, cat, allowed, binary, unary, impl=None):
    """Fill ``final`` and ``cat`` in place.  ``impl`` forces a backend."""
    impl = impl or backend()
    if impl == "numba":
        if _numba_kernel is None:
            raise RuntimeError("numba is not available")
        _numba_kernel(final, cat, allowed, binary, unary)
    elif impl == "numpy":
        cky_fill_numpy(final, cat, allowed, binary, unary)
    else:
        raise ValueError(f"unknown backend {impl!r}")
