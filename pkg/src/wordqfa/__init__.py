"""Distinguishing families of representations and the 2QCFA word-problem recognizers built on them."""

import mpmath as _mpmath

# BigFloat values created outside an explicit workprec block inherit the
# global precision; keep it at least at the library default.
if _mpmath.mp.prec < 256:
    _mpmath.mp.prec = 256

__version__ = "0.1.0"
