"""Reflective projection of the unit interval, shared by model and attack.

Kept in its own module so the classifier can canonicalize inputs without
importing the attack package (which imports the model).
"""

import numpy as np


def reflect_project(x):
    """Fold a real scalar or array into [0,1] by mirror reflection.

    Identity on [0,1].  Above 1 the value bounces off the upper boundary,
    below 0 off the lower one; the integer part is truncated toward zero so
    the fold is symmetric about both boundaries.  Equivalent to a triangle
    wave of period 2.
    """
    arr = np.asarray(x, dtype=np.float64)
    t = np.trunc(arr)
    f = arr - t
    even = np.mod(t, 2.0) == 0.0
    above = np.where(even, f, 1.0 - f)
    below = np.where(even, -f, 1.0 + f)
    out = np.where(arr > 1.0, above, np.where(arr < 0.0, below, arr))
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out
