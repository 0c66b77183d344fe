"""Soft-threshold ("shrinking") operator on the real line.

``shrink(x, r)`` pulls ``x`` toward zero by ``r`` and sends the dead zone
``[-r, r]`` to exactly zero.  Both scalars and numpy arrays are accepted.
"""

import numpy as np

__all__ = ["shrink", "shrink_magnitude", "check_radius"]


def check_radius(r):
    """Validate a shrink radius and return it as a float."""
    r = float(r)
    if not np.isfinite(r) or r < 0:
        raise ValueError(f"shrink radius must be finite and >= 0, got {r!r}")
    return r


def _check_input(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("shrink input must be finite")
    return arr


def shrink_magnitude(x, r):
    """Return ``max(|x| - r, 0)``, the magnitude of ``shrink(x, r)``."""
    r = check_radius(r)
    arr = _check_input(x)
    out = np.maximum(np.abs(arr) - r, 0.0)
    return float(out) if out.ndim == 0 else out


def shrink(x, r):
    """Soft-threshold ``x`` by radius ``r``.

    Parameters
    ----------
    x : float or array_like
        Finite input value(s).
    r : float
        Nonnegative radius.

    Returns
    -------
    float or ndarray
        ``x - r`` above ``r``, ``x + r`` below ``-r`` and ``0`` in between.
        The map is odd bit-for-bit: ``shrink(-x, r) == -shrink(x, r)``.

    Raises
    ------
    ValueError
        If ``r`` is negative or any input is not finite.
    """
    r = check_radius(r)
    arr = _check_input(x)
    out = np.copysign(np.maximum(np.abs(arr) - r, 0.0), arr)
    # copysign leaves -0.0 in the dead zone for negative inputs
    out = out + 0.0
    return float(out) if out.ndim == 0 else out


def _shrink_unchecked(x, r):
    # hot path for simulation code; x is a float array and r already validated
    out = np.abs(x)
    out -= r
    np.maximum(out, 0.0, out=out)
    np.copysign(out, x, out=out)
    out += 0.0
    return out
