"""Central finite differences, independent of the autodiff path."""

import numpy as np


def numeric_grad(f, arrays, h=1e-5):
    """d f() / d array for each array, perturbing entries in place.

    ``f`` may return a scalar or a 1-D array of several losses; in the
    latter case each gradient gets a trailing axis, one slot per loss.
    """
    out = []
    for a in arrays:
        g = None
        for idx in np.ndindex(a.shape):
            orig = a[idx]
            a[idx] = orig + h
            fp = np.asarray(f(), dtype=np.float64)
            a[idx] = orig - h
            fm = np.asarray(f(), dtype=np.float64)
            a[idx] = orig
            if g is None:
                g = np.zeros(a.shape + fp.shape)
            g[idx] = (fp - fm) / (2 * h)
        out.append(np.zeros(a.shape) if g is None else g)
    return out


def rel_error(analytic, numeric):
    """Max-norm error relative to the larger max-norm of the two gradients."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)
