"""Pure numpy versions of the hot kernels; used when the extension is absent."""

import numpy as np

_CHUNK = 1 << 22


def contact_argmin(points, values, targets):
    """Index of the minimiser of ``values[i] - <points[i], xi>`` for each target.

    Parameters
    ----------
    points : (N, d) array
    values : (N,) array
    targets : (S, d) array

    Returns
    -------
    (S,) int64 array.  Ties resolve to the lowest index.
    """
    x = np.ascontiguousarray(points, dtype=float)
    u = np.ascontiguousarray(values, dtype=float)
    xi = np.ascontiguousarray(targets, dtype=float)
    out = np.empty(len(xi), dtype=np.int64)
    step = max(1, _CHUNK // max(1, len(x)))
    for s in range(0, len(xi), step):
        w = u[None, :] - xi[s:s + step] @ x.T
        out[s:s + step] = np.argmin(w, axis=1)
    return out


def jacobi_rk4(s_samples, p0, v0, dt):
    """Classical RK4 for ``P'' = -P S(t)``.

    ``s_samples`` holds ``S`` at every half step, shape ``(2 K + 1, k, k)``
    for ``K`` steps.  Returns ``(P, P')`` at the ``K + 1`` grid points.
    """
    s = np.asarray(s_samples, dtype=float)
    steps = (len(s) - 1) // 2
    k = s.shape[1]
    p_out = np.empty((steps + 1, k, k))
    v_out = np.empty((steps + 1, k, k))
    p = np.array(p0, dtype=float)
    v = np.array(v0, dtype=float)
    p_out[0], v_out[0] = p, v
    h = float(dt)
    for i in range(steps):
        s0, sm, s1 = s[2 * i], s[2 * i + 1], s[2 * i + 2]
        k1p, k1v = v, -p @ s0
        p2, v2 = p + 0.5 * h * k1p, v + 0.5 * h * k1v
        k2p, k2v = v2, -p2 @ sm
        p3, v3 = p + 0.5 * h * k2p, v + 0.5 * h * k2v
        k3p, k3v = v3, -p3 @ sm
        p4, v4 = p + h * k3p, v + h * k3v
        k4p, k4v = v4, -p4 @ s1
        p = p + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        p_out[i + 1], v_out[i + 1] = p, v
    return p_out, v_out
