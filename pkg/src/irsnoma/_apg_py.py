"""Pure-numpy accelerated projected gradient for disk-constrained least squares.

Mirrors ``_apg_ext.pyx`` step for step; used when the extension is not built
or when ``IRSNOMA_PURE_PYTHON=1``.
"""

import numpy as np


def project_disk(z):
    """Scale every entry with modulus above one back onto the unit circle."""
    a = np.abs(z)
    out = z.copy()
    big = a > 1.0
    out[big] = z[big] / a[big]
    return out


def apg(K, d, x0, inv_lip, tol, max_iter):
    """Minimize ``||K x + d||^2`` subject to ``|x_l| <= 1``.

    FISTA with gradient-based adaptive restart. ``inv_lip`` is
    ``1 / lambda_max(K^H K)``. Stops when the natural residual
    ``max_l |x_l - P(x_l - g_l)|`` at the current iterate drops below ``tol``,
    with ``g = K^H (K x + d)``.

    Returns ``(x, iterations, converged)``.
    """
    KH = K.conj().T
    x = project_disk(np.asarray(x0, dtype=complex))
    y = x.copy()
    t = 1.0
    lip = 1.0 / inv_lip
    for it in range(1, max_iter + 1):
        g = KH @ (K @ y + d)
        xn = project_disk(y - inv_lip * g)
        step = y - xn
        if lip * np.abs(step).max() <= tol:
            gx = KH @ (K @ xn + d)
            if np.abs(xn - project_disk(xn - gx)).max() <= tol:
                return xn, it, True
        if np.vdot(step, xn - x).real > 0.0:
            t = 1.0
            y = xn.copy()
        else:
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            y = xn + ((t - 1.0) / tn) * (xn - x)
            t = tn
        x = xn
    return x, max_iter, False
