"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels`` mirrors them one to one.
All arrays are float64 and C-contiguous.
"""

import numpy as np

_CHUNK = 4096


def trig_eval(freqs, a, b, constant, pts):
    """Evaluate ``constant + sum_j a_j cos(f_j.y) + b_j sin(f_j.y)``.

    Parameters
    ----------
    freqs : ndarray, shape (n, d)
    a, b : ndarray, shape (n,)
    constant : float
    pts : ndarray, shape (N, d)

    Returns
    -------
    ndarray, shape (N,)
    """
    N = pts.shape[0]
    out = np.full(N, float(constant))
    if freqs.shape[0] == 0:
        return out
    step = max(1, _CHUNK * 64 // max(1, freqs.shape[0]))
    for s in range(0, N, step):
        phase = pts[s:s + step] @ freqs.T
        out[s:s + step] += np.cos(phase) @ a + np.sin(phase) @ b
    return out


def pucci_plus_rule_2d(D):
    """Maximising Pucci rule on the four-direction stencil.

    Parameters
    ----------
    D : ndarray, shape (4, N)
        Directional second differences along (1,0), (0,1), (1,1), (1,-1),
        each normalised by ``h**2 |v|**2``.

    Returns
    -------
    e1, e2 : ndarray, shape (N,)
        Eigenvalues (descending) of the reconstructed Hessian.
    P : ndarray, shape (3, N)
        Entries (11, 22, 12) of the projector on the positive eigenspace.
    use3 : ndarray of bool, shape (N,)
        True where the off-diagonal is read from direction (1,1).
    """
    D1, D2, D3, D4 = D
    b3 = D3 - 0.5 * (D1 + D2)
    b4 = D4 - 0.5 * (D1 + D2)
    use3 = b3 >= b4
    b = np.maximum(np.maximum(b3, b4), 0.0)
    mid = 0.5 * (D1 + D2)
    rad = np.hypot(0.5 * (D1 - D2), b)
    e1 = mid + rad
    e2 = mid - rad
    P = np.zeros((3,) + D1.shape)
    both = e2 > 0
    one = (e1 > 0) & ~both & (rad > 0)
    P[0, both] = 1.0
    P[1, both] = 1.0
    r2 = 2.0 * rad[one]
    P[0, one] = (D1[one] - e2[one]) / r2
    P[1, one] = (D2[one] - e2[one]) / r2
    P[2, one] = b[one] / r2
    return e1, e2, P, use3


def pucci_weights_2d(D, lam, Lam):
    """Value and nonnegative stencil weights of the maximising Pucci rule."""
    e1, e2, P, use3 = pucci_plus_rule_2d(D)
    value = (Lam * (np.maximum(e1, 0) + np.maximum(e2, 0))
             + lam * (np.minimum(e1, 0) + np.minimum(e2, 0)))
    A11 = lam + (Lam - lam) * P[0]
    A22 = lam + (Lam - lam) * P[1]
    A12 = (Lam - lam) * P[2]
    W = np.empty_like(D)
    W[0] = A11 - A12
    W[1] = A22 - A12
    W[2] = np.where(use3, 2 * A12, 0.0)
    W[3] = np.where(use3, 0.0, 2 * A12)
    return value, W


def _second_differences_2d(u, h, c):
    inv = 1.0 / (h * h)
    uc = u[1:-1, 1:-1]
    D = np.empty((4,) + uc.shape)
    D[0] = c[0] + (u[2:, 1:-1] - 2 * uc + u[:-2, 1:-1]) * inv
    D[1] = c[1] + (u[1:-1, 2:] - 2 * uc + u[1:-1, :-2]) * inv
    D[2] = c[2] + (u[2:, 2:] - 2 * uc + u[:-2, :-2]) * (0.5 * inv)
    D[3] = c[3] + (u[2:, :-2] - 2 * uc + u[:-2, 2:]) * (0.5 * inv)
    return D


def sweep_pucci_2d(u, h, tau, lam, Lam, sgn, c, delta, n_steps):
    """Explicit pseudo-time steps ``u += tau (S(u) - delta u)`` for Pucci.

    ``sgn`` is +1 for the maximising and -1 for the minimising operator.
    Boundary values are left untouched. Returns the final array and the
    max-norm increment of every step.
    """
    u = np.array(u, dtype=float, copy=True)
    c = np.asarray(c, dtype=float)
    incs = np.empty(n_steps)
    for k in range(n_steps):
        D = _second_differences_2d(u, h, c)
        if sgn < 0:
            D = -D
        e1, e2 = _eig_plus(D)
        S = (Lam * (np.maximum(e1, 0) + np.maximum(e2, 0))
             + lam * (np.minimum(e1, 0) + np.minimum(e2, 0)))
        if sgn < 0:
            S = -S
        du = tau * (S - delta * u[1:-1, 1:-1])
        u[1:-1, 1:-1] += du
        incs[k] = np.abs(du).max() if du.size else 0.0
    return u, incs


def _eig_plus(D):
    D1, D2, D3, D4 = D
    b = np.maximum(np.maximum(D3, D4) - 0.5 * (D1 + D2), 0.0)
    mid = 0.5 * (D1 + D2)
    rad = np.hypot(0.5 * (D1 - D2), b)
    return mid + rad, mid - rad


def sweep_weighted(u, W, const, h, tau, delta, n_steps):
    """Explicit steps for a frozen linear rule in one or two dimensions.

    ``W`` has shape (n_dir,) + interior shape; ``const`` is the interior
    source term so that ``S(u) = sum_v W_v D_v(u) + const``.
    """
    u = np.array(u, dtype=float, copy=True)
    incs = np.empty(n_steps)
    inv = 1.0 / (h * h)
    for k in range(n_steps):
        if u.ndim == 1:
            S = W[0] * (u[2:] - 2 * u[1:-1] + u[:-2]) * inv + const
            du = tau * (S - delta * u[1:-1])
            u[1:-1] += du
        else:
            D = _second_differences_2d(u, h, np.zeros(4))
            S = np.einsum("v...,v...->...", W, D) + const
            du = tau * (S - delta * u[1:-1, 1:-1])
            u[1:-1, 1:-1] += du
        incs[k] = np.abs(du).max() if du.size else 0.0
    return u, incs


def sweep_pucci_1d(u, h, tau, lam, Lam, sgn, c, delta, n_steps):
    """One-dimensional counterpart of :func:`sweep_pucci_2d`."""
    u = np.array(u, dtype=float, copy=True)
    incs = np.empty(n_steps)
    inv = 1.0 / (h * h)
    c0 = float(np.ravel(c)[0])
    for k in range(n_steps):
        D = sgn * (c0 + (u[2:] - 2 * u[1:-1] + u[:-2]) * inv)
        S = sgn * (Lam * np.maximum(D, 0) + lam * np.minimum(D, 0))
        du = tau * (S - delta * u[1:-1])
        u[1:-1] += du
        incs[k] = np.abs(du).max() if du.size else 0.0
    return u, incs
