"""Almost periodic function algebra.

Trigonometric polynomials with exact coefficient arithmetic, decaying
("null") functions with certified mean-decay bounds, numeric mean values
and Besicovitch seminorms, Bochner-Fejer kernels, mean-value convolution
and extraction of the almost periodic part of a W*AP function.

Frequencies are stored canonically: the first nonzero component of every
stored frequency vector is positive, and two terms are merged only when
their frequency vectors are equal component by component. Lattice
frequencies ``k . G`` are always formed by :func:`lattice_frequencies`, so a
frequency built twice from the same integer vector is bitwise identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

from . import kernels
from .errors import NoConvergence, NonConvergent, QuadratureError, ValidationError

__all__ = [
    "TrigPolynomial",
    "NullFunction",
    "WStarAPFunction",
    "MeanValueEstimate",
    "lattice_frequencies",
    "mean_value_exact",
    "mean_value_numeric",
    "besicovitch_seminorm",
    "bochner_fejer_kernel",
    "ap_convolve",
    "extract_ap_component",
    "fs_synthesize",
]


def _readonly(x):
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


def _points(y, dim):
    """Return ``(pts, shape)`` with ``pts`` of shape (N, dim)."""
    y = np.asarray(y, dtype=float)
    if dim == 1:
        if y.ndim >= 1 and y.shape[-1:] == (1,) and y.ndim > 1:
            shape = y.shape[:-1]
        else:
            shape = y.shape
        return y.reshape(-1, 1), shape
    if y.shape[-1] != dim:
        raise ValidationError(f"points must have trailing dimension {dim}, got {y.shape}")
    return y.reshape(-1, dim), y.shape[:-1]


def _reshape_out(out, shape):
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def lattice_frequencies(K, G):
    """Frequencies ``k . G`` for integer rows ``k`` of ``K``.

    The sum runs over generators in a fixed order with elementwise
    arithmetic, which makes equal integer vectors map to bitwise equal
    frequencies regardless of how many rows are processed together.

    Parameters
    ----------
    K : array_like of int, shape (n, m)
    G : array_like, shape (m, d)

    Returns
    -------
    ndarray, shape (n, d)
    """
    K = np.asarray(K)
    G = np.asarray(G, dtype=float)
    out = K[:, 0:1] * G[0]
    for j in range(1, G.shape[0]):
        out = out + K[:, j:j + 1] * G[j]
    return np.asarray(out, dtype=float)


def _canonical_sign(freqs):
    """+1 where the first nonzero component is positive, -1 where negative, 0 for zero rows."""
    nz = freqs != 0
    has = nz.any(axis=1)
    first = np.argmax(nz, axis=1)
    lead = freqs[np.arange(freqs.shape[0]), first]
    return np.where(has, np.sign(lead), 0.0)


class TrigPolynomial:
    """Finite real trigonometric sum on R^d.

    ``p(y) = constant + sum_j a_j cos(f_j . y) + b_j sin(f_j . y)``

    Parameters
    ----------
    dim : int
        Space dimension ``d``.
    terms : iterable of (frequency, a, b)
        Frequencies are scalars (``d = 1``) or length-``d`` vectors. Terms
        are canonicalised: negative leading components are flipped (which
        negates ``b``), equal frequencies are merged and zero frequencies
        are folded into ``constant``.
    constant : float
        Zero-frequency coefficient.

    Notes
    -----
    Instances are immutable. Arithmetic (``+``, ``-``, ``*`` by scalars and by
    other polynomials) is exact coefficient algebra.
    """

    __slots__ = ("_dim", "_freqs", "_a", "_b", "_constant", "_index")

    def __init__(self, dim, terms=(), constant=0.0):
        dim = int(dim)
        if dim < 1:
            raise ValidationError("dim must be a positive integer")
        terms = list(terms)
        freqs = np.zeros((len(terms), dim))
        a = np.zeros(len(terms))
        b = np.zeros(len(terms))
        for i, t in enumerate(terms):
            if len(t) != 3:
                raise ValidationError("each term must be (frequency, a, b)")
            f = np.atleast_1d(np.asarray(t[0], dtype=float))
            if f.shape != (dim,):
                raise ValidationError(f"frequency {t[0]!r} does not have dimension {dim}")
            freqs[i] = f
            a[i] = float(t[1])
            b[i] = float(t[2])
        self._set(dim, freqs, a, b, float(constant))

    @classmethod
    def from_arrays(cls, freqs, a, b, constant=0.0):
        """Build from arrays of shape (n, d), (n,), (n,) with canonicalisation."""
        freqs = np.asarray(freqs, dtype=float)
        if freqs.ndim == 1:
            freqs = freqs[:, None]
        obj = cls.__new__(cls)
        obj._set(freqs.shape[1], freqs, np.asarray(a, dtype=float).ravel(),
                 np.asarray(b, dtype=float).ravel(), float(constant))
        return obj

    def _set(self, dim, freqs, a, b, constant):
        if not (np.all(np.isfinite(freqs)) and np.all(np.isfinite(a))
                and np.all(np.isfinite(b)) and math.isfinite(constant)):
            raise ValidationError("frequencies and coefficients must be finite")
        sgn = _canonical_sign(freqs)
        zero = sgn == 0
        constant = constant + float(a[zero].sum())
        keep = ~zero
        freqs = freqs[keep] * sgn[keep, None]
        a = a[keep]
        b = b[keep] * sgn[keep]
        freqs = freqs + 0.0  # normalise -0.0 so that equality is by value
        if freqs.shape[0] > 1:
            uniq, inv = np.unique(freqs, axis=0, return_inverse=True)
            inv = inv.ravel()
            if uniq.shape[0] < freqs.shape[0]:
                aa = np.zeros(uniq.shape[0])
                bb = np.zeros(uniq.shape[0])
                np.add.at(aa, inv, a)
                np.add.at(bb, inv, b)
                freqs, a, b = uniq, aa, bb
            else:
                order = np.argsort(inv, kind="stable")
                freqs, a, b = uniq, a[order], b[order]
        nz = (a != 0) | (b != 0)
        self._dim = dim
        self._freqs = _readonly(freqs[nz].reshape(-1, dim))
        self._a = _readonly(a[nz])
        self._b = _readonly(b[nz])
        self._constant = constant
        self._index = None

    # -- accessors -----------------------------------------------------
    @property
    def dim(self):
        return self._dim

    @property
    def constant(self):
        return self._constant

    @property
    def frequencies(self):
        """Read-only array of shape (n_terms, dim)."""
        return self._freqs

    @property
    def cos_coeffs(self):
        return self._a

    @property
    def sin_coeffs(self):
        return self._b

    @property
    def n_terms(self):
        return self._freqs.shape[0]

    @property
    def terms(self):
        """List of ``(frequency tuple, a, b)``."""
        return [(tuple(f), a + 0.0, b + 0.0)
                for f, a, b in zip(self._freqs.tolist(), self._a.tolist(), self._b.tolist())]

    def _lookup(self):
        if self._index is None:
            self._index = {tuple(f): i for i, f in enumerate(self._freqs.tolist())}
        return self._index

    def coefficient(self, frequency):
        """Return ``(a, b)`` at a frequency given in canonical orientation.

        A non-canonical (negated) frequency returns ``(a, -b)``; absent
        frequencies give ``(0.0, 0.0)``.
        """
        f = np.atleast_1d(np.asarray(frequency, dtype=float)).reshape(1, -1)
        s = _canonical_sign(f)[0]
        if s == 0:
            return (self._constant, 0.0)
        key = tuple((f[0] * s + 0.0).tolist())
        i = self._lookup().get(key)
        if i is None:
            return (0.0, 0.0)
        return (float(self._a[i]), float(s * self._b[i]))

    def mean(self):
        return self._constant

    # -- evaluation ----------------------------------------------------
    def __call__(self, y):
        pts, shape = _points(y, self._dim)
        out = kernels.trig_eval(self._freqs, self._a, self._b, self._constant, pts)
        return _reshape_out(out, shape)

    # -- algebra -------------------------------------------------------
    def _check(self, other):
        if other.dim != self._dim:
            raise ValidationError("dimension mismatch")

    def __add__(self, other):
        if isinstance(other, TrigPolynomial):
            self._check(other)
            return TrigPolynomial.from_arrays(
                np.vstack([self._freqs, other._freqs]),
                np.concatenate([self._a, other._a]),
                np.concatenate([self._b, other._b]),
                self._constant + other._constant)
        if np.isscalar(other):
            return TrigPolynomial.from_arrays(self._freqs, self._a, self._b,
                                              self._constant + float(other))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return TrigPolynomial.from_arrays(self._freqs, -self._a, -self._b, -self._constant)

    def __sub__(self, other):
        if isinstance(other, TrigPolynomial) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            c = float(other)
            return TrigPolynomial.from_arrays(self._freqs, c * self._a, c * self._b,
                                              c * self._constant)
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        self._check(other)
        f1, a1, b1 = self._freqs, self._a, self._b
        f2, a2, b2 = other._freqs, other._a, other._b
        parts_f = [f1, f2]
        parts_a = [other._constant * a1, self._constant * a2]
        parts_b = [other._constant * b1, self._constant * b2]
        if f1.shape[0] and f2.shape[0]:
            fp = (f1[:, None, :] + f2[None, :, :]).reshape(-1, self._dim)
            fm = (f1[:, None, :] - f2[None, :, :]).reshape(-1, self._dim)
            ac = np.outer(a1, a2).ravel()
            bd = np.outer(b1, b2).ravel()
            ad = np.outer(a1, b2).ravel()
            bc = np.outer(b1, a2).ravel()
            parts_f += [fp, fm]
            parts_a += [0.5 * (ac - bd), 0.5 * (ac + bd)]
            parts_b += [0.5 * (ad + bc), 0.5 * (bc - ad)]
        return TrigPolynomial.from_arrays(np.vstack(parts_f), np.concatenate(parts_a),
                                          np.concatenate(parts_b),
                                          self._constant * other._constant)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        return (self._dim == other._dim and self._constant == other._constant
                and np.array_equal(self._freqs, other._freqs)
                and np.array_equal(self._a, other._a)
                and np.array_equal(self._b, other._b))

    __hash__ = None

    def prune(self, atol):
        """Drop terms whose amplitude ``hypot(a, b)`` is at most ``atol``."""
        keep = np.hypot(self._a, self._b) > atol
        return TrigPolynomial.from_arrays(self._freqs[keep], self._a[keep],
                                          self._b[keep], self._constant)

    # -- text format ---------------------------------------------------
    def to_text(self):
        """Serialise as ``d; constant`` followed by ``f_1 ... f_d; a; b`` lines."""
        lines = [f"{self._dim}; {self._constant!r}"]
        for f, a, b in zip(self._freqs.tolist(), self._a.tolist(), self._b.tolist()):
            lines.append(" ".join(repr(v) for v in f) + f"; {a!r}; {b!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not rows:
            raise ValidationError("empty polynomial record")
        head = [s.strip() for s in rows[0].split(";")]
        if len(head) != 2:
            raise ValidationError("header must read 'd; constant'")
        dim = int(head[0])
        terms = []
        for ln in rows[1:]:
            parts = [s.strip() for s in ln.split(";")]
            if len(parts) != 3:
                raise ValidationError(f"bad term record {ln!r}")
            f = [float(v) for v in parts[0].split()]
            terms.append((f, float(parts[1]), float(parts[2])))
        return cls(dim, terms, float(head[1]))

    def __repr__(self):
        return f"TrigPolynomial(dim={self._dim}, n_terms={self.n_terms}, constant={self._constant!r})"


def _ball_volume(R, d):
    return math.pi ** (d / 2) * R ** d / _gamma(d / 2 + 1)


class NullFunction:
    """Decaying function whose absolute mean over large balls vanishes.

    Use the constructors :meth:`gaussian_bumps`, :meth:`exponential_envelope`
    or :func:`fs_synthesize` (which yields the ``fs_density_part`` kind).

    Attributes
    ----------
    kind : str
    dim : int
    params : dict
        Read-only arrays describing the shape.
    R0 : float
        ``decay_bound`` is nonincreasing on ``[R0, inf)``.
    """

    KINDS = ("gaussian_bump_sum", "exponential_envelope", "fs_density_part")

    def __init__(self, kind, dim, **params):
        if kind not in self.KINDS:
            raise ValidationError(f"unknown null kind {kind!r}")
        self.kind = kind
        self.dim = int(dim)
        self.params = {k: _readonly(v) for k, v in params.items()}
        p = self.params
        if kind == "gaussian_bump_sum":
            n = p["amplitudes"].size
            p["centers"] = _readonly(p["centers"].reshape(n, self.dim))
            if np.any(p["widths"] <= 0):
                raise ValidationError("bump widths must be positive")
            self.R0 = 0.0
        elif kind == "exponential_envelope":
            if float(p["width"]) <= 0:
                raise ValidationError("envelope width must be positive")
            self.R0 = 0.0
        else:
            if self.dim != 1:
                raise ValidationError("density parts are one-dimensional")
            g = p["values"]
            A = float(p["spacing"]) * float(np.abs(g).sum())
            V = float(np.abs(np.diff(g)).sum())
            p["l1"] = _readonly(A)
            p["variation"] = _readonly(V)
            self.R0 = V / A if A > 0 else 0.0

    @classmethod
    def gaussian_bumps(cls, amplitudes, centers, widths, dim=1):
        """``sum_i A_i exp(-|y - c_i|^2 / w_i^2)``."""
        amplitudes = np.atleast_1d(np.asarray(amplitudes, dtype=float))
        widths = np.broadcast_to(np.asarray(widths, dtype=float), amplitudes.shape)
        centers = np.asarray(centers, dtype=float).reshape(amplitudes.size, dim)
        return cls("gaussian_bump_sum", dim, amplitudes=amplitudes, centers=centers,
                   widths=widths)

    @classmethod
    def exponential_envelope(cls, amplitude, center, width, wavenumber=None, dim=1):
        """``A exp(-|y - c| / w) cos(kappa . (y - c))``."""
        center = np.broadcast_to(np.asarray(center, dtype=float), (dim,))
        kappa = np.zeros(dim) if wavenumber is None else np.broadcast_to(
            np.asarray(wavenumber, dtype=float), (dim,))
        return cls("exponential_envelope", dim, amplitude=float(amplitude), center=center,
                   width=float(width), wavenumber=kappa)

    def __call__(self, y):
        pts, shape = _points(y, self.dim)
        p = self.params
        if self.kind == "gaussian_bump_sum":
            out = np.zeros(pts.shape[0])
            for A, c, w in zip(p["amplitudes"], p["centers"], p["widths"]):
                r2 = ((pts - c) ** 2).sum(axis=1)
                out += A * np.exp(-r2 / (w * w))
        elif self.kind == "exponential_envelope":
            z = pts - p["center"]
            r = np.sqrt((z ** 2).sum(axis=1))
            out = float(p["amplitude"]) * np.exp(-r / float(p["width"])) * np.cos(
                z @ p["wavenumber"])
        else:
            q = float(p["spacing"])
            x = pts[:, 0]
            s = kernels.trig_eval(p["nodes"].reshape(-1, 1), p["values"],
                                  np.zeros(p["values"].size), 0.0, pts)
            out = q * np.sinc(x * q / (2 * np.pi)) ** 2 * s
        return _reshape_out(out, shape)

    def sup_bound(self):
        p = self.params
        if self.kind == "gaussian_bump_sum":
            return float(np.abs(p["amplitudes"]).sum())
        if self.kind == "exponential_envelope":
            return abs(float(p["amplitude"]))
        return float(p["l1"])

    def decay_bound(self, R):
        """Upper bound on the mean of ``|f|`` over the ball of radius ``R``."""
        R = float(R)
        if R <= 0:
            return self.sup_bound()
        d = self.dim
        p = self.params
        if self.kind == "gaussian_bump_sum":
            mass = float((np.abs(p["amplitudes"]) * (math.sqrt(math.pi) * p["widths"]) ** d).sum())
            return min(self.sup_bound(), mass / _ball_volume(R, d))
        if self.kind == "exponential_envelope":
            sphere = 2 * math.pi ** (d / 2) / _gamma(d / 2)
            mass = abs(float(p["amplitude"])) * float(p["width"]) ** d * sphere * math.factorial(d - 1)
            return min(self.sup_bound(), mass / _ball_volume(R, d))
        A = float(p["l1"])
        V = float(p["variation"])
        if V == 0.0 or A == 0.0:
            return 0.0
        x0 = V / A
        if R <= x0:
            return A
        return V * (1.0 + math.log(R / x0)) / R

    def __repr__(self):
        return f"NullFunction(kind={self.kind!r}, dim={self.dim})"


class WStarAPFunction:
    """Sum of an almost periodic part and an optional null part."""

    __slots__ = ("ap_part", "null_part")

    def __init__(self, ap_part, null_part=None):
        if null_part is not None and null_part.dim != ap_part.dim:
            raise ValidationError("ap and null parts must share the dimension")
        self.ap_part = ap_part
        self.null_part = null_part

    @property
    def dim(self):
        return self.ap_part.dim

    def mean(self):
        return self.ap_part.constant

    def __call__(self, y):
        v = self.ap_part(y)
        if self.null_part is not None:
            v = v + self.null_part(y)
        return v

    def __repr__(self):
        return f"WStarAPFunction({self.ap_part!r}, {self.null_part!r})"


@dataclass(frozen=True)
class MeanValueEstimate:
    """Schedule of averages with the last one as the estimate.

    ``float(est)`` gives ``est.value``.
    """

    value: float
    radii_used: tuple
    tail_spread: float
    averages: tuple

    def __float__(self):
        return float(self.value)


def mean_value_exact(f):
    """Mean value of a trigonometric polynomial: its constant term."""
    if isinstance(f, WStarAPFunction):
        return f.ap_part.constant
    return f.constant


def _infer_dim(f, dim):
    if dim is not None:
        return int(dim)
    return int(getattr(f, "dim", 1))


_DEFAULT_SAMPLES = {1: 1 << 18, 2: 1024}


def _kronecker(n, d):
    # generalised golden ratio: the root of x**(d+1) = x + 1
    phi = 2.0
    for _ in range(60):
        phi = (1 + phi) ** (1.0 / (d + 1))
    alpha = (1.0 / phi) ** np.arange(1, d + 1)
    return np.mod(0.5 + np.outer(np.arange(1, n + 1), alpha), 1.0)


def _region_average(f, R, n, d, ball, power=None):
    """Average of ``f`` (or ``|f|**power``) over a ball or the cube [-R, R]^d."""
    def g(pts):
        v = np.asarray(f(pts[:, 0] if d == 1 else pts), dtype=float)
        return v if power is None else np.abs(v) ** power

    if d == 1:
        x = -R + (np.arange(n) + 0.5) * (2 * R / n)
        total = 0.0
        for s in range(0, n, 1 << 16):
            total += g(x[s:s + (1 << 16), None]).sum()
        return total / n
    if d == 2:
        x = -R + (np.arange(n) + 0.5) * (2 * R / n)
        total, count = 0.0, 0
        rows = max(1, (1 << 16) // n)
        for s in range(0, n, rows):
            X, Y = np.meshgrid(x[s:s + rows], x, indexing="ij")
            pts = np.column_stack([X.ravel(), Y.ravel()])
            if ball:
                pts = pts[(pts ** 2).sum(axis=1) <= R * R]
            count += pts.shape[0]
            if pts.shape[0]:
                total += g(pts).sum()
        return total / count
    total, count = 0.0, 0
    for s in range(0, n, 1 << 16):
        m = min(1 << 16, n - s)
        u = _kronecker(s + m, d)[s:]
        pts = R * (2 * u - 1)
        if ball:
            pts = pts[(pts ** 2).sum(axis=1) <= R * R]
        count += pts.shape[0]
        if pts.shape[0]:
            total += g(pts).sum()
    return total / count


def _schedule(values, name):
    values = tuple(float(v) for v in values)
    if len(values) < 3:
        raise ValidationError(f"{name} needs at least 3 entries")
    if any(b <= a for a, b in zip(values, values[1:])) or values[0] <= 0:
        raise ValidationError(f"{name} must be positive and strictly increasing")
    return values


def _finish(averages, radii, tol, what):
    last = averages[-3:]
    spread = float(max(last) - min(last))
    est = MeanValueEstimate(float(averages[-1]), radii, spread, tuple(float(v) for v in averages))
    if tol is not None and spread > tol:
        raise NonConvergent(
            f"{what}: tail spread {spread:.3g} exceeds tolerance {tol:.3g}", estimate=est)
    return est


def mean_value_numeric(f, radii, samples_per_radius=None, tol=1e-3, dim=None):
    """Averages of ``f`` over balls ``B(0, R)`` for a schedule of radii.

    Parameters
    ----------
    f : callable
        Called with an array of shape (N,) when ``d = 1`` and (N, d)
        otherwise; must return N values.
    radii : sequence of float
        Strictly increasing, at least three entries.
    samples_per_radius : int, optional
        Midpoint nodes per axis for ``d <= 2`` and Kronecker points for
        ``d > 2``. Defaults to 2**18 (d=1), 1024 (d=2), 2**18 (d>2).
    tol : float or None
        Largest admissible spread among the last three averages.
    dim : int, optional
        Space dimension; read from ``f.dim`` when absent.

    Returns
    -------
    MeanValueEstimate

    Raises
    ------
    NonConvergent
        If the tail spread exceeds ``tol``; the estimate is attached.
    """
    d = _infer_dim(f, dim)
    radii = _schedule(radii, "radii")
    n = int(samples_per_radius or _DEFAULT_SAMPLES.get(d, 1 << 18))
    avgs = [_region_average(f, R, n, d, ball=True) for R in radii]
    return _finish(avgs, radii, tol, "mean value")


def besicovitch_seminorm(f, p, lengths, samples_per_length=None, tol=1e-3, dim=None):
    """``((2L)^-d int_{[-L,L]^d} |f|^p)^(1/p)`` over a schedule of ``L``.

    Returns a :class:`MeanValueEstimate` whose ``value`` is the seminorm at
    the largest length; ``float()`` of it gives the number.
    """
    p = float(p)
    if p < 1:
        raise ValidationError("p must be at least 1")
    d = _infer_dim(f, dim)
    lengths = _schedule(lengths, "lengths")
    n = int(samples_per_length or _DEFAULT_SAMPLES.get(d, 1 << 18))
    vals = [_region_average(f, L, n, d, ball=False, power=p) ** (1.0 / p) for L in lengths]
    return _finish(vals, lengths, tol, "seminorm")


def _generators(base_frequencies, dim=None):
    G = np.asarray(base_frequencies, dtype=float)
    if G.ndim == 1:
        if dim not in (None, 1):
            G = G.reshape(-1, dim)
        else:
            G = G[:, None]
    if G.ndim != 2 or G.shape[0] == 0:
        raise ValidationError("base frequencies must be a non-empty list")
    if np.any(~np.isfinite(G)) or np.any(np.all(G == 0, axis=1)):
        raise ValidationError("base frequencies must be finite and nonzero")
    return G


def _half_lattice(n, m):
    """Integer vectors in [-n, n]^m whose first nonzero entry is positive."""
    axes = np.arange(-n, n + 1)
    K = np.stack(np.meshgrid(*([axes] * m), indexing="ij"), axis=-1).reshape(-1, m)
    nz = K != 0
    first = np.argmax(nz, axis=1)
    lead = K[np.arange(K.shape[0]), first]
    return K[lead > 0]


def bochner_fejer_kernel(base_frequencies, order, dim=None):
    """Product Fejer kernel over the module generated by the base frequencies.

    ``phi_n(y) = prod_j K_n(g_j . y)`` with ``K_n(t) = sum_{|k|<=n}
    (1 - |k|/(n+1)) e^{ikt}``, expanded into real form. The result is
    even, nonnegative and has mean 1.

    Parameters
    ----------
    base_frequencies : array_like
        Scalars (d = 1) or an (m, d) array of generator vectors.
    order : int
    dim : int, optional

    Raises
    ------
    ValidationError
        If a nonzero lattice vector of the kernel produces a zero
        frequency (the generators are rationally dependent).
    """
    n = int(order)
    if n < 1:
        raise ValidationError("order must be at least 1")
    G = _generators(base_frequencies, dim)
    K = _half_lattice(n, G.shape[0])
    w = np.prod(1.0 - np.abs(K) / (n + 1.0), axis=1)
    F = lattice_frequencies(K, G)
    if np.any(np.all(F == 0, axis=1)):
        raise ValidationError("base frequencies are rationally dependent at this order")
    return TrigPolynomial.from_arrays(F, 2.0 * w, np.zeros_like(w), 1.0)


def ap_convolve(phi, f):
    """Mean-value convolution ``M_z(phi(z) f(y - z))``.

    Only frequencies present in both arguments survive. For a
    :class:`WStarAPFunction` the null part is dropped, since its convolution
    with any trigonometric polynomial vanishes identically.
    """
    if isinstance(f, WStarAPFunction):
        f = f.ap_part
    if phi.dim != f.dim:
        raise ValidationError("dimension mismatch")
    idx = phi._lookup()
    rows, fa, fb, pa, pb = [], [], [], [], []
    for i, key in enumerate(f.frequencies.tolist()):
        j = idx.get(tuple(key))
        if j is not None:
            rows.append(i)
            pa.append(phi.cos_coeffs[j])
            pb.append(phi.sin_coeffs[j])
    rows = np.asarray(rows, dtype=int)
    fa = f.cos_coeffs[rows]
    fb = f.sin_coeffs[rows]
    pa = np.asarray(pa, dtype=float)
    pb = np.asarray(pb, dtype=float)
    return TrigPolynomial.from_arrays(f.frequencies[rows].reshape(-1, f.dim),
                                      0.5 * (pa * fa - pb * fb),
                                      0.5 * (pa * fb + pb * fa),
                                      phi.constant * f.constant)


# -- extraction from samples ---------------------------------------------

_BETA = 30.0


def _es_window(s):
    """Exponential-of-semicircle window on s in (-1, 1)."""
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(_BETA * (np.sqrt(1 - s[inside] ** 2) - 1))
    return out


def _min_gap(G, n):
    """Smallest nonzero |k . G| over the lattice |k|_inf <= n."""
    m = G.shape[0]
    if (2 * n + 1) ** m > 4_000_001:
        raise ValidationError(
            "frequency module too large for sampled extraction at this order; "
            "pass a TrigPolynomial or WStarAPFunction for exact extraction")
    F = lattice_frequencies(_half_lattice(n, m), G)
    r = np.sqrt((F ** 2).sum(axis=1))
    r = r[r > 0]
    return float(r.min()), float(r.max())


def _bohr_coefficients(f, G, n, d):
    """Windowed mean values ``M(f e^{-i k . G y})`` on the lattice |k| <= n.

    Samples cover the shell R <= |y| <= 2R, which separates every pair of
    lattice frequencies (differences have |k| <= 2n) and keeps compactly
    concentrated null parts near the origin out of the estimate.
    """
    m = G.shape[0]
    gap, top = _min_gap(G, 2 * n)
    R = max(50.0, 2 * _BETA / gap)
    h = 2 * np.pi / (1.25 * top + 8 * _BETA / R)
    if d == 1:
        r = np.arange(R + 0.5 * h, 2 * R, h)
        x = np.concatenate([-r[::-1], r])
        w = _es_window((np.abs(x) - 1.5 * R) / (0.5 * R))
        pts_iter = [(x[s:s + (1 << 21), None], w[s:s + (1 << 21)])
                    for s in range(0, x.size, 1 << 21)]
        wsum = w.sum()
    else:
        ax = np.arange(-2 * R + 0.5 * h, 2 * R, h)
        if ax.size ** d > 5e7:
            raise ValidationError("sampled extraction in d > 1 needs too many points")
        grids = np.meshgrid(*([ax] * d), indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        rad = np.sqrt((pts ** 2).sum(axis=1))
        w = _es_window((rad - 1.5 * R) / (0.5 * R))
        keep = w > 0
        pts, w = pts[keep], w[keep]
        pts_iter = [(pts[s:s + (1 << 21)], w[s:s + (1 << 21)])
                    for s in range(0, pts.shape[0], 1 << 21)]
        wsum = w.sum()
    shape = (2 * n + 1,) * m
    C = np.zeros(shape, dtype=complex)
    for pts, ww in pts_iter:
        vals = np.asarray(f(pts[:, 0] if d == 1 else pts), dtype=float) * ww
        theta = np.mod(pts @ G.T, 2 * np.pi)
        C += _type1(theta, vals.astype(complex), n, m)
    return C / wsum


def _type1(theta, c, n, m):
    """``sum_j c_j exp(-i k . theta_j)`` for k in [-n, n]^m."""
    N = 2 * n + 1
    try:
        import finufft
    except ImportError:  # direct sums as a fallback
        finufft = None
    if finufft is not None and m <= 3:
        fn = {1: finufft.nufft1d1, 2: finufft.nufft2d1, 3: finufft.nufft3d1}[m]
        args = [np.ascontiguousarray(theta[:, j]) for j in range(m)]
        out = fn(*args, c, (N,) * m if m > 1 else N, eps=1e-13, isign=-1)
        return np.asarray(out).reshape((N,) * m)
    ks = np.arange(-n, n + 1)
    out = np.zeros((N,) * m, dtype=complex)
    K = np.stack(np.meshgrid(*([ks] * m), indexing="ij"), axis=-1).reshape(-1, m)
    flat = out.reshape(-1)
    for s in range(0, theta.shape[0], 4096):
        E = np.exp(-1j * (K @ theta[s:s + 4096].T))
        flat += E @ c[s:s + 4096]
    return out


def _from_coefficients(C, G, n, prune):
    m = G.shape[0]
    K = _half_lattice(n, m)
    idx = tuple((K + n).T)
    neg = tuple((-K + n).T)
    ck = 0.5 * (C[idx] + np.conj(C[neg]))
    w = np.prod(1.0 - np.abs(K) / (n + 1.0), axis=1)
    a = 2 * w * ck.real
    b = -2 * w * ck.imag
    const = float(C[(n,) * m].real)
    scale = max(1.0, abs(const), float(np.abs(a).max(initial=0)), float(np.abs(b).max(initial=0)))
    keep = np.hypot(a, b) > prune * scale
    return TrigPolynomial.from_arrays(lattice_frequencies(K[keep], G), a[keep], b[keep], const)


def _default_sup_grid(d):
    if d == 1:
        return np.linspace(-20.0, 20.0, 4001)
    ax = np.linspace(-20.0, 20.0, 81)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def extract_ap_component(f, base_frequencies, order_schedule=(16, 32, 64, 128, 256),
                         sup_grid=None, tol=1e-2, dim=None, prune=1e-9,
                         full_output=False):
    """Almost periodic part ``phi_n *_M f`` of a W*AP function.

    Orders are tried in turn; the first order whose sup-grid deviation from
    the previous order is below ``tol`` is returned.

    Parameters
    ----------
    f : TrigPolynomial, WStarAPFunction or callable
        Structured inputs are convolved exactly (the null part is
        annihilated by construction). Other callables are sampled: mean
        values against lattice characters are computed with a smooth
        window supported on a shell ``R <= |y| <= 2R`` and non-uniform FFTs.
    base_frequencies : array_like
        Generators of the candidate frequency module.
    order_schedule : sequence of int
        Strictly increasing Fejer orders.
    sup_grid : array_like, optional
        Evaluation points for the deviation test; defaults to 4001 points on
        [-20, 20] (d = 1).
    tol : float
    prune : float
        Sampled path only: coefficients below ``prune`` times the largest
        one are dropped from the returned polynomial.
    full_output : bool
        Also return a dict with the orders tried and their deviations.

    Raises
    ------
    NoConvergence
        When the schedule is exhausted; the last polynomial is attached.
    """
    d = _infer_dim(f, dim)
    G = _generators(base_frequencies, d)
    if G.shape[1] != d:
        raise ValidationError("base frequencies do not match the dimension")
    orders = [int(o) for o in order_schedule]
    if len(orders) < 2 or any(b <= a for a, b in zip(orders, orders[1:])) or orders[0] < 1:
        raise ValidationError("order_schedule must be increasing with at least two orders")
    grid = _default_sup_grid(d) if sup_grid is None else np.asarray(sup_grid, dtype=float)
    structured = isinstance(f, (TrigPolynomial, WStarAPFunction))
    prev_vals, result = None, None
    devs = []
    for n in orders:
        if structured:
            result = ap_convolve(bochner_fejer_kernel(G, n), f)
        else:
            result = _from_coefficients(_bohr_coefficients(f, G, n, d), G, n, prune)
        vals = result(grid)
        if prev_vals is not None:
            dev = float(np.max(np.abs(vals - prev_vals)))
            devs.append(dev)
            if dev < tol:
                info = {"orders": orders[:len(devs) + 1], "deviations": devs, "order": n}
                return (result, info) if full_output else result
        prev_vals = vals
    raise NoConvergence(
        f"extraction did not settle below {tol:g}; deviations {['%.3g' % v for v in devs]}",
        estimate=result)


def fs_synthesize(atoms=(), density=None, grid=None, dim=1, rtol=1e-3):
    """Fourier-Stieltjes synthesis ``sum w cos/sin(l.x) + int e^{ixy} g(y) dy``.

    Parameters
    ----------
    atoms : iterable of (frequency, weight)
        A real weight ``w`` contributes ``w cos(l.x)``; a complex weight
        contributes ``Re(w e^{i l.x})``.
    density : callable, optional
        Compactly supported continuous density ``g`` on R (d = 1 only).
    grid : array_like
        Uniform grid covering the support of ``density``; the transform is
        taken of the piecewise-linear interpolant of ``g`` on this grid.
    rtol : float
        Admissible midpoint interpolation error relative to ``max |g|``.

    Raises
    ------
    QuadratureError
        If the grid does not resolve ``density`` or does not contain its
        support.
    """
    terms = []
    for lam, w in atoms:
        w = complex(w)
        terms.append((lam, w.real, -w.imag))
    ap = TrigPolynomial(dim, terms)
    if density is None:
        return WStarAPFunction(ap, None)
    if dim != 1:
        raise ValidationError("densities are supported in one dimension only")
    if grid is None:
        raise ValidationError("a quadrature grid is required with a density")
    y = np.asarray(grid, dtype=float).ravel()
    if y.size < 3:
        raise ValidationError("quadrature grid needs at least 3 nodes")
    q = (y[-1] - y[0]) / (y.size - 1)
    if q <= 0 or np.max(np.abs(np.diff(y) - q)) > 1e-9 * q:
        raise ValidationError("quadrature grid must be uniform and increasing")
    g = np.asarray(density(y), dtype=float)
    top = float(np.max(np.abs(g)))
    if top == 0.0:
        return WStarAPFunction(ap, None)
    if max(abs(g[0]), abs(g[-1])) > 1e-12 * top:
        raise QuadratureError("density does not vanish at the ends of its grid")
    mid = 0.5 * (y[1:] + y[:-1])
    err = float(np.max(np.abs(np.asarray(density(mid), dtype=float) - 0.5 * (g[1:] + g[:-1]))))
    if err > rtol * top:
        raise QuadratureError(
            f"density grid too coarse: midpoint interpolation error {err:.3g} "
            f"exceeds {rtol:g} of the maximum")
    null = NullFunction("fs_density_part", 1, nodes=y, values=g, spacing=q)
    return WStarAPFunction(ap, null)
