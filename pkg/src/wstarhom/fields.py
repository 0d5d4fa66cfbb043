"""Quasi-periodic coefficient ensembles on a torus of phases.

The probability space is the k-torus with normalised Haar measure and the
translation group acts by ``T(y) omega = omega + Lambda_f y (mod 2 pi)``.
A profile is a trigonometric polynomial in the k angles with integer
frequency vectors; its realisation at a phase is a quasi-periodic function
of ``y`` (plus an optional null part attached per realisation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .ap_core import (
    NullFunction,
    TrigPolynomial,
    WStarAPFunction,
    lattice_frequencies,
    mean_value_numeric,
)
from .errors import ErgodicityViolation, ValidationError

__all__ = [
    "Phase",
    "QuasiPeriodicEnsemble",
    "BirkhoffResult",
    "sample_phase",
    "shift",
    "realization",
    "birkhoff_compare",
    "ergodicity_residual",
]

TWO_PI = 2 * math.pi


def _wrap(x):
    x = np.mod(np.asarray(x, dtype=float), TWO_PI)
    return np.where(x >= TWO_PI, 0.0, x)


@dataclass(frozen=True, eq=False)
class Phase:
    """A point of the torus; angles are reduced into [0, 2 pi)."""

    angles: np.ndarray

    def __post_init__(self):
        a = _wrap(np.atleast_1d(np.asarray(self.angles, dtype=float)))
        if a.ndim != 1:
            raise ValidationError("phase angles must be a vector")
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)

    def __eq__(self, other):
        return isinstance(other, Phase) and np.array_equal(self.angles, other.angles)

    def __hash__(self):
        return hash(self.angles.tobytes())


class QuasiPeriodicEnsemble:
    """Stationary ergodic field ``F(omega, y) = profile(omega + Lambda_f y)``.

    Parameters
    ----------
    freq_matrix : array_like, shape (k, d) or (k,)
        Row ``i`` is the frequency vector of phase ``i``; a flat list is
        read as ``d = 1``.
    profiles : TrigPolynomial or dict of str -> TrigPolynomial
        Profiles on the k-torus (dimension k, integer frequency vectors).
        A single polynomial is registered as channel ``"a"``.
    null_profiles : NullFunction or dict of str -> NullFunction, optional
        Null parts added to realisations of the matching channel.
    m_max : int
        Truncation of the resonance search.
    certify : bool
        Reject resonant frequency matrices at construction. Switch off only
        to build counterexamples.

    Raises
    ------
    ErgodicityViolation
        If ``certify`` and some nonzero integer ``m`` with ``|m|_inf <= m_max``
        has ``m^T Lambda_f = 0``.
    """

    def __init__(self, freq_matrix, profiles, null_profiles=None, m_max=8, certify=True):
        L = np.asarray(freq_matrix, dtype=float)
        if L.ndim == 1:
            L = L[:, None]
        if L.ndim != 2 or L.shape[0] < 1 or not np.all(np.isfinite(L)):
            raise ValidationError("freq_matrix must be a finite k x d array")
        self.freq_matrix = L
        L.setflags(write=False)
        self.torus_dim, self.dim = L.shape
        if isinstance(profiles, TrigPolynomial):
            profiles = {"a": profiles}
        self.profiles = dict(profiles)
        for name, p in self.profiles.items():
            if p.dim != self.torus_dim:
                raise ValidationError(f"profile {name!r} must live on the {self.torus_dim}-torus")
            if not np.array_equal(p.frequencies, np.round(p.frequencies)):
                raise ValidationError(f"profile {name!r} has non-integer torus frequencies")
        if null_profiles is None:
            null_profiles = {}
        elif isinstance(null_profiles, NullFunction):
            null_profiles = {"a": null_profiles}
        self.null_profiles = dict(null_profiles)
        for name, g in self.null_profiles.items():
            if name not in self.profiles:
                raise ValidationError(f"null profile attached to unknown channel {name!r}")
            if g.dim != self.dim:
                raise ValidationError("null profile dimension must match the space dimension")
        self.m_max = int(m_max)
        self.resonance = self._find_resonance()
        self.certified = self.resonance is None
        if certify and not self.certified:
            raise ErgodicityViolation(
                f"resonant frequency matrix: m = {self.resonance} gives m^T Lambda_f = 0")

    def _find_resonance(self):
        k = self.torus_dim
        n = self.m_max
        axes = np.arange(-n, n + 1)
        K = np.stack(np.meshgrid(*([axes] * k), indexing="ij"), axis=-1).reshape(-1, k)
        K = K[np.any(K != 0, axis=1)]
        F = lattice_frequencies(K, self.freq_matrix)
        scale = np.abs(K) @ np.abs(self.freq_matrix).sum(axis=1)
        bad = np.sqrt((F ** 2).sum(axis=1)) <= 1e-12 * scale
        if not np.any(bad):
            return None
        B = K[bad]
        B = B[np.argmax(B != 0, axis=1).choose(B.T) > 0]
        best = np.lexsort((np.abs(B).sum(axis=1), np.abs(B).max(axis=1)))[0]
        return tuple(int(v) for v in B[best])

    @property
    def channels(self):
        return tuple(self.profiles)

    def with_null(self, null_profiles):
        """Copy of the ensemble with different null profiles."""
        return QuasiPeriodicEnsemble(self.freq_matrix, self.profiles, null_profiles,
                                     self.m_max, certify=self.certified)

    def orbit(self, torus_poly, omega):
        """``y -> torus_poly(omega + Lambda_f y)`` as a polynomial in ``y``."""
        omega = _angles(self, omega)
        M = torus_poly.frequencies.astype(int)
        phi = M @ omega if M.size else np.zeros(0)
        a = torus_poly.cos_coeffs
        b = torus_poly.sin_coeffs
        c, s = np.cos(phi), np.sin(phi)
        mu = lattice_frequencies(M, self.freq_matrix) if M.size else np.zeros((0, self.dim))
        return TrigPolynomial.from_arrays(mu.reshape(-1, self.dim), a * c + b * s,
                                          b * c - a * s, torus_poly.constant)

    def realization(self, omega, channel="a", include_null=True):
        """Realisation of a channel at a phase as a :class:`WStarAPFunction`."""
        if channel not in self.profiles:
            raise ValidationError(f"unknown channel {channel!r}")
        ap = self.orbit(self.profiles[channel], omega)
        null = self.null_profiles.get(channel) if include_null else None
        return WStarAPFunction(ap, null)

    def __repr__(self):
        return (f"QuasiPeriodicEnsemble(torus_dim={self.torus_dim}, dim={self.dim}, "
                f"channels={self.channels}, certified={self.certified})")


def _angles(ens, omega):
    a = omega.angles if isinstance(omega, Phase) else _wrap(np.atleast_1d(omega))
    if a.shape != (ens.torus_dim,):
        raise ValidationError(f"phase must have {ens.torus_dim} angles")
    return a


def sample_phase(ensemble, seed, index=0):
    """Haar-uniform phase from the stream keyed by ``(seed, index)``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))
    return Phase(rng.uniform(0.0, TWO_PI, ensemble.torus_dim))


def shift(ensemble, omega, y):
    """``T(y) omega = (omega + Lambda_f y) mod 2 pi``."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (ensemble.dim,):
        raise ValidationError(f"shift vector must have {ensemble.dim} components")
    return Phase(_angles(ensemble, omega) + ensemble.freq_matrix @ y)


def realization(ensemble, omega, channel="a", include_null=True):
    """Module-level alias of :meth:`QuasiPeriodicEnsemble.realization`."""
    return ensemble.realization(omega, channel, include_null)


def _torus_mean(poly, k):
    deg = int(np.abs(poly.frequencies).max(initial=0))
    q = max(8, 2 * deg + 2)
    ax = (np.arange(q) + 0.5) * (TWO_PI / q)
    grids = np.meshgrid(*([ax] * k), indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    return float(np.mean(poly(pts)))


class BirkhoffResult(NamedTuple):
    ensemble_mean: float
    spatial_means: list
    max_gap: float


def birkhoff_compare(ensemble, channel="a", n_phases=5, R=1e3, seed=0, tol=1e-2,
                     samples_per_radius=None):
    """Compare the Haar mean of a profile with spatial means along orbits.

    The ensemble side is a uniform torus-grid quadrature (exact for the
    profile's degree); the spatial side averages the realisation over balls
    of radii ``R/4, R/2, R``.

    Raises
    ------
    ErgodicityViolation
        If the ensemble is not certified or the largest gap exceeds ``tol``.
    """
    if not ensemble.certified:
        raise ErgodicityViolation("ensemble failed its ergodicity certificate")
    if int(n_phases) < 1:
        raise ValidationError("n_phases must be positive")
    prof = ensemble.profiles[channel]
    ens_mean = _torus_mean(prof, ensemble.torus_dim)
    means = []
    for i in range(int(n_phases)):
        om = sample_phase(ensemble, seed, i)
        g = ensemble.orbit(prof, om)
        est = mean_value_numeric(g, (R / 4, R / 2, R), samples_per_radius, tol=None)
        means.append(est.value)
    gap = float(max(abs(m - ens_mean) for m in means))
    if gap > tol:
        raise ErgodicityViolation(
            f"spatial and ensemble means differ by {gap:.3g} > {tol:g} at R = {R:g}")
    return BirkhoffResult(ens_mean, means, gap)


def _phase_grid(k, q=4):
    ax = np.arange(q) * (TWO_PI / q)
    grids = np.meshgrid(*([ax] * k), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def _residual_1d(g, mean, t, R_out, s):
    n_in = max(2, int(round(2 * t / s)))
    s = 2 * t / n_in
    n_out = int(math.ceil(2 * R_out / s))
    x = -R_out - t + (np.arange(n_out + n_in) + 0.5) * s
    c = np.concatenate([[0.0], np.cumsum(g(x) - mean)])
    avg = (c[n_in:] - c[:-n_in]) / n_in
    return float(np.mean(avg[:n_out] ** 2))


def _residual_2d(g, mean, t, R_out, s):
    r = int(round(t / s))
    s = t / r
    ax = np.arange(-r, r + 1) * s
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    disk = (X ** 2 + Y ** 2 <= t * t).astype(float)
    disk /= disk.sum()
    n = int(math.ceil((R_out + t) / s))
    xs = np.arange(-n, n + 1) * s
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vals = g(np.column_stack([X.ravel(), Y.ravel()])).reshape(X.shape) - mean
    avg = fftconvolve(vals, disk, mode="valid")
    return float(np.mean(avg ** 2))


def ergodicity_residual(ensemble, f, t_schedule, omega=None, outer_radius=None,
                        full_output=False):
    """Mean square deviation of ball averages from the Haar mean.

    Computes ``M_y |avg_{B(0,t)} f(T(x + y) omega) dx - M(f)|^2`` by nested
    midpoint quadrature for each ``t`` and returns the value at the largest
    ``t``. Without ``omega`` the result is averaged over a 4-point-per-axis
    phase grid.

    Parameters
    ----------
    f : TrigPolynomial
        Function on the torus (dimension k).
    t_schedule : sequence of float
        Increasing inner radii.
    outer_radius : float, optional
        Half-width of the outer average; defaults to 20 t_max (d = 1) or
        5 t_max (d = 2).
    """
    if f.dim != ensemble.torus_dim:
        raise ValidationError("f must be a polynomial on the ensemble torus")
    ts = [float(t) for t in t_schedule]
    if not ts or any(t <= 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValidationError("t_schedule must be positive and increasing")
    d = ensemble.dim
    if d > 2:
        raise ValidationError("ergodicity residual is implemented for d <= 2")
    mean = f.constant
    R_out = float(outer_radius) if outer_radius else (20.0 if d == 1 else 5.0) * ts[-1]
    phases = [omega] if omega is not None else list(_phase_grid(ensemble.torus_dim))
    res = np.zeros(len(ts))
    for om in phases:
        g = ensemble.orbit(f, om)
        nu = float(np.sqrt((g.frequencies ** 2).sum(axis=1)).max(initial=0.0))
        s = min(0.05 if d == 1 else 0.1, 0.5 / nu if nu > 0 else 1.0)
        for i, t in enumerate(ts):
            fn = _residual_1d if d == 1 else _residual_2d
            res[i] += fn(g, mean, t, R_out, s)
    res /= len(phases)
    if full_output:
        return float(res[-1]), [float(v) for v in res]
    return float(res[-1])
