"""Correlated Rayleigh fading synthesis and time evolution.

Each sublink small-scale channel is h_tilde = g @ R^(1/2) with g a standard
circularly-symmetric complex Gaussian row vector and R the transmit spatial
correlation matrix.  The global channel of a user scales each sublink by
sqrt(alpha) and concatenates them, so the composed covariance is the block
diagonal of alpha_n * R_n.

All sampling is pure given (inputs, rng); a FadingProcess owns its state and
belongs to exactly one simulation lane at a time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import j0

SPEED_OF_LIGHT = 299_792_458.0

_HERMGAUSS_ORDER = 129
_HERMGAUSS_CACHE: dict = {}
# Spreads at or above a full circle model isotropic scattering: uncorrelated
# antennas by convention, not the literal Gaussian mixture expectation.
_ISOTROPIC_SPREAD_RAD = 2.0 * np.pi


def single_bounce_correlation(bearing_rad: float, angular_spread_rad: float,
                              n_antennas: int, spacing_wavelengths: float = 0.5) -> np.ndarray:
    """ULA transmit correlation for Gaussian-distributed departure angles.

    R[p, q] = E[exp(j*2*pi*spacing*(p-q)*sin(theta))] with theta normal around
    the bearing, evaluated by fixed-order Gauss-Hermite quadrature.  Spreads of
    a full circle (>= 2*pi) return the identity (isotropic scattering).
    """
    if n_antennas < 1:
        raise ValueError("need at least one antenna")
    if angular_spread_rad <= 0:
        raise ValueError("angular spread must be positive")
    if angular_spread_rad >= _ISOTROPIC_SPREAD_RAD:
        return np.eye(n_antennas, dtype=complex)

    if _HERMGAUSS_ORDER not in _HERMGAUSS_CACHE:
        _HERMGAUSS_CACHE[_HERMGAUSS_ORDER] = hermgauss(_HERMGAUSS_ORDER)
    nodes, weights = _HERMGAUSS_CACHE[_HERMGAUSS_ORDER]
    theta = bearing_rad + np.sqrt(2.0) * angular_spread_rad * nodes
    weights = weights / np.sqrt(np.pi)
    # Toeplitz: first row from lag k = q - p.
    lags = np.arange(n_antennas)
    phase = np.exp(1j * 2.0 * np.pi * spacing_wavelengths
                   * lags[:, None] * np.sin(theta)[None, :])
    r = phase @ weights
    idx = np.abs(lags[:, None] - lags[None, :])
    corr = r[idx]
    corr = np.where(lags[:, None] > lags[None, :], np.conj(corr), corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def correlation_sqrt(corr: np.ndarray, clamp_tol: float = 1e-12) -> np.ndarray:
    """Hermitian square root, clamping small negative eigenvalues at zero."""
    vals, vecs = np.linalg.eigh(corr)
    if np.min(vals) < -clamp_tol * max(1.0, np.max(np.abs(vals))):
        raise np.linalg.LinAlgError("correlation matrix is not positive semi-definite")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def sample_complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, I) entries: unit variance split between real and imaginary parts."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_small_scale(corr: np.ndarray, rng: np.random.Generator,
                       size: int | None = None) -> np.ndarray:
    """Draw h_tilde = g @ R^(1/2); returns (N_t,) or (size, N_t)."""
    root = correlation_sqrt(corr)
    n = corr.shape[0]
    if size is None:
        return sample_complex_gaussian(rng, n) @ root
    return sample_complex_gaussian(rng, (size, n)) @ root


@dataclass(frozen=True)
class GlobalChannel:
    sublinks: np.ndarray    # (M, N_t) scaled sublink vectors sqrt(alpha_n)*h_tilde_n
    composed: np.ndarray    # (M*N_t,) concatenation ordered by BS index

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.composed, self.composed).real)


def compose_global(alpha_row, small_scales) -> GlobalChannel:
    """Scale sublink n by sqrt(alpha_n) and concatenate in BS order."""
    alpha_row = np.asarray(alpha_row, dtype=float)
    small = np.asarray(small_scales)
    if small.shape[0] != alpha_row.shape[0]:
        raise ValueError("one gain per sublink required")
    sub = np.sqrt(alpha_row)[:, None] * small
    return GlobalChannel(sublinks=sub, composed=sub.reshape(-1))


def doppler_hz(speed_kmh: float, carrier_hz: float) -> float:
    return (speed_kmh / 3.6) * carrier_hz / SPEED_OF_LIGHT


def gauss_markov_rho(doppler: float, slot_s: float) -> float:
    """Lag-1 fading autocorrelation J0(2*pi*f_d*dt) of the classic Doppler spectrum."""
    return float(j0(2.0 * np.pi * doppler * slot_s))


class FadingProcess:
    """Time-correlated evolution of a bank of sublink channels.

    First-order Gauss-Markov recursion h[t+1] = rho*h[t] + sqrt(1-rho^2)*w with
    w drawn under the same spatial correlation, so the marginal distribution is
    stationary at every slot.
    """

    def __init__(self, corr_roots: np.ndarray, doppler: float, slot_s: float,
                 rng: np.random.Generator):
        # corr_roots: (n_links, N_t, N_t) Hermitian square roots, one per sublink.
        self.corr_roots = corr_roots
        self.doppler_hz = doppler
        self.slot_duration_s = slot_s
        self.rho = gauss_markov_rho(doppler, slot_s)
        self.state = self._innovation(rng)

    @classmethod
    def from_correlations(cls, corrs, doppler: float, slot_s: float,
                          rng: np.random.Generator) -> "FadingProcess":
        roots = np.stack([correlation_sqrt(c) for c in np.asarray(corrs)])
        return cls(roots, doppler, slot_s, rng)

    def _innovation(self, rng: np.random.Generator) -> np.ndarray:
        n_links, n_t = self.corr_roots.shape[0], self.corr_roots.shape[1]
        g = sample_complex_gaussian(rng, (n_links, n_t))
        return np.einsum("ln,lnm->lm", g, self.corr_roots)

    def step(self, rng: np.random.Generator) -> np.ndarray:
        w = self._innovation(rng)
        self.state = self.rho * self.state + np.sqrt(max(0.0, 1.0 - self.rho ** 2)) * w
        return self.state


def evolve(process: FadingProcess, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Advance the process; returns (steps, n_links, N_t) including each new slot."""
    out = np.empty((steps,) + process.state.shape, dtype=complex)
    for t in range(steps):
        out[t] = process.step(rng)
    return out


def dump_channels_csv(path, channels) -> None:
    """Debug dump: one row per channel vector, columns h0_re,h0_im,h1_re,h1_im,..."""
    h = np.atleast_2d(np.asarray(channels))
    cols = []
    for k in range(h.shape[1]):
        cols += [f"h{k}_re", f"h{k}_im"]
    flat = np.empty((h.shape[0], 2 * h.shape[1]))
    flat[:, 0::2] = h.real
    flat[:, 1::2] = h.imag
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in flat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
