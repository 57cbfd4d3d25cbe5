"""Two-phase limited feedback: per-sublink direction quantization against
correlated random codebooks, exact norm feedback, channel reconstruction, and
the shared-budget codebook sizing arithmetic.

Codebooks are generated once per (drop, user, BS) link and are immutable;
quantization is pure.  Scalar feedback (norms, gains, noise variances) is
treated as free.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import correlation_sqrt, sample_complex_gaussian


@dataclass(frozen=True)
class Codebook:
    entries: np.ndarray   # (J, N_t) unit-norm rows, J = 2^bits
    bits: int


@dataclass(frozen=True)
class QuantizedChannel:
    """Per-sublink feedback of one user: exact norms plus direction indices."""
    cqi: np.ndarray             # (M,) sublink norms, fed back exactly
    cdi_index: np.ndarray       # (M,) selected codebook rows
    codebooks: tuple[Codebook, ...]

    def reconstructed(self) -> np.ndarray:
        return reconstruct(self)


@dataclass(frozen=True)
class FeedbackBudget:
    per_user_bits: int          # B_u
    total_bits: int             # B_t
    scheduler_class: str
    scheduled_users: int        # L used for sizing


def gen_codebook(corr: np.ndarray, bits: int, seed) -> Codebook:
    """2^bits unit vectors c = e/||e|| with e ~ CN(0, corr).

    Entries are drawn sequentially, so codebooks sharing a seed are nested
    across bit widths.
    """
    if bits < 1:
        raise ValueError("direction quantization needs at least one bit")
    rng = np.random.default_rng(seed)
    n = corr.shape[0]
    # one contiguous block of draws per entry, so codebooks sharing a seed
    # stay nested across bit widths
    block = rng.standard_normal((2 ** bits, 2 * n))
    raw = ((block[:, :n] + 1j * block[:, n:]) / np.sqrt(2.0)) @ correlation_sqrt(corr)
    norms = np.linalg.norm(raw, axis=1)
    while np.any(norms < 1e-300):  # probability-zero guard
        bad = norms < 1e-300
        raw[bad] = sample_complex_gaussian(rng, (int(bad.sum()), n)) @ correlation_sqrt(corr)
        norms = np.linalg.norm(raw, axis=1)
    entries = raw / norms[:, None]
    entries.setflags(write=False)
    return Codebook(entries=entries, bits=bits)


def quantize(direction: np.ndarray, codebook: Codebook) -> int:
    """Most-aligned codebook row (minimum chordal distance); ties break low."""
    score = np.abs(codebook.entries @ np.asarray(direction, dtype=complex).conj())
    return int(np.argmax(score))


def quantize_sublinks(sublinks: np.ndarray, codebooks) -> QuantizedChannel:
    """Quantize each sublink of one user's channel; zero sublinks keep index 0."""
    sublinks = np.atleast_2d(np.asarray(sublinks, dtype=complex))
    cqi = np.linalg.norm(sublinks, axis=1)
    idx = np.zeros(sublinks.shape[0], dtype=int)
    for m in range(sublinks.shape[0]):
        if cqi[m] > 0.0:
            idx[m] = quantize(sublinks[m] / cqi[m], codebooks[m])
    return QuantizedChannel(cqi=cqi, cdi_index=idx, codebooks=tuple(codebooks))


def reconstruct(quantized: QuantizedChannel) -> np.ndarray:
    """Concatenated per-sublink rho * c; norms are preserved exactly."""
    parts = [quantized.cqi[m] * quantized.codebooks[m].entries[quantized.cdi_index[m]]
             for m in range(quantized.cqi.shape[0])]
    return np.concatenate(parts)


def codebook_bits(scheduler_class: str, n_cells: int, users_per_cell: int,
                  scheduled_users: int, per_user_bits: int, total_bits: int) -> int:
    """Largest per-sublink codebook width honoring both feedback budgets.

    One-phase schedulers (gus, sus) spend total bits on every user's full
    channel; two-phase norm/gain schedulers (nus, lus) only on the scheduled
    users; localnus additionally ships every user's local channel.
    """
    m, k, l = n_cells, users_per_cell, scheduled_users
    cls = scheduler_class.lower()
    if cls in ("gus", "sus"):
        cap = min(per_user_bits / m, total_bits / (k * m * m))
    elif cls in ("nus", "lus"):
        cap = min(per_user_bits / m, total_bits / (m * l))
    elif cls == "localnus":
        cap = min(per_user_bits / m, total_bits / (m * k + m * l))
    else:
        raise ValueError(f"unknown scheduler class {scheduler_class!r}")
    bits = int(np.floor(cap))
    if bits < 1:
        raise ValueError("budget too small for any CDI")
    return bits


def slot_feedback_bits(scheduler_class: str, n_cells: int, users_per_cell: int,
                       scheduled_users: int, bits: int) -> int:
    """Feedback bits one slot consumes under a given codebook width."""
    m, k, l = n_cells, users_per_cell, scheduled_users
    cls = scheduler_class.lower()
    if cls in ("gus", "sus"):
        return m * m * k * bits
    if cls in ("nus", "lus"):
        return m * l * bits
    if cls == "localnus":
        return (m * k + m * l) * bits
    raise ValueError(f"unknown scheduler class {scheduler_class!r}")
