"""Coupled-core fiber link model.

Symbols are arrays of shape (n, 6).  Each span applies an independent Haar
unitary (strong linear coupling between the 3 cores and 2 polarizations),
optional mode-dependent loss, and the span's share of amplifier noise.  The
link budget converts span count and launch power into an end-to-end SNR.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299_792_458.0
N_DIM = 6


def db2lin(x):
    return 10 ** (np.asarray(x, dtype=float) / 10)


def lin2db(x):
    return 10 * np.log10(x)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class LinkModel:
    """Multi-span link parameters.

    ``launch_power_dbm_per_channel`` is the power of one wavelength channel in
    one spatial mode (both polarizations); the ASE reference bandwidth is the
    symbol rate.  ``nli_coeff`` is in 1/mW^2 per span.
    """

    span_loss_db: float = 22.8
    fiber_loss_db_per_km: float = 0.18
    fiber_length_km: float = 60.0
    span_length_equiv_km: float = 115.0
    n_spans: int = 1
    amp_noise_figure_db: float = 5.0
    launch_power_dbm_per_channel: float = 0.0
    mdl_db: float = 0.0
    nli_coeff: float = 0.0
    symbol_rate_hz: float = 30e9
    wavelength_nm: float = 1549.3
    coupling: bool = True
    phase_noise_var: float = 0.0

    def __post_init__(self):
        if min(self.span_loss_db, self.fiber_loss_db_per_km, self.mdl_db) < 0:
            raise ValueError("losses must be non-negative")
        if self.n_spans < 1:
            raise ValueError("n_spans must be >= 1")
        if self.nli_coeff < 0 or self.phase_noise_var < 0:
            raise ValueError("nli_coeff and phase_noise_var must be non-negative")

    @property
    def distance_km(self) -> float:
        return self.n_spans * self.span_length_equiv_km

    @property
    def extra_loss_db(self) -> float:
        """Span loss not explained by the fiber itself (attenuator, couplers)."""
        return self.span_loss_db - self.fiber_loss_db_per_km * self.fiber_length_km

    @property
    def launch_power_mw(self) -> float:
        return float(db2lin(self.launch_power_dbm_per_channel))

    def with_distance(self, distance_km: float) -> "LinkModel":
        return replace(self, n_spans=spans_for_distance(distance_km, self.span_length_equiv_km))

    def with_power(self, dbm: float) -> "LinkModel":
        return replace(self, launch_power_dbm_per_channel=dbm)


def spans_for_distance(distance_km: float, span_length_km: float = 115.0) -> int:
    return max(1, int(round(distance_km / span_length_km)))


def span_loss_db(fiber_loss_db_per_km: float, fiber_length_km: float, extra_loss_db: float) -> float:
    return fiber_loss_db_per_km * fiber_length_km + extra_loss_db


def ase_power_mw(link: LinkModel) -> float:
    """ASE power added by one span amplifier in the symbol-rate bandwidth."""
    nu = LIGHT_SPEED / (link.wavelength_nm * 1e-9)
    gain = db2lin(link.span_loss_db)
    watts = db2lin(link.amp_noise_figure_db) * PLANCK * nu * gain * link.symbol_rate_hz
    return float(watts * 1e3)


def span_snr(link: LinkModel) -> float:
    p = link.launch_power_mw
    return p / (ase_power_mw(link) + link.nli_coeff * p**3)


def snr_at_distance(link: LinkModel) -> tuple[float, float]:
    """End-to-end linear SNR ``P / (N (P_ase + eta P^3))`` and the distance in km."""
    return span_snr(link) / link.n_spans, link.distance_km


def calibrate_nli(link: LinkModel, optimum_dbm: float = 4.0) -> float:
    """NLI coefficient placing the SNR maximum at ``optimum_dbm``.

    d/dP [P / (a + eta P^3)] = 0  gives  a = 2 eta P^3.
    """
    p = float(db2lin(optimum_dbm))
    return ase_power_mw(link) / (2 * p**3)


def awgn(x, sigma2: float, rng=None) -> np.ndarray:
    """Add circular complex Gaussian noise, ``sigma2`` per real dimension."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    x = np.asarray(x, dtype=complex)
    if sigma2 == 0:
        return x.copy()
    rng = as_rng(rng)
    s = np.sqrt(sigma2)
    return x + s * rng.standard_normal(x.shape) + 1j * s * rng.standard_normal(x.shape)


def sample_unitary(seed=None, n: int = N_DIM) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Ginibre matrix, R-diagonal phases fixed."""
    rng = as_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def mdl_matrix(mdl_db: float, seed=None, n: int = N_DIM) -> np.ndarray:
    """U1 diag(s) U2 with 20 log10(s_max / s_min) = mdl_db and mean(s^2) = 1.

    Singular values are spread uniformly in dB between the two extremes.
    """
    if mdl_db < 0:
        raise ValueError("mdl_db must be non-negative")
    rng = as_rng(seed)
    u1 = sample_unitary(rng, n)
    u2 = sample_unitary(rng, n)
    s = 10 ** (np.linspace(-mdl_db / 2, mdl_db / 2, n) / 20)
    s /= np.sqrt(np.mean(s**2))
    return (u1 * s[None, :]) @ u2


def apply_mdl(x, mdl_db: float, seed=None) -> np.ndarray:
    m = mdl_matrix(mdl_db, seed, np.asarray(x).shape[-1])
    return np.asarray(x) @ m.T


def wiener_phase(n: int, var_per_symbol: float, rng=None) -> np.ndarray:
    if var_per_symbol == 0:
        return np.zeros(n)
    rng = as_rng(rng)
    return np.cumsum(np.sqrt(var_per_symbol) * rng.standard_normal(n))


class Transmission(NamedTuple):
    rx: np.ndarray
    matrix: np.ndarray  # end-to-end linear channel, rx = tx @ matrix.T + noise
    phase: np.ndarray  # common phase applied per symbol
    sigma2: float  # total noise variance per real dimension


def transmit(
    x,
    link: LinkModel,
    seed=None,
    snr_db: float | None = None,
    add_noise: bool = True,
    energy: float = 1.0,
) -> Transmission:
    """Send a symbol stream through ``link.n_spans`` spans.

    Per span: coupling unitary (if ``link.coupling``), optional MDL, then AWGN
    carrying 1/N of the end-to-end noise.  The end-to-end SNR comes from the
    link budget unless ``snr_db`` overrides it.  A common Wiener phase with
    ``link.phase_noise_var`` per symbol is applied last.
    """
    rng = as_rng(seed)
    y = np.array(x, dtype=complex)
    if snr_db is None:
        snr, _ = snr_at_distance(link)
    else:
        snr = float(db2lin(snr_db))
    sigma2_total = energy / (N_DIM * 2 * snr) if add_noise else 0.0
    sigma2_span = sigma2_total / link.n_spans
    total = np.eye(N_DIM, dtype=complex)
    for _ in range(link.n_spans):
        h = sample_unitary(rng) if link.coupling else np.eye(N_DIM, dtype=complex)
        if link.mdl_db > 0:
            h = mdl_matrix(link.mdl_db, rng) @ h
        y = y @ h.T
        total = h @ total
        y = awgn(y, sigma2_span, rng)
    phase = wiener_phase(len(y), link.phase_noise_var, rng)
    if link.phase_noise_var > 0:
        y = y * np.exp(1j * phase)[:, None]
    return Transmission(y, total, phase, sigma2_total)
