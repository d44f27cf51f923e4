"""Monte Carlo estimators for BER, MI, GMI and effective SNR.

Every estimator returns a :class:`MetricEstimate` with a 95% confidence
half-width.  MI/GMI/SNR use batch means over 10 batches; BER uses the Wilson
score interval.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import erfc

from . import modem
from .channel import as_rng, awgn
from .constellation import N_BITS, LabeledConstellation

N_BATCHES = 10
CHUNK = 1024
SNR_EFF_CAP = 1e12  # reported when the residual variance is zero up to round-off
LOG2E = 1 / np.log(2)


@dataclass(frozen=True)
class MetricEstimate:
    value: float
    ci_halfwidth_95: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")

    @property
    def low(self) -> float:
        return self.value - self.ci_halfwidth_95

    @property
    def high(self) -> float:
        return self.value + self.ci_halfwidth_95


def q_function(x):
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2))


def qpsk_ber_theory(snr_db):
    """Gray QPSK bit error probability at Es/N0 = ``snr_db`` (per 2D)."""
    return q_function(np.sqrt(10 ** (np.asarray(snr_db, dtype=float) / 10)))


def bpsk_mi(amplitude: float, sigma2: float, n_nodes: int = 160) -> float:
    """MI of antipodal +-a in real Gaussian noise, by Gauss-Hermite quadrature."""
    t, w = np.polynomial.hermite.hermgauss(n_nodes)
    n = np.sqrt(2 * sigma2) * t
    # conditioned on +a: log2(1 + exp(-2 a (a + n) / sigma2))
    loss = np.logaddexp(0.0, -2 * amplitude * (amplitude + n) / sigma2) * LOG2E
    return float(1.0 - np.sum(w * loss) / np.sqrt(np.pi))


def qpsk_mi_2d(sigma2: float, energy_2d: float = 1 / 6) -> float:
    """MI of one QPSK coordinate with ``energy_2d`` and ``sigma2`` per real dimension."""
    return 2 * bpsk_mi(np.sqrt(energy_2d / 2), sigma2)


def batch_means(samples, n_batches: int = N_BATCHES) -> MetricEstimate:
    """Mean of ``samples`` with a t-based 95% half-width from batch means."""
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n < n_batches:
        raise ValueError(f"need at least {n_batches} samples")
    means = np.array([b.mean() for b in np.array_split(samples, n_batches)])
    half = stats.t.ppf(0.975, n_batches - 1) * means.std(ddof=1) / np.sqrt(n_batches)
    return MetricEstimate(float(samples.mean()), float(half), n)


def wilson_halfwidth(k: int, n: int, z: float = 1.959963984540054) -> float:
    p = k / n
    return float(z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n))


def ber(tx_bits, rx_bits) -> MetricEstimate:
    """Bit error fraction between two equally shaped bit arrays."""
    tx = np.asarray(tx_bits)
    rx = np.asarray(rx_bits)
    if tx.shape != rx.shape:
        raise ValueError(f"length mismatch: {tx.shape} vs {rx.shape}")
    n = tx.size
    k = int(np.count_nonzero(tx != rx))
    return MetricEstimate(k / n, wilson_halfwidth(k, n), n)


def ber_words(tx_words, rx_words) -> MetricEstimate:
    from .constellation import label_bits

    return ber(label_bits(tx_words), label_bits(rx_words))


def _logsumexp_rows(m: np.ndarray) -> np.ndarray:
    mx = m.max(axis=1)
    return mx + np.log(np.exp(m - mx[:, None]).sum(axis=1))


def information_samples(y, words, c: LabeledConstellation, sigma2: float, demapper: str | None = "exact"):
    """Per-symbol MI and GMI terms for received ``y`` sent with labels ``words``.

    The MI term is ``log2 p(y|x) / mean_x' p(y|x')`` under the Gaussian
    likelihood with ``sigma2``; the GMI term is
    ``sum_i 1 - log2(1 + exp(-(1 - 2 b_i) LLR_i))``.  With a mismatched
    ``sigma2`` both are achievable-rate lower bounds.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    words = np.asarray(words)
    mi = np.empty(len(y))
    gmi = np.empty(len(y)) if demapper else None
    llr_fn = {"exact": modem.exact_llrs, "maxlog": modem.maxlog_llrs, None: None}[demapper]
    for s in range(0, len(y), CHUNK):
        m = modem.log_metrics(y[s : s + CHUNK], c, sigma2)
        w = words[s : s + CHUNK]
        rows = np.arange(len(w))
        mi[s : s + CHUNK] = N_BITS + (m[rows, w] - _logsumexp_rows(m)) * LOG2E
        if llr_fn is not None:
            llr = llr_fn(m, c)
            sign = 1.0 - 2.0 * c.bits[w]
            gmi[s : s + CHUNK] = np.sum(1.0 - np.logaddexp(0.0, -sign * llr) * LOG2E, axis=1)
    return mi, gmi


def _awgn_run(c, sigma2, n, seed):
    rng = as_rng(seed)
    words = modem.random_words(rng, n)
    return awgn(c.points[words], sigma2, rng), words


def mi_mc(c: LabeledConstellation, sigma2: float, n: int, seed=None) -> MetricEstimate:
    """Monte Carlo MI (bits per 12D symbol) over the AWGN channel, uniform input."""
    y, words = _awgn_run(c, sigma2, n, seed)
    mi, _ = information_samples(y, words, c, sigma2, demapper=None)
    return batch_means(mi)


def gmi_mc(c: LabeledConstellation, sigma2: float, n: int, seed=None, demapper: str = "exact") -> MetricEstimate:
    y, words = _awgn_run(c, sigma2, n, seed)
    _, gmi = information_samples(y, words, c, sigma2, demapper=demapper)
    return batch_means(gmi)


def mi_gmi_mc(c, sigma2, n, seed=None, demapper="exact") -> tuple[MetricEstimate, MetricEstimate]:
    """MI and GMI from the same noisy samples (paired estimate)."""
    y, words = _awgn_run(c, sigma2, n, seed)
    mi, gmi = information_samples(y, words, c, sigma2, demapper=demapper)
    return batch_means(mi), batch_means(gmi)


def _cluster_ids(c: LabeledConstellation, words: np.ndarray) -> np.ndarray:
    """(n, 6) index of the 2D point each coordinate carries (ring * 4 + quadrant)."""
    return c.rings[words].astype(np.int64) * 4 + c.quadrants[words]


def _snr_eff_once(rx: np.ndarray, ids: np.ndarray) -> tuple[float, float]:
    signal = 0.0
    noise = 0.0
    n = len(rx)
    dof = 0
    for k in range(rx.shape[1]):
        key = ids[:, k]
        counts = np.bincount(key)
        used = counts > 0
        sums = np.bincount(key, weights=rx[:, k].real) + 1j * np.bincount(key, weights=rx[:, k].imag)
        centroid = np.zeros_like(sums)
        centroid[used] = sums[used] / counts[used]
        resid = rx[:, k] - centroid[key]
        noise += np.sum(np.abs(resid) ** 2)
        dof += n - np.count_nonzero(used)
        signal += np.sum(np.abs(centroid[key]) ** 2)
    # per-coordinate pooled variances summed over the 6 coordinates
    return signal / n, noise / dof * rx.shape[1]


def effective_snr(rx, c: LabeledConstellation, words=None, n_batches: int = N_BATCHES) -> MetricEstimate:
    """Effective SNR from the spread of each received constellation cluster.

    Received samples are grouped per coordinate by the 2D point they carry
    (the transmitted one when ``words`` is given, otherwise the hard
    decision).  SNR = mean centroid energy per 12D symbol / pooled residual
    variance summed over the 6 complex coordinates.  For AWGN at ``sigma2``
    this is ``1 / (12 sigma2)``.
    """
    rx = np.atleast_2d(np.asarray(rx, dtype=complex))
    if words is None:
        words, _ = modem.hard_demap(rx, c)
    ids = _cluster_ids(c, np.asarray(words))
    counts = np.array([np.bincount(ids[:, k]) for k in range(6)], dtype=object)
    if any(np.any((cnt > 0) & (cnt < 2)) for cnt in counts):
        warnings.warn("some constellation clusters have fewer than 2 samples", RuntimeWarning)
    sig, noise = _snr_eff_once(rx, ids)
    if noise * SNR_EFF_CAP <= sig:
        return MetricEstimate(SNR_EFF_CAP, 0.0, len(rx))
    value = sig / noise
    parts = []
    for idx in np.array_split(np.arange(len(rx)), n_batches):
        s, nz = _snr_eff_once(rx[idx], ids[idx])
        parts.append(min(s / nz, SNR_EFF_CAP) if nz > 0 else SNR_EFF_CAP)
    half = stats.t.ppf(0.975, n_batches - 1) * np.std(parts, ddof=1) / np.sqrt(n_batches)
    return MetricEstimate(float(value), float(half), len(rx))


def snr_db_estimate(e: MetricEstimate) -> tuple[float, float]:
    """Convert a linear SNR estimate to dB with a delta-method half-width."""
    return float(10 * np.log10(e.value)), float(10 / np.log(10) * e.ci_halfwidth_95 / e.value)
