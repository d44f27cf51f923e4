"""Mapping of 12-bit words to 12D symbols and hard/soft demapping.

Noise convention used throughout: ``sigma2`` is the noise variance per real
dimension, so a unit-energy constellation sees ``SNR = 1 / (12 * sigma2)``.
LLRs are natural log-odds, positive when bit 0 is more likely.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .constellation import N_BITS, N_POINTS, LabeledConstellation, pairwise_sq_distances

_CHUNK = 4096


def snr_to_sigma2(snr_db, energy: float = 1.0):
    return energy / (12.0 * 10 ** (np.asarray(snr_db, dtype=float) / 10))


def sigma2_to_snr_db(sigma2, energy: float = 1.0):
    return 10 * np.log10(energy / (12.0 * np.asarray(sigma2, dtype=float)))


def map_words(words, c: LabeledConstellation) -> np.ndarray:
    """Map 12-bit words (any shape) to symbols of shape (..., 6)."""
    words = np.asarray(words)
    if words.size and (words.min() < 0 or words.max() >= N_POINTS):
        raise ValueError("words must lie in [0, 4096)")
    return c.points[words]


def random_words(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, N_POINTS, size=n)


def _as_2d(y) -> tuple[np.ndarray, bool]:
    y = np.asarray(y, dtype=complex)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[-1] != 6:
        raise ValueError("received symbols must have 6 complex coordinates")
    if not np.all(np.isfinite(y)):
        raise ValueError("received symbols must be finite")
    return y, single


def hard_demap_full(y, c: LabeledConstellation):
    """Exhaustive ML decision: scan all 4096 points, ties to the lowest label.

    Returns ``(words, dist2)``.
    """
    y, single = _as_2d(y)
    words = np.empty(len(y), dtype=np.int64)
    dist2 = np.empty(len(y))
    for s in range(0, len(y), _CHUNK):
        d2 = pairwise_sq_distances(y[s : s + _CHUNK], c.points)
        idx = np.argmin(d2, axis=1)  # first minimum; points are in label order
        words[s : s + _CHUNK] = c.labels[idx]
        dist2[s : s + _CHUNK] = d2[np.arange(len(idx)), idx]
    if single:
        return int(words[0]), float(dist2[0])
    return words, dist2


class _StructuredDecoder:
    """ML decoder exploiting the ring/quadrant structure of a constellation.

    Within each independent coordinate block, every allowed ring pattern
    admits either all quadrant vectors or those with a fixed quadrant-sum
    parity.  For a given pattern the best vector is found per coordinate and
    a parity violation is repaired by the cheapest single-coordinate change
    (Wagner decoding), which is exact for a single parity check.
    """

    def __init__(self, c: LabeledConstellation):
        self.alphabet = c.alphabet
        self.blocks = c.blocks
        n_rings = c.alphabet.shape[1]
        self.n_rings = n_rings
        self.patterns = []
        total = 1
        for blk in c.blocks:
            key_r = c.rings[:, blk]
            par = np.sum(c.quadrants[:, blk], axis=1) % 2
            allowed = {}
            for r, p in zip(map(tuple, key_r), par):
                allowed.setdefault(r, set()).add(int(p))
            opts = [(r, None if len(ps) == 2 else ps.pop()) for r, ps in sorted(allowed.items())]
            count = sum(4 ** len(blk) // (1 if par_ is None else 2) for _, par_ in opts)
            total *= count
            self.patterns.append(opts)
        ring_code = np.zeros(N_POINTS, dtype=np.int64)
        quad_code = np.zeros(N_POINTS, dtype=np.int64)
        for k in range(6):
            ring_code = ring_code * n_rings + c.rings[:, k]
            quad_code = quad_code * 4 + c.quadrants[:, k]
        self.table = np.full(n_rings**6 * 4**6, -1, dtype=np.int64)
        self.table[ring_code * 4**6 + quad_code] = c.labels
        self.valid = total == N_POINTS and np.unique(ring_code * 4**6 + quad_code).size == N_POINTS

    def decode(self, y: np.ndarray):
        n = len(y)
        rings = np.zeros((n, 6), dtype=np.int64)
        quads = np.zeros((n, 6), dtype=np.int64)
        dist2 = np.zeros(n)
        rows = np.arange(n)
        for blk, opts in zip(self.blocks, self.patterns):
            blk = list(blk)
            best_cost = np.full(n, np.inf)
            best_r = np.zeros((n, len(blk)), dtype=np.int64)
            best_q = np.zeros((n, len(blk)), dtype=np.int64)
            for pattern, parity in opts:
                pts = self.alphabet[blk, list(pattern)]  # (|blk|, 4)
                d = np.abs(y[:, blk, None] - pts[None]) ** 2  # (n, |blk|, 4)
                q = np.argmin(d, axis=2)
                dq = np.take_along_axis(d, q[..., None], axis=2)[..., 0]
                cost = dq.sum(axis=1)
                if parity is not None:
                    # best alternative of the other quadrant parity per coordinate
                    flip = (np.arange(4) % 2)[None, None, :] != (q % 2)[..., None]
                    d_alt = np.where(flip, d, np.inf)
                    q_alt = np.argmin(d_alt, axis=2)
                    pen = np.take_along_axis(d_alt, q_alt[..., None], axis=2)[..., 0] - dq
                    bad = (q.sum(axis=1) % 2) != parity
                    k = np.argmin(pen, axis=1)
                    cost = cost + np.where(bad, pen[rows, k], 0.0)
                    fix = np.where(bad)[0]
                    q[fix, k[fix]] = q_alt[fix, k[fix]]
                better = cost < best_cost
                best_cost = np.where(better, cost, best_cost)
                best_r[better] = pattern
                best_q[better] = q[better]
            rings[:, blk] = best_r
            quads[:, blk] = best_q
            dist2 += best_cost
        ring_code = np.zeros(n, dtype=np.int64)
        quad_code = np.zeros(n, dtype=np.int64)
        for k in range(6):
            ring_code = ring_code * self.n_rings + rings[:, k]
            quad_code = quad_code * 4 + quads[:, k]
        return self.table[ring_code * 4**6 + quad_code], dist2


@lru_cache(maxsize=16)
def _decoder_for(c: LabeledConstellation) -> _StructuredDecoder:
    return _StructuredDecoder(c)


def hard_demap(y, c: LabeledConstellation, method: str = "auto"):
    """Minimum-distance decision over all 4096 points.

    Parameters
    ----------
    y : array_like, shape (6,) or (n, 6)
        Received symbols.
    c : LabeledConstellation
    method : {"auto", "structured", "full"}
        ``"structured"`` uses the per-block decoder (bit-exact with the full
        scan away from exact ties); ``"full"`` scans every point.

    Returns
    -------
    words, dist2
        Decided labels and the squared distance to the decided point.
    """
    if method == "full":
        return hard_demap_full(y, c)
    dec = _decoder_for(c)
    if not dec.valid:
        if method == "structured":
            raise ValueError("constellation has no usable block structure")
        return hard_demap_full(y, c)
    y, single = _as_2d(y)
    words, dist2 = dec.decode(y)
    if single:
        return int(words[0]), float(dist2[0])
    return words, dist2


def soft_demap_exact(y, c: LabeledConstellation, sigma2: float) -> np.ndarray:
    """Exact per-bit LLRs with a uniform prior.

    ``LLR_i = log sum_{b_i(x)=0} exp(-|y-x|^2 / 2 sigma2) - log sum_{b_i(x)=1} ...``
    """
    return _soft_demap(y, c, sigma2, exact_llrs)


def soft_demap_maxlog(y, c: LabeledConstellation, sigma2: float) -> np.ndarray:
    """Max-log LLRs: the log-sum-exp of the exact demapper replaced by a max."""
    return _soft_demap(y, c, sigma2, maxlog_llrs)


def _soft_demap(y, c, sigma2, from_metrics):
    _check_sigma2(sigma2)
    y, single = _as_2d(y)
    out = np.empty((len(y), N_BITS))
    for s in range(0, len(y), _CHUNK):
        out[s : s + _CHUNK] = from_metrics(log_metrics(y[s : s + _CHUNK], c, sigma2), c)
    return out[0] if single else out


def log_metrics(y: np.ndarray, c: LabeledConstellation, sigma2: float) -> np.ndarray:
    """Log-likelihoods ``-|y - x|^2 / (2 sigma2)`` up to a constant, shape (n, 4096)."""
    return -pairwise_sq_distances(y, c.points) / (2.0 * sigma2)


def exact_llrs(m: np.ndarray, c: LabeledConstellation) -> np.ndarray:
    """Exact LLRs from a metric matrix.

    Both bit-conditional sums come from one matrix product of shifted
    exponentials; rows where a sum underflows fall back to log-sum-exp.
    """
    bits = c.bits.astype(float)
    e = np.exp(m - m.max(axis=1, keepdims=True))
    s1 = e @ bits
    s0 = e @ (1.0 - bits)
    with np.errstate(divide="ignore"):
        llr = np.log(s0) - np.log(s1)
    for r in np.where(np.minimum(s0, s1).min(axis=1) < 1e-200)[0]:
        b = c.bits.astype(bool)
        llr[r] = [logsumexp(m[r, ~b[:, i]]) - logsumexp(m[r, b[:, i]]) for i in range(N_BITS)]
    return llr


def maxlog_llrs(m: np.ndarray, c: LabeledConstellation) -> np.ndarray:
    n = len(m)
    out = np.empty((n, N_BITS))
    for i in range(N_BITS):
        # rows are in label order, so bit i splits the index into (2^i, 2, 2^(11-i))
        v = m.reshape(n, 1 << i, 2, 1 << (N_BITS - 1 - i)).max(axis=(1, 3))
        out[:, i] = v[:, 0] - v[:, 1]
    return out


def _check_sigma2(sigma2):
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")


def soft_demap(y, c, sigma2, demapper: str = "exact"):
    if demapper == "exact":
        return soft_demap_exact(y, c, sigma2)
    if demapper == "maxlog":
        return soft_demap_maxlog(y, c, sigma2)
    raise ValueError(f"unknown demapper {demapper!r}")


def llrs_to_csv(words, llrs, path=None) -> str:
    """LLR dump: label then 12 LLR columns."""
    header = "label," + ",".join(f"llr{i}" for i in range(N_BITS))
    lines = [header]
    for w, row in zip(np.asarray(words), np.atleast_2d(llrs)):
        lines.append(f"{int(w):03x}," + ",".join(repr(float(v)) for v in row))
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text

