"""Receiver DSP: symbol-rate 6x6 MIMO equalization and per-mode phase recovery."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import modem
from .constellation import LabeledConstellation

N_DIM = 6


class EqMode(str, enum.Enum):
    DATA_AIDED = "data-aided"
    DECISION_DIRECTED = "decision-directed"


@dataclass
class EqualizerState:
    """Taps ``W[l]`` of a 6x6 FIR filter: ``z_t = sum_l W[l] y[t + c - l]`` with c = (L-1)//2."""

    taps: np.ndarray
    step_size: float = 0.03
    mode: EqMode = EqMode.DATA_AIDED

    def __post_init__(self):
        self.taps = np.array(self.taps, dtype=complex)
        if self.taps.ndim == 2:
            self.taps = self.taps[None]
        if self.taps.ndim != 3 or self.taps.shape[1:] != (N_DIM, N_DIM) or len(self.taps) < 1:
            raise ValueError("taps must have shape (n_taps, 6, 6) with n_taps >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        self.mode = EqMode(self.mode)

    @property
    def n_taps(self) -> int:
        return len(self.taps)

    @property
    def center(self) -> int:
        return (self.n_taps - 1) // 2

    @classmethod
    def identity(cls, n_taps: int = 1, step_size: float = 0.03, mode=EqMode.DATA_AIDED):
        if n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        taps = np.zeros((n_taps, N_DIM, N_DIM), dtype=complex)
        taps[(n_taps - 1) // 2] = np.eye(N_DIM)
        return cls(taps, step_size, mode)

    def apply(self, rx: np.ndarray) -> np.ndarray:
        """Filter a whole stream with the current (frozen) taps."""
        rx = np.asarray(rx, dtype=complex)
        out = np.zeros_like(rx)
        n = len(rx)
        for l in range(self.n_taps):
            shift = self.center - l
            lo, hi = max(0, -shift), min(n, n - shift)
            out[lo:hi] += rx[lo + shift : hi + shift] @ self.taps[l].T
        return out


class EqualizerResult(NamedTuple):
    out: np.ndarray  # equalized stream without the convergence prefix
    state: EqualizerState
    mse: np.ndarray  # per-symbol squared error |d - z|^2 over the whole stream
    converged: bool
    start: int  # index of out[0] in the input stream


def equalize(
    rx,
    state: EqualizerState,
    constellation: LabeledConstellation,
    ref=None,
    convergence_window: int | None = None,
    decision_block: int = 32,
    mse_threshold: float = 0.25,
) -> EqualizerResult:
    """Adapt a MIMO equalizer with normalized LMS, one update per symbol.

    In data-aided mode the known symbols ``ref`` (a prefix of the stream)
    are the targets; afterwards, and throughout in decision-directed mode,
    the target is the nearest 12D constellation point.  Decisions are made
    in blocks of ``decision_block`` symbols with the taps at block start.

    The first ``convergence_window`` outputs (default: the pilot length) are
    dropped.  ``converged`` is false when the mean squared error over the
    last ``convergence_window`` symbols (at least 100) exceeds
    ``mse_threshold`` times the mean symbol energy.
    """
    rx = np.asarray(rx, dtype=complex)
    n = len(rx)
    ref = np.zeros((0, N_DIM), dtype=complex) if ref is None else np.asarray(ref, dtype=complex)
    n_ref = len(ref) if state.mode is EqMode.DATA_AIDED else 0
    prefix = n_ref if convergence_window is None else convergence_window
    if n <= prefix:
        raise ValueError("stream shorter than the convergence window")
    taps = state.taps.copy()
    n_taps, c = len(taps), state.center
    mu = state.step_size
    pad = np.concatenate(
        [np.zeros((n_taps - 1 - c, N_DIM), complex), rx, np.zeros((c, N_DIM), complex)]
    )
    out = np.empty_like(rx)
    mse = np.empty(n)
    decisions = None
    block_start = -1
    # flattened taps: w[i, l*6 + j] = W[l][i, j]
    w = np.ascontiguousarray(taps.transpose(1, 0, 2).reshape(N_DIM, n_taps * N_DIM))
    for t in range(n):
        win = pad[t : t + n_taps][::-1].ravel()  # win[l] = y[t + c - l]
        z = w @ win
        if t < n_ref:
            target = ref[t]
        else:
            if t >= block_start + decision_block or decisions is None:
                block_start = t
                cur = w.reshape(N_DIM, n_taps, N_DIM).transpose(1, 0, 2)
                blk = _filter_block(cur, pad, t, min(n, t + decision_block), n_taps)
                words, _ = modem.hard_demap(blk, constellation)
                decisions = constellation.points[words]
            target = decisions[t - block_start]
        e = target - z
        wc = win.conj()
        w += np.outer(e * (mu / ((wc @ win).real + 1e-12)), wc)
        out[t] = z
        mse[t] = (e.conj() @ e).real
    taps = w.reshape(N_DIM, n_taps, N_DIM).transpose(1, 0, 2).copy()
    energy = float(np.mean(constellation.energies()))
    tail = max(100, prefix)
    converged = bool(np.mean(mse[-tail:]) <= mse_threshold * energy)
    new_state = EqualizerState(taps, state.step_size, state.mode)
    return EqualizerResult(out[prefix:], new_state, mse, converged, prefix)


def _filter_block(taps, pad, start, stop, n_taps):
    idx = np.arange(start, stop)[:, None] + np.arange(n_taps)[None, ::-1]
    return np.einsum("lij,tlj->ti", taps, pad[idx])


def equalizer_diagnostics_csv(result: EqualizerResult, every: int = 100) -> str:
    """MSE trace (block averaged) and final per-tap Frobenius norms."""
    lines = ["kind,index,value"]
    mse = result.mse
    for s in range(0, len(mse), every):
        lines.append(f"mse,{s},{float(np.mean(mse[s:s + every]))!r}")
    for l, w in enumerate(result.state.taps):
        lines.append(f"tap_norm,{l},{float(np.linalg.norm(w))!r}")
    return "\n".join(lines) + "\n"


def residual_isi_db(taps: np.ndarray, channel_taps: np.ndarray) -> float:
    """Residual ISI of equalizer after FIR channel, in dB.

    ``channel_taps[k]`` maps x[t-k] into y[t]; the combined response is the
    convolution of both filters.  ISI = off-peak energy / peak-tap energy.
    """
    taps = np.asarray(taps)
    h = np.asarray(channel_taps)
    n_comb = len(taps) + len(h) - 1
    comb = np.zeros((n_comb, N_DIM, N_DIM), complex)
    for l, w in enumerate(taps):
        for k, hk in enumerate(h):
            comb[l + k] += w @ hk
    energy = np.array([np.linalg.norm(m) ** 2 for m in comb])
    peak = int(np.argmax(energy))
    return float(10 * np.log10((energy.sum() - energy[peak]) / energy[peak]))


def least_squares_taps(rx, tx, n_taps: int) -> np.ndarray:
    """Block least-squares MIMO FIR equalizer for known data (the LMS oracle)."""
    rx = np.asarray(rx, complex)
    tx = np.asarray(tx, complex)
    n = len(rx)
    c = (n_taps - 1) // 2
    pad = np.concatenate([np.zeros((n_taps - 1 - c, N_DIM), complex), rx, np.zeros((c, N_DIM), complex)])
    idx = np.arange(n)[:, None] + np.arange(n_taps)[None, ::-1]
    a = pad[idx].reshape(n, n_taps * N_DIM)
    sol, *_ = np.linalg.lstsq(a, tx, rcond=None)
    return sol.T.reshape(N_DIM, n_taps, N_DIM).transpose(1, 0, 2)


def fir_channel(x, channel_taps) -> np.ndarray:
    """y[t] = sum_k H[k] x[t-k]."""
    x = np.asarray(x, complex)
    y = np.zeros_like(x)
    for k, hk in enumerate(channel_taps):
        y[k:] += x[: len(x) - k] @ np.asarray(hk).T
    return y


class PhaseRecoveryResult(NamedTuple):
    out: np.ndarray
    phase: np.ndarray  # (n, 3) estimated common phase per spatial mode
    cycle_slips: int


def _moving_mean(s: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average that only uses samples inside the stream."""
    ones = uniform_filter1d(np.ones(len(s)), window, mode="constant")
    re = uniform_filter1d(s.real, window, mode="constant")
    im = uniform_filter1d(s.imag, window, mode="constant")
    return (re + 1j * im) / ones


def _fourth_moment(c: LabeledConstellation) -> np.ndarray:
    return np.mean(c.points**4, axis=0)


def phase_recover(
    rx,
    constellation: LabeledConstellation,
    window: int = 64,
    pilots=None,
    refine: bool = True,
) -> PhaseRecoveryResult:
    """Estimate and remove a slowly varying common phase on each spatial mode.

    A fourth-power estimate (weighted by the constellation's own fourth
    moment, so it is unbiased for the dual-ring format) is averaged over a
    sliding ``window`` and unwrapped with period pi/2.  The pi/2 ambiguity
    is resolved on ``pilots`` (known leading symbols) when given.  With
    ``refine``, a decision-directed pass on 12D decisions removes what is
    left.  Jumps of more than pi/8 between consecutive estimates are
    counted as suspected cycle slips.
    """
    rx = np.asarray(rx, dtype=complex)
    n = len(rx)
    if window < 4 or window > n:
        raise ValueError(f"window must be in [4, {n}], got {window}")
    m4 = _fourth_moment(constellation)
    theta = np.empty((n, 3))
    slips = 0
    for m in range(3):
        cols = [2 * m, 2 * m + 1]
        s = np.sum(rx[:, cols] ** 4 * np.conj(m4[cols]), axis=1)
        s = _moving_mean(s, window)
        th = np.unwrap(np.angle(s)) / 4
        slips += int(np.count_nonzero(np.abs(np.diff(th)) > np.pi / 8))
        theta[:, m] = th
    if pilots is not None:
        pilots = np.asarray(pilots, dtype=complex)
        k = len(pilots)
        for m in range(3):
            cols = [2 * m, 2 * m + 1]
            cand = [
                np.sum(np.abs(rx[:k, cols] * np.exp(-1j * (theta[:k, m, None] + q * np.pi / 2)) - pilots[:, cols]) ** 2)
                for q in range(4)
            ]
            theta[:, m] += int(np.argmin(cand)) * np.pi / 2
    out = rx * np.exp(-1j * np.repeat(theta, 2, axis=1))
    if refine:
        words, _ = modem.hard_demap(out, constellation)
        d = constellation.points[words]
        for m in range(3):
            cols = [2 * m, 2 * m + 1]
            s = np.sum(out[:, cols] * np.conj(d[:, cols]), axis=1)
            theta[:, m] += np.angle(_moving_mean(s, window))
        out = rx * np.exp(-1j * np.repeat(theta, 2, axis=1))
    return PhaseRecoveryResult(out, theta, slips)
