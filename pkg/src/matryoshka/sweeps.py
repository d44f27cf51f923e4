"""Seeded experiment sweeps producing tidy CSV reports.

Seed discipline: the work item at grid index ``i`` (and, where present, launch
power index ``j``) draws from ``child_rng(seed, SWEEP_ID, i, j)``.  Both schemes
at one grid point share that stream, so scheme comparisons are paired.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import channel, dsp, metrics, modem
from .config import child_rng, dump_config
from .constellation import CouplingRule, LabeledConstellation, RingGeometry, Scheme, build

SWEEP_IDS = {"ber": 1, "mi": 2, "power": 3, "dsp": 4}
COLUMNS = ["scheme", "sweep", "x", "distance_km", "launch_power_dbm", "metric", "value", "ci95", "n_samples", "seed"]


@dataclass
class SweepSpec:
    kind: str
    schemes: list[str]
    variable: str  # snr_db | distance_km | launch_power_dbm
    grid: list[float]
    n_symbols: int
    seed: int
    link: channel.LinkModel = field(default_factory=channel.LinkModel)
    geometry: RingGeometry = field(default_factory=RingGeometry)
    rule: CouplingRule = CouplingRule.GLOBAL_RING_GLOBAL_PARITY
    options: dict = field(default_factory=dict)
    workers: int = 1
    config: dict | None = None

    def __post_init__(self):
        if not self.grid:
            raise ValueError("sweep grid must not be empty")
        if self.n_symbols < 1000:
            raise ValueError("n_symbols must be at least 1000")

    def constellation(self, scheme) -> LabeledConstellation:
        return build(scheme, self.geometry, self.rule)


@dataclass
class SweepReport:
    kind: str
    rows: list[dict]
    header: list[str] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def select(self, metric=None, scheme=None, **eq):
        out = []
        for r in self.rows:
            if metric is not None and r["metric"] != metric:
                continue
            if scheme is not None and r["scheme"] != scheme:
                continue
            if any(r.get(k) != v for k, v in eq.items()):
                continue
            out.append(r)
        return out

    def series(self, metric, scheme, **eq):
        rows = sorted(self.select(metric, scheme, **eq), key=lambda r: r["x"])
        return (
            np.array([r["x"] for r in rows]),
            np.array([r["value"] for r in rows]),
            np.array([r["ci95"] for r in rows]),
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\n")
        writer = csv.DictWriter(buf, COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: _fmt(r.get(k)) for k in COLUMNS})
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _row(scheme, spec, x, metric, est=None, value=None, ci=0.0, n=0, key=(), distance=None, power=None):
    if est is not None:
        value, ci, n = est.value, est.ci_halfwidth_95, est.n_samples
    return {
        "scheme": scheme,
        "sweep": spec.kind,
        "x": float(x),
        "distance_km": None if distance is None else float(distance),
        "launch_power_dbm": None if power is None else float(power),
        "metric": metric,
        "value": float(value),
        "ci95": float(ci),
        "n_samples": int(n),
        "seed": f"{spec.seed}/" + "/".join(str(k) for k in key),
    }


def _header(spec: SweepSpec) -> list[str]:
    lines = [f"matryoshka {spec.kind} sweep", "snr convention: SNR = E|x|^2 / E|n|^2 over 12 real dims = 1/(12 sigma2)"]
    if spec.config is not None:
        lines += ["effective config:"] + ["  " + ln for ln in dump_config(spec.config).splitlines() if ln]
    return lines


def _run(spec: SweepSpec, point_fn, items) -> list[list[dict]]:
    if spec.workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            return list(pool.map(point_fn, [spec] * len(items), items))
    return [point_fn(spec, item) for item in items]


def _bit_errors(c, words, noise, sigma2) -> int:
    rx = c.points[words] + np.sqrt(sigma2) * noise
    decided, _ = modem.hard_demap(rx, c)
    return int(np.count_nonzero(c.bits[words] != c.bits[decided]))


def _ber_point(spec: SweepSpec, item) -> list[dict]:
    i, snr_db = item
    key = (SWEEP_IDS["ber"], i)
    rng = child_rng(spec.seed, *key)
    chunk = 200_000
    errs = {s: 0 for s in spec.schemes}
    nbits = 0
    consts = {s: spec.constellation(s) for s in spec.schemes}
    sigma2 = float(modem.snr_to_sigma2(snr_db))
    left = spec.n_symbols
    while left > 0:
        m = min(chunk, left)
        words = modem.random_words(rng, m)
        noise = rng.standard_normal((m, 6)) + 1j * rng.standard_normal((m, 6))
        for s, c in consts.items():
            errs[s] += _bit_errors(c, words, noise, sigma2)
        nbits += m * 12
        left -= m
    rows = []
    for s in spec.schemes:
        k = errs[s]
        rows.append(_row(s, spec, snr_db, "ber", value=k / nbits, ci=metrics.wilson_halfwidth(k, nbits), n=nbits, key=key))
    if Scheme.PDM_QPSK_12D.value in spec.schemes and np.isfinite(snr_db):
        rows.append(_row("pdm-qpsk", spec, snr_db, "ber_theory", value=float(metrics.qpsk_ber_theory(snr_db)), n=nbits, key=key))
    return rows


def run_ber_sweep(spec: SweepSpec) -> SweepReport:
    """BER vs SNR (dB) for each scheme over AWGN with ML hard decisions."""
    items = list(enumerate(spec.grid))
    rows = [r for part in _run(spec, _ber_point, items) for r in part]
    return SweepReport("ber", rows, _header(spec))


def ber_crossover(report: SweepReport, a="matryoshka", b="pdm-qpsk"):
    """Last SNR where scheme ``a`` overtakes ``b``, by log-linear interpolation.

    Returns ``(snr_db, ber)`` or ``None`` if ``a`` is never better at the top
    of the grid.  Above the returned SNR, ``a`` is better at every grid point.
    """
    x, ya, _ = report.series("ber", a)
    _, yb, _ = report.series("ber", b)
    ok = (ya > 0) & (yb > 0)
    x, ya, yb = x[ok], ya[ok], yb[ok]
    diff = np.log(ya) - np.log(yb)
    if len(diff) == 0 or diff[-1] >= 0:
        return None
    worse = np.where(diff >= 0)[0]
    if len(worse) == 0:
        return float(x[0]), float(yb[0])
    i = worse[-1]
    t = diff[i] / (diff[i] - diff[i + 1])
    snr = x[i] + t * (x[i + 1] - x[i])
    ber_x = np.exp(np.log(yb[i]) + t * (np.log(yb[i + 1]) - np.log(yb[i])))
    return float(snr), float(ber_x)


def _mi_point(spec: SweepSpec, item) -> list[dict]:
    (i, dist), (j, power) = item
    key = (SWEEP_IDS["mi"], i, j)
    link = spec.link.with_distance(dist).with_power(power)
    snr, d_km = channel.snr_at_distance(link)
    sigma2 = 1.0 / (12.0 * snr)
    demapper = spec.options.get("demapper", "exact")
    rows = []
    for s in spec.schemes:
        c = spec.constellation(s)
        mi, gmi = metrics.mi_gmi_mc(c, sigma2, spec.n_symbols, child_rng(spec.seed, *key), demapper)
        kw = dict(key=key, distance=d_km, power=power)
        rows.append(_row(s, spec, d_km, "mi", mi, **kw))
        rows.append(_row(s, spec, d_km, "gmi", gmi, **kw))
        rows.append(_row(s, spec, d_km, "snr_db", value=10 * np.log10(snr), n=1, **kw))
    return rows


def run_mi_distance_sweep(spec: SweepSpec) -> SweepReport:
    """MI and GMI vs distance at each launch power, from the linear link budget."""
    powers = spec.options.get("launch_power_dbm", [spec.link.launch_power_dbm_per_channel])
    items = [(a, b) for a in enumerate(spec.grid) for b in enumerate(powers)]
    rows = [r for part in _run(spec, _mi_point, items) for r in part]
    return SweepReport("mi", rows, _header(spec))


def distance_at(report: SweepReport, scheme: str, power: float, target: float = 11.0, metric: str = "mi"):
    """Distance where ``metric`` first drops below ``target`` (linear interpolation)."""
    x, y, _ = report.series(metric, scheme, launch_power_dbm=float(power))
    below = np.where(y < target)[0]
    if len(below) == 0:
        return float("inf")
    i = below[0]
    if i == 0:
        return float(x[0])
    t = (y[i - 1] - target) / (y[i - 1] - y[i])
    return float(x[i - 1] + t * (x[i] - x[i - 1]))


def _power_point(spec: SweepSpec, item) -> list[dict]:
    (i, power), (j, dist) = item
    key = (SWEEP_IDS["power"], i, j)
    link = spec.link.with_distance(dist).with_power(power)
    snr, d_km = channel.snr_at_distance(link)
    sigma2 = 1.0 / (12.0 * snr)
    rng = child_rng(spec.seed, *key)
    words = modem.random_words(rng, spec.n_symbols)
    noise = rng.standard_normal((spec.n_symbols, 6)) + 1j * rng.standard_normal((spec.n_symbols, 6))
    rows = []
    for s in spec.schemes:
        c = spec.constellation(s)
        rx = c.points[words] + np.sqrt(sigma2) * noise
        est = metrics.effective_snr(rx, c, words)
        db, ci_db = metrics.snr_db_estimate(est)
        kw = dict(key=key, distance=d_km, power=power)
        rows.append(_row(s, spec, power, "snr_eff_db", value=db, ci=ci_db, n=est.n_samples, **kw))
        rows.append(_row(s, spec, power, "snr_link_db", value=10 * np.log10(snr), n=1, **kw))
    return rows


def run_power_sweep(spec: SweepSpec) -> SweepReport:
    """Effective SNR vs launch power at fixed distances.

    With ``options["calibrate_nli"]`` the NLI coefficient is set so that the
    link SNR peaks at ``options["optimum_dbm"]``.
    """
    if spec.options.get("calibrate_nli", False):
        eta = channel.calibrate_nli(spec.link, spec.options.get("optimum_dbm", 4.0))
        spec = replace(spec, link=replace(spec.link, nli_coeff=eta))
    distances = spec.options.get("distance_km", [spec.link.distance_km])
    items = [(a, b) for a in enumerate(spec.grid) for b in enumerate(distances)]
    rows = [r for part in _run(spec, _power_point, items) for r in part]
    report = SweepReport("power", rows, _header(spec) + [f"nli_coeff = {spec.link.nli_coeff!r} 1/mW^2"])
    report.flags["nli_coeff"] = spec.link.nli_coeff
    return report


def power_argmax(report: SweepReport, scheme: str, distance_km: float, metric: str = "snr_eff_db") -> float:
    x, y, _ = report.series(metric, scheme, distance_km=float(distance_km))
    return float(x[int(np.argmax(y))])


def _dsp_point(spec: SweepSpec, item) -> list[dict]:
    i, snr_db = item
    key = (SWEEP_IDS["dsp"], i)
    o = spec.options
    n_pilots = int(o.get("n_pilots", 1000))
    link = replace(
        spec.link,
        n_spans=int(o.get("n_spans", 1)),
        mdl_db=float(o.get("mdl_db", 0.0)),
        coupling=bool(o.get("coupling", True)),
        phase_noise_var=float(o.get("phase_noise_var", 0.0)),
    )
    rows = []
    for s in spec.schemes:
        c = spec.constellation(s)
        rng = child_rng(spec.seed, *key)
        res = run_dsp_chain(c, link, snr_db, spec.n_symbols, rng, n_pilots=n_pilots, n_taps=int(o.get("n_taps", 1)),
                            step_size=float(o.get("step_size", 0.03)), phase_window=int(o.get("phase_window", 64)))
        kw = dict(key=key)
        n = res["n"]
        for name in ("snr_eff_pre_db", "snr_eff_post_db", "snr_eff_awgn_db"):
            v, ci = res[name]
            rows.append(_row(s, spec, snr_db, name, value=v, ci=ci, n=n, **kw))
        for name in ("mi_post", "mi_awgn", "ber_post"):
            rows.append(_row(s, spec, snr_db, name, res[name], **kw))
        rows.append(_row(s, spec, snr_db, "converged", value=float(res["converged"]), n=n, **kw))
        rows.append(_row(s, spec, snr_db, "cycle_slips", value=float(res["cycle_slips"]), n=n, **kw))
    return rows


def run_dsp_chain(c, link, snr_db, n_symbols, rng, n_pilots=1000, n_taps=1, step_size=0.03, phase_window=64) -> dict:
    """transmit -> equalize -> phase recovery -> metrics, plus an AWGN-only baseline.

    Post-DSP MI uses the Gaussian likelihood with the variance implied by the
    measured effective SNR, so it is a mismatched (lower-bound) estimate.
    """
    words = modem.random_words(rng, n_symbols)
    x = c.points[words]
    tx = channel.transmit(x, link, rng, snr_db=snr_db)
    pre = metrics.effective_snr(tx.rx, c, words)
    state = dsp.EqualizerState.identity(n_taps, step_size)
    eq = dsp.equalize(tx.rx, state, c, ref=x[:n_pilots])
    truth = words[eq.start :]
    pr = dsp.phase_recover(eq.out, c, window=phase_window)
    post = metrics.effective_snr(pr.out, c, truth)
    sigma2_post = 1.0 / (12.0 * post.value)
    mi_post, _ = metrics.information_samples(pr.out, truth, c, sigma2_post, demapper=None)
    decided, _ = modem.hard_demap(pr.out, c)
    sigma2 = float(modem.snr_to_sigma2(snr_db))
    base_rx = channel.awgn(x[eq.start :], sigma2, rng)
    base = metrics.effective_snr(base_rx, c, truth)
    mi_base, _ = metrics.information_samples(base_rx, truth, c, sigma2, demapper=None)
    return {
        "n": len(truth),
        "snr_eff_pre_db": metrics.snr_db_estimate(pre),
        "snr_eff_post_db": metrics.snr_db_estimate(post),
        "snr_eff_awgn_db": metrics.snr_db_estimate(base),
        "mi_post": metrics.batch_means(mi_post),
        "mi_awgn": metrics.batch_means(mi_base),
        "ber_post": metrics.ber_words(truth, decided),
        "converged": eq.converged,
        "cycle_slips": pr.cycle_slips,
    }


def run_dsp_demo(spec: SweepSpec) -> SweepReport:
    items = list(enumerate(spec.grid))
    rows = [r for part in _run(spec, _dsp_point, items) for r in part]
    report = SweepReport("dsp", rows, _header(spec) + ["post-DSP MI is a mismatched-likelihood lower bound"])
    report.flags["converged"] = all(r["value"] == 1.0 for r in report.select("converged"))
    return report
