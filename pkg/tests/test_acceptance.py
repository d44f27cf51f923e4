"""Acceptance criteria, one test each.

Every test prints ``ACCEPTANCE <n> PASS|FAIL <title>: <measured values>`` and
the full list is repeated in the pytest terminal summary.  Run alone with
``pytest tests/test_acceptance.py -v`` (about 10 minutes on one core).
"""

import time

import mpmath
import numpy as np
import pytest

from matryoshka import channel, cli, dsp, metrics, modem, sweeps
from matryoshka import constellation as C
from matryoshka.config import child_rng
from oracles import exhaustive_decide, llrs_mp

RESULTS: dict[int, str] = {}
SEED = 20240901


def record(num: int, title: str, ok: bool, detail: str):
    line = f"ACCEPTANCE {num} {'PASS' if ok else 'FAIL'} {title}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def both_specs(kind, variable, grid, n, **options):
    return sweeps.SweepSpec(kind, ["matryoshka", "pdm-qpsk"], variable, list(grid), n, SEED, options=options)


def test_1_constellation():
    t = time.perf_counter()
    c = C.build_matryoshka()
    labels_ok = np.array_equal(np.sort(c.labels), np.arange(4096))
    distinct = len(np.unique(np.round(c.real_points, 12), axis=0)) == 4096
    e_spread = float(np.ptp(c.energies()))
    b_spread = float(np.ptp(c.block_energies()))
    proj_ok = True
    for k in range(6):
        z = np.array([p for p, _ in C.projection_2d(c, k)])
        r = np.abs(z)
        inner, outer = z[r < r.mean()], z[r > r.mean()]
        offs = np.sort(np.mod(np.angle(outer[:, None] / inner[None, :]), np.pi / 2).ravel())
        proj_ok &= len(z) == 8 and len(inner) == 4 and np.allclose(offs[::4], 0.15, atol=1e-12)
    elapsed = time.perf_counter() - t
    ok = labels_ok and distinct and e_spread < 1e-12 and b_spread < 1e-12 and proj_ok and elapsed < 1.0
    record(1, "constellation", ok,
           f"4096 labels={labels_ok} distinct={distinct} energy spread={e_spread:.1e} "
           f"block spread={b_spread:.1e} 8-point projections/0.15 rad={proj_ok} time={elapsed:.3f}s")


def test_2_qpsk_ber_oracle():
    t = time.perf_counter()
    grid = [2.0, 4.0, 6.0, 8.0, 10.0, 11.5]
    spec = sweeps.SweepSpec("ber", ["pdm-qpsk"], "snr_db", grid, 1_000_000, SEED)
    rep = sweeps.run_ber_sweep(spec)
    x, y, _ = rep.series("ber", "pdm-qpsk")
    n_bits = rep.select("ber")[0]["n_samples"]
    p = metrics.qpsk_ber_theory(x)
    z = (y - p) / np.sqrt(p * (1 - p) / n_bits)
    elapsed = time.perf_counter() - t
    ok = bool(np.all(np.abs(z) <= 3)) and p.max() >= 1e-1 * 0.5 and p.min() <= 1e-4 * 2 and elapsed <= 120
    record(2, "QPSK BER vs Q-function", ok,
           f"theory {p.max():.2e}..{p.min():.2e}, |z| max={np.abs(z).max():.2f} (<=3), "
           f"{n_bits // 12} symbols/point, time={elapsed:.0f}s")


def test_3_ber_crossover():
    t = time.perf_counter()
    grid = np.round(np.arange(5.0, 10.01, 0.5), 2)
    rep = sweeps.run_ber_sweep(both_specs("ber", "snr_db", grid, 1_000_000))
    cross = sweeps.ber_crossover(rep)
    elapsed = time.perf_counter() - t
    if cross is None:
        record(3, "BER crossover", False, "Matryoshka never better at the top of the grid")
    snr, ber = cross
    x, ym, _ = rep.series("ber", "matryoshka")
    _, yq, _ = rep.series("ber", "pdm-qpsk")
    above = x > snr
    better = bool(np.all(ym[above] < yq[above]))
    ok = 6.3 <= snr <= 8.3 and 5e-3 <= ber <= 2e-2 and better and elapsed <= 600
    record(3, "BER crossover", ok,
           f"crossover {snr:.2f} dB (6.3..8.3) at BER {ber:.2e} (5e-3..2e-2), "
           f"better at all {int(above.sum())} grid points above={better}, time={elapsed:.0f}s")


def test_4_information_metrics():
    t = time.perf_counter()
    grid = [-2.0, 2.0, 6.0, 10.0, 14.0, 20.0]
    bounds_ok = True
    worst_qpsk = 0.0
    high = {}
    for i, snr_db in enumerate(grid):
        s2 = float(modem.snr_to_sigma2(snr_db))
        for name in ("matryoshka", "pdm-qpsk"):
            c = C.build(name)
            mi, gmi = metrics.mi_gmi_mc(c, s2, 100_000, child_rng(SEED, 5, i))
            tol = mi.ci_halfwidth_95 + gmi.ci_halfwidth_95
            bounds_ok &= -gmi.ci_halfwidth_95 <= gmi.value <= mi.value + tol and mi.value <= 12 + mi.ci_halfwidth_95
            if name == "pdm-qpsk":
                worst_qpsk = max(worst_qpsk, abs(mi.value - 6 * metrics.qpsk_mi_2d(s2)))
            if snr_db == grid[-1]:
                high[name] = mi.value
    elapsed = time.perf_counter() - t
    ok = bounds_ok and min(high.values()) > 12 - 1e-3 and worst_qpsk <= 0.03 and elapsed <= 300
    record(4, "MI/GMI", ok,
           f"0<=GMI<=MI<=12 on {len(grid)} points={bounds_ok}, MI at 20 dB "
           + ", ".join(f"{k}={v:.5f}" for k, v in high.items())
           + f", |MI_qpsk - 6 MI_2D| max={worst_qpsk:.4f} (<=0.03), time={elapsed:.0f}s")


def test_5_distance_sweep():
    grid = [6900.0, 9200.0, 11500.0, 13800.0, 16100.0, 18400.0, 20700.0]
    spec = both_specs("mi", "distance_km", grid, 100_000, launch_power_dbm=[0.0], demapper="exact")
    assert spec.link.nli_coeff == 0.0 and spec.link.amp_noise_figure_db == 5.0
    rep = sweeps.run_mi_distance_sweep(spec)
    d_m = sweeps.distance_at(rep, "matryoshka", 0.0)
    d_q = sweeps.distance_at(rep, "pdm-qpsk", 0.0)
    ok = np.isfinite(d_q) and d_m >= d_q
    record(5, "MI=11 reach", ok, f"matryoshka {d_m:.0f} km >= pdm-qpsk {d_q:.0f} km ({100 * (d_m / d_q - 1):+.1f}%)")


def test_6_power_sweep():
    powers = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0, 8.0, 10.0]
    spec = both_specs("power", "launch_power_dbm", powers, 100_000,
                      calibrate_nli=True, optimum_dbm=4.0, distance_km=[1200.0, 2400.0, 4800.0])
    rep = sweeps.run_power_sweep(spec)
    details, ok = [], True
    for d in sorted({r["distance_km"] for r in rep.rows}):
        for s in spec.schemes:
            x, y, _ = rep.series("snr_eff_db", s, distance_km=d)
            k = int(np.argmax(y))
            unimodal = bool(np.all(np.diff(y[: k + 1]) > 0) and np.all(np.diff(y[k:]) < 0))
            ok &= unimodal and abs(x[k] - 4.0) <= 0.5
            details.append(f"{s}@{d:.0f}km argmax {x[k]:+.1f} dBm unimodal={unimodal}")
        _, ym, cm = rep.series("snr_eff_db", "matryoshka", distance_km=d)
        _, yq, cq = rep.series("snr_eff_db", "pdm-qpsk", distance_km=d)
        agree = bool(np.all(np.abs(ym - yq) <= cm + cq))
        ok &= agree
        details.append(f"CIs overlap@{d:.0f}km={agree}")
    record(6, "power sweep", ok, "; ".join(details))


def test_7_dsp_recovery():
    spec = both_specs("dsp", "snr_db", [15.0], 100_000, n_pilots=1000, n_taps=1, step_size=0.03)
    rep = sweeps.run_dsp_demo(spec)
    gaps = {}
    for s in spec.schemes:
        post = rep.select("snr_eff_post_db", s)[0]["value"]
        base = rep.select("snr_eff_awgn_db", s)[0]["value"]
        gaps[s] = base - post
    errors = {}
    for s in spec.schemes:
        c = C.build(s)
        rng = child_rng(SEED, 7)
        w = modem.random_words(rng, 100_000)
        x = c.points[w]
        tx = channel.transmit(x, channel.LinkModel(coupling=False), rng, add_noise=False)
        eq = dsp.equalize(tx.rx, dsp.EqualizerState.identity(), c, ref=x[:1000], convergence_window=0)
        decided, _ = modem.hard_demap(eq.out, c)
        errors[s] = int(np.count_nonzero(c.bits[decided] != c.bits[w]))
    ok = rep.flags["converged"] and all(abs(g) <= 0.5 for g in gaps.values()) and not any(errors.values())
    record(7, "DSP recovery", ok,
           "Haar 15 dB gap to AWGN " + ", ".join(f"{k}={v:.3f} dB" for k, v in gaps.items())
           + "; identity noiseless bit errors over 1e5 " + ", ".join(f"{k}={v}" for k, v in errors.items()))


def test_8_demapper_oracles():
    hard = {}
    for i, s in enumerate(["matryoshka", "pdm-qpsk"]):
        c = C.build(s)
        rng = child_rng(SEED, 8, i)
        w = modem.random_words(rng, 10_000)
        sigma = np.sqrt(modem.snr_to_sigma2(rng.uniform(3.0, 12.0, size=(10_000, 1))))
        y = c.points[w] + sigma * (rng.standard_normal((10_000, 6)) + 1j * rng.standard_normal((10_000, 6)))
        got, _ = modem.hard_demap(y, c)
        hard[s] = float(np.mean(got == exhaustive_decide(y, c.points)))
    rng = child_rng(SEED, 8, 9)
    worst = 0.0
    consts = [C.build("matryoshka"), C.build("pdm-qpsk")]
    for k in range(1000):
        c = consts[k % 2]
        s2 = 10 ** rng.uniform(-2.8, -0.6)
        y = channel.awgn(c.points[rng.integers(4096)], s2, rng)
        ref = llrs_mp(y, c.points, s2)
        got = modem.soft_demap_exact(y, c, s2)
        for a, b in zip(got, ref):
            worst = max(worst, float(abs(mpmath.mpf(float(a)) - b) / abs(b)))
    ok = all(v == 1.0 for v in hard.values()) and worst <= 1e-9
    record(8, "demapper oracles", ok,
           "hard agreement on 1e4 " + ", ".join(f"{k}={100 * v:.2f}%" for k, v in hard.items())
           + f"; exact LLR max rel error over 1000 cases={worst:.2e} (<=1e-9)")


SMALL = """seed = 77
[ber]
snr_db = [6.0, 8.0]
n_symbols = 5000
[mi]
distance_km = [2300.0, 9200.0]
launch_power_dbm = [0.0]
n_symbols = 2000
[power]
launch_power_dbm = [2.0, 4.0]
distance_km = [2400.0]
n_symbols = 5000
[dsp]
n_symbols = 4000
n_pilots = 500
"""


def test_9_reproducibility(tmp_path):
    cfg = tmp_path / "small.toml"
    cfg.write_text(SMALL)
    same = {}
    for kind in ("ber", "mi", "power", "dsp"):
        outs = []
        for run in ("a", "b"):
            assert cli.main([kind, "--config", str(cfg), "--out", str(tmp_path / run)]) == 0
            outs.append((tmp_path / run / f"{kind}.csv").read_bytes())
        same[kind] = outs[0] == outs[1]
    record(9, "reproducibility", all(same.values()), "byte-identical CSV " + ", ".join(f"{k}={v}" for k, v in same.items()))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
