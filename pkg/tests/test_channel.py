from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import constants

from matryoshka import channel
from matryoshka.channel import LinkModel


def test_db_helpers():
    assert channel.db2lin(3.0) == pytest.approx(1.9952623)
    assert channel.lin2db(100.0) == pytest.approx(20.0)


def test_awgn_statistics(rng):
    x = np.zeros((200_000, 6), complex)
    n = channel.awgn(x, 0.01, rng)
    assert np.var(n.real) == pytest.approx(0.01, rel=0.01)
    assert np.var(n.imag) == pytest.approx(0.01, rel=0.01)
    cov = np.cov(np.concatenate([n.real, n.imag], axis=1).T)
    assert np.max(np.abs(cov - 0.01 * np.eye(12))) < 5e-4


def test_awgn_zero_and_negative(rng):
    x = np.ones((3, 6), complex)
    assert np.array_equal(channel.awgn(x, 0.0, rng), x)
    with pytest.raises(ValueError):
        channel.awgn(x, -1.0, rng)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_unitary(seed):
    u = channel.sample_unitary(seed)
    assert np.allclose(u.conj().T @ u, np.eye(6), atol=1e-12)
    x = np.random.default_rng(seed).standard_normal((4, 6)) + 0j
    assert np.allclose(np.linalg.norm(x @ u.T, axis=1), np.linalg.norm(x, axis=1))


def test_haar_moments(rng):
    us = np.array([channel.sample_unitary(rng) for _ in range(4000)])
    p = np.abs(us) ** 2
    assert np.allclose(p.mean(axis=0), 1 / 6, atol=0.01)
    # Haar: E|U_ij|^4 = 2 / (n (n + 1))
    assert np.mean(p**2) == pytest.approx(2 / 42, rel=0.03)
    # eigenphases of a Haar unitary are uniform on the circle
    ph = np.angle(np.linalg.eigvals(us)).ravel()
    hist, _ = np.histogram(ph, bins=8, range=(-np.pi, np.pi))
    assert np.ptp(hist) / hist.mean() < 0.1


@pytest.mark.parametrize("mdl_db", [0.0, 3.0, 10.0])
def test_mdl_matrix(mdl_db, rng):
    m = channel.mdl_matrix(mdl_db, rng)
    s = np.linalg.svd(m, compute_uv=False)
    assert 20 * np.log10(s.max() / s.min()) == pytest.approx(mdl_db, abs=1e-9)
    assert np.mean(s**2) == pytest.approx(1.0)


def test_mdl_negative():
    with pytest.raises(ValueError):
        channel.mdl_matrix(-1.0, 0)


def test_wiener_phase(rng):
    ph = np.array([channel.wiener_phase(100, 1e-3, rng)[-1] for _ in range(4000)])
    assert np.var(ph) == pytest.approx(0.1, rel=0.08)
    assert not channel.wiener_phase(10, 0.0).any()


def test_ase_power_against_constants():
    nu = constants.c / 1549.3e-9
    watts = 10**0.5 * constants.h * nu * 10**2.28 * 30e9
    assert channel.ase_power_mw(LinkModel()) == pytest.approx(watts * 1e3, rel=1e-12)
    assert 10 * np.log10(watts * 1e3) == pytest.approx(-26.35, abs=0.01)


def test_span_budget():
    link = LinkModel()
    assert channel.span_loss_db(0.18, 60.0, link.extra_loss_db) == pytest.approx(22.8)
    assert link.extra_loss_db == pytest.approx(12.0)
    assert channel.spans_for_distance(1150) == 10
    assert channel.spans_for_distance(10) == 1
    assert link.with_distance(2300).distance_km == pytest.approx(2300)


def test_snr_halves_with_distance():
    a, _ = channel.snr_at_distance(LinkModel().with_distance(1150))
    b, _ = channel.snr_at_distance(LinkModel().with_distance(2300))
    assert 10 * np.log10(a / b) == pytest.approx(10 * np.log10(2), abs=1e-9)


def test_snr_linear_in_power_without_nli():
    a, _ = channel.snr_at_distance(LinkModel(launch_power_dbm_per_channel=0.0))
    b, _ = channel.snr_at_distance(LinkModel(launch_power_dbm_per_channel=3.0))
    assert 10 * np.log10(b / a) == pytest.approx(3.0)


@pytest.mark.parametrize("target", [2.0, 4.0, 6.0])
def test_nli_calibration_matches_scan(target):
    link = LinkModel().with_distance(2400)
    eta = channel.calibrate_nli(link, target)
    powers = np.arange(-5, 12, 0.001)
    cal = replace(link, nli_coeff=eta)
    snr = [channel.snr_at_distance(cal.with_power(p))[0] for p in powers]
    assert powers[int(np.argmax(snr))] == pytest.approx(target, abs=2e-3)


@pytest.mark.parametrize("bad", [dict(n_spans=0), dict(span_loss_db=-1), dict(nli_coeff=-1)])
def test_link_validation(bad):
    with pytest.raises(ValueError):
        LinkModel(**bad)


def test_transmit_identity_noiseless(mat, rng):
    x = mat.points[rng.integers(0, 4096, 100)]
    tx = channel.transmit(x, LinkModel(coupling=False), rng, add_noise=False)
    assert np.array_equal(tx.rx, x)
    assert tx.sigma2 == 0.0


def test_transmit_matrix_consistent(mat, rng):
    x = mat.points[rng.integers(0, 4096, 50)]
    link = LinkModel(n_spans=4, mdl_db=2.0)
    tx = channel.transmit(x, link, rng, add_noise=False)
    assert np.allclose(tx.rx, x @ tx.matrix.T)


@pytest.mark.parametrize("n_spans", [1, 5])
def test_transmit_end_to_end_snr(mat, rng, n_spans):
    x = mat.points[rng.integers(0, 4096, 100_000)]
    link = LinkModel(n_spans=n_spans)
    tx = channel.transmit(x, link, rng)
    noise = tx.rx - x @ tx.matrix.T
    measured = 10 * np.log10(np.mean(np.sum(np.abs(x) ** 2, 1)) / np.mean(np.sum(np.abs(noise) ** 2, 1)))
    expected = 10 * np.log10(channel.snr_at_distance(link)[0])
    assert measured == pytest.approx(expected, abs=0.1)


def test_transmit_snr_override(mat, rng):
    x = mat.points[rng.integers(0, 4096, 10)]
    assert channel.transmit(x, LinkModel(), rng, snr_db=10.0).sigma2 == pytest.approx(1 / 120)


def test_transmit_deterministic(mat):
    x = mat.points[:500]
    link = LinkModel(n_spans=3, phase_noise_var=1e-4)
    a = channel.transmit(x, link, 7)
    b = channel.transmit(x, link, 7)
    assert np.array_equal(a.rx, b.rx)
    assert np.array_equal(a.phase, b.phase)
