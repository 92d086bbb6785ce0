import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from offres.analysis import (aggregate, coherence_limit_1q, coherence_limit_2q, cr_peak_oracle,
                             extract_peaks, find_peaks_1d, fit_decay, fit_linear, fit_sin, p10_closed_form,
                             spectator_ix_peak, spectator_peak_oracle, stark_angle, stark_peak_oracle, wrap)
from offres.dynamics import mhz, ns, us
from offres.qcore import KrausChannel, gate_error, kron, thermal_relaxation


@given(st.floats(-1e3, 1e3, allow_nan=False))
def test_wrap_range_and_congruence(x):
    w = wrap(x)
    assert -np.pi < w <= np.pi
    assert np.isclose(np.cos(w), np.cos(x), atol=1e-9) and np.isclose(np.sin(w), np.sin(x), atol=1e-9)


def test_wrap_edges_and_arrays():
    assert wrap(np.pi) == pytest.approx(np.pi)
    assert wrap(-np.pi) == pytest.approx(np.pi)
    assert np.allclose(wrap([0.0, 3 * np.pi]), [0.0, np.pi])


def test_p10_limits():
    assert p10_closed_form(0.0, mhz(10), 1e-7) == 0.0
    # resonant limit is sin^2(omega t / 2)
    assert p10_closed_form(mhz(5), 0.0, 50e-9) == pytest.approx(np.sin(mhz(5) * 50e-9 / 2) ** 2)
    assert p10_closed_form(mhz(5), mhz(-50), 1e-6) <= (5 / np.hypot(5, 50)) ** 2 + 1e-12


def test_stark_oracle_and_angle():
    om, d, t = mhz(16.25), mhz(-50), ns(96)
    assert stark_peak_oracle(om, d, t) == pytest.approx(wrap(-np.hypot(om, d) * t))
    assert stark_peak_oracle(om, -d, t) == pytest.approx(-stark_peak_oracle(om, d, t))
    assert stark_angle(om, d, t) > 0
    # leading-order Stark angle of the 96 ns, -50 MHz gate is near a quarter turn
    assert stark_angle(om, d, t) == pytest.approx(np.pi / 2, rel=0.03)


def test_cr_oracle_sectors():
    om, d, mu, t = mhz(20), mhz(-59), 0.07, ns(200)
    p = cr_peak_oracle(om, d, mu, t, "plus")
    m = cr_peak_oracle(om, d, mu, t, "minus")
    assert p != pytest.approx(m)
    assert cr_peak_oracle(om, d, 0.0, t, "plus") == pytest.approx(cr_peak_oracle(om, d, 0.0, t, "minus"))
    shifted = cr_peak_oracle(om, d, mu, t, "plus", t_x=ns(28))
    assert wrap(shifted - p) == pytest.approx(wrap(-d * ns(28)))
    with pytest.raises(ValueError):
        cr_peak_oracle(om, d, mu, t, "zero")


def test_spectator_oracles():
    d, t = mhz(-59.9), ns(78.2)
    assert spectator_ix_peak(d, t) == pytest.approx(wrap(-d * t))
    p = spectator_peak_oracle(mhz(10), d, t, "plus")
    m = spectator_peak_oracle(mhz(10), d, t, "minus")
    assert abs(wrap(p - m)) == pytest.approx(np.pi)
    assert spectator_peak_oracle(mhz(10), d, t, "plus", t_g=ns(10)) == pytest.approx(
        wrap(-d * t - mhz(10) * ns(10)))


def test_fit_linear_recovers_line():
    x = np.arange(10.0)
    fit = fit_linear(x, 0.3 * x - 2)
    assert fit.slope == pytest.approx(0.3) and fit.intercept == pytest.approx(-2)
    slope, icpt, cov = fit
    assert cov.shape == (2, 2)
    with pytest.raises(ValueError):
        fit_linear([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_linear([1, 1, 1], [1, 2, 3])


@pytest.mark.parametrize("power", [1, 2])
def test_fit_decay_recovers_parameters(power):
    n = np.array([0, 2, 5, 10, 20, 40, 80, 120])
    y = 0.45 * 0.985 ** (power * n) + 0.5
    fit = fit_decay(n, y, power=power)
    assert fit.alpha == pytest.approx(0.985, abs=1e-8)
    assert fit.A == pytest.approx(0.45, abs=1e-6) and fit.B == pytest.approx(0.5, abs=1e-6)
    assert np.allclose(fit(n), y)


def test_fit_decay_noisy_within_error():
    rng = np.random.default_rng(3)
    n = np.repeat([0, 5, 10, 20, 40, 80], 10)
    y = 0.5 * 0.97 ** n + 0.5 + rng.normal(0, 0.005, n.size)
    fit = fit_decay(n, y)
    assert abs(fit.alpha - 0.97) < 4 * fit.alpha_err


def test_fit_decay_validation():
    with pytest.raises(ValueError):
        fit_decay([1, 2, 3], [1, 1, 1], power=3)
    with pytest.raises(ValueError):
        fit_decay([1, 2], [1, 1])


def test_fit_sin_wrapped_line():
    t = np.linspace(0, 40e-9, 9)
    a, p0 = mhz(-59), 0.4
    fit = fit_sin(t, wrap(a * t + p0))
    assert fit.a == pytest.approx(a, rel=1e-6)
    assert fit.phi0 == pytest.approx(p0, abs=1e-6)


def test_aggregate_modes():
    g = np.arange(6.0).reshape(2, 3)
    assert np.allclose(aggregate(g, (1, 2)), [1.5, 2.5, 3.5])
    assert np.allclose(aggregate(g, (1, 2), "fixed_N", 1), [0, 1, 2])
    assert np.allclose(aggregate(g, (1, 2), "fixed_N"), [3, 4, 5])
    with pytest.raises(ValueError):
        aggregate(g, (1, 2), "fixed_N", 7)
    with pytest.raises(ValueError):
        aggregate(g, (1, 2), "median")


def test_find_peaks_parabolic_refinement():
    xs = np.linspace(-3, 3, 121)
    ys = np.exp(-((xs - 0.731) ** 2) / (2 * 0.2**2))
    (pk,) = find_peaks_1d(xs, ys + 1e-4, threshold=5)
    assert pk.position == pytest.approx(0.731, abs=2e-3)
    assert pk.half_width == pytest.approx(0.2 * np.sqrt(2 * np.log(2)), rel=0.02)
    assert pk.height == pytest.approx(1.0, abs=1e-3)


def test_extract_peaks_periodic_wraps():
    phis = -np.pi + 2 * np.pi * np.arange(64) / 64
    prof = np.exp(-(wrap(phis - 3.1) ** 2) / 0.02) + 1e-4
    peaks = extract_peaks((phis, prof))
    assert len(peaks) == 1
    assert abs(wrap(peaks[0].position - 3.1)) < 0.02


def test_extract_peaks_threshold_rejects_flat():
    phis = np.linspace(-np.pi, np.pi, 50, endpoint=False)
    assert extract_peaks((phis, np.full(50, 0.2))) == []


def test_coherence_limit_1q_matches_kraus():
    t, t1, t2 = ns(96), us(124), us(107)
    assert coherence_limit_1q(t, t1, t2) == pytest.approx(gate_error(thermal_relaxation(t, t1, t2), np.eye(2)))
    assert coherence_limit_1q(t, t1, t2) == pytest.approx(4.28e-4, abs=1e-5)


@settings(max_examples=30, deadline=None)
@given(st.floats(10, 1000), st.floats(10, 200), st.floats(0.1, 2.0))
def test_coherence_limit_2q_product(tg, t1, ratio):
    t2 = min(ratio * t1, 2 * t1)
    tg, t1, t2 = ns(tg), us(t1), us(t2)
    ch = thermal_relaxation(tg, t1, t2)
    k2 = [kron(a, b) for a in ch.ops for b in ch.ops]
    assert coherence_limit_2q(tg, t1, t2) == pytest.approx(gate_error(KrausChannel(k2), np.eye(4)), rel=1e-9)
