"""End-to-end acceptance criteria 1-10.

Each test records a single PASS/FAIL line (printed in the pytest terminal
summary, or on stdout when this file is run as a script).
"""
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from acceptance_report import verdict
from offres.analysis import (coherence_limit_1q, coherence_limit_2q, cr_peak_oracle, extract_peaks,
                             spectator_ix_peak, spectator_peak_oracle, stark_peak_oracle, wrap)
from offres.dynamics import (CrossResonanceModel, PropagationOptions, SingleQubitDriveModel, SpectatorModel, mhz,
                             ns, propagate, us)
from offres.framespec import (CpmgSpec, SweepSpec, calibrate_drag, calibrate_zx_half_pi, calibrated_amplitude,
                              drag_signal, flat_top_stark_gate, optimize_square_stark, run_cpa, run_cpmg,
                              run_spectator_framespec, run_state_selective_framespec, sector_peak)
from offres.pulse import FlatTopGaussian, Gaussian, Pulse, Schedule, Square, drag_wrap
from offres.qcore import NoiseModel, gate_error, kron, pauli_coefficients, rotation
from offres.qcvv import (HEAT_PAULIS, HeatSpec, IdealGateSet, RBSpec, heat_blindness_demo, heat_gate_unitary,
                         run_heat, run_purity_rb, run_rb)
from offres.qcvv.gatesets import calibrate_cx, cr_envelope, cr_gateset, stark_gateset, x_pi_pulse

pytestmark = pytest.mark.filterwarnings("ignore::RuntimeWarning")

# benchmark Stark gate and CR CNOT parameters (presets table1_stark, table2_cnot)
STARK_DELTA, STARK_TG, STARK_SIGMA = mhz(-50), ns(96), ns(14.22)
STARK_T1, STARK_T2 = us(124), us(107)
CR_DELTA, CR_OMEGA, CR_TG, CR_SIGMA = mhz(-59), mhz(20), ns(213.33), ns(14.22)
CR_T1, CR_T2 = (us(333), us(324)), (us(313), us(271))
IRB_LENGTHS = (1, 10, 25, 50, 100, 175, 250)
IRB_Z = 1.0
IRB_SAMPLES = {1: 400, 2: 100}  # the 1Q coherent error is small, so it needs more sequences


def area(env) -> float:
    return quad(lambda t: float(np.real(env(t))), 0, env.duration, limit=200)[0]


def equatorial_step(u) -> float:
    """Frame step predicted from a single-gate unitary."""
    return sector_peak(u / np.sqrt(np.linalg.det(u)))


def top_peak(result, qubit=0):
    pk = extract_peaks(result, qubit=qubit)
    return pk[0] if pk else None


def nearest_peak(peaks, target):
    return min(peaks, key=lambda p: abs(wrap(p.position - target))) if peaks else None


# -- 1 ------------------------------------------------------------------------------


def test_criterion_1_square_stark_gate():
    omega, u, err = optimize_square_stark(STARK_DELTA, STARK_TG)
    c = pauli_coefficients(u)
    coeffs = np.array([abs(c[k]) for k in "IXYZ"])
    target = np.array([0.717, 0.037, 0.027, 0.695])
    f = omega / mhz(1)
    ok = abs(f - 16.25) <= 0.05 and np.all(np.abs(coeffs - target) <= 5e-3) and abs(err - 1.5e-3) <= 1e-4
    verdict(1, ok, f"Omega/2pi={f:.3f} MHz, |coeffs|={np.round(coeffs, 4).tolist()}, error={err:.3e}")


# -- 2 ------------------------------------------------------------------------------


def test_criterion_2_cpa_inversion():
    sched, omega = flat_top_stark_gate(STARK_DELTA, STARK_TG, STARK_SIGMA)
    model = SingleQubitDriveModel(detuning=STARK_DELTA)
    phi_peak = equatorial_step(propagate(model, sched))
    coarse = -np.pi + 2 * np.pi * np.arange(128) / 128
    fine = phi_peak + np.linspace(-0.03, 0.03, 13)
    phis = np.unique(np.round(np.concatenate([coarse, fine, [0.0]]), 12))
    res = run_cpa(model, sched, SweepSpec(tuple(phis), tuple(range(1, 151))))
    grid = res.populations
    pk = top_peak(res)
    near = np.abs(wrap(phis - phi_peak)) <= pk.half_width
    p_near = grid[:, near].max()
    n_at = res.n_grid[int(np.argmax(grid[:, near].max(axis=1)))]
    p_zero = grid[:, int(np.argmin(np.abs(phis)))].max()
    bound = 2 * (omega / np.hypot(omega, STARK_DELTA)) ** 2
    ok = p_near > 0.9 and p_zero <= bound
    verdict(2, ok, f"max P={p_near:.4f} at N={n_at} within {pk.half_width:.3f} of phi_peak={phi_peak:.4f}; "
                   f"phi=0 max {p_zero:.4f} <= {bound:.4f}")


# -- 3 ------------------------------------------------------------------------------

STARK_SETS = [(5, -50, 96), (10, -50, 96), (15, -50, 96), (12, 60, 80), (6, 30, 150), (10, -80, 200),
              (4, 20, 100), (9, -45, 64), (14, 70, 50), (7, -35, 110)]
CR_SETS = [(20, -59, 0.07, 200), (15, -59, 0.1, 150), (25, -70, 0.05, 180), (10, -40, 0.12, 220),
           (18, 55, 0.08, 160), (12, -90, 0.06, 250), (8, -30, 0.15, 200), (16, 65, 0.09, 140),
           (20, -80, 0.07, 100), (14, -60, 0.1, 170)]
SPECTATOR_CANDIDATES = [(-59.9, 3.55, 16, 0.02, 0.02), (-59.9, 3.55, 8, 0.02, 0.02), (60, 5, 10, 0.03, 0.01),
                        (-40, 4, 7.11, 0.02, 0.0), (-100, 3, 12, 0.03, 0.02), (80, 6, 7.11, 0.01, 0.03),
                        (-70, 2.5, 14, 0.02, 0.02), (45, 4, 9, 0.04, 0.0), (-120, 3, 7.11, 0.02, 0.01),
                        (35, 7, 10, 0.02, 0.02), (-59.9, 3.55, 12, 0.02, 0.02), (-59.9, 3.55, 20, 0.02, 0.02),
                        (50, 4, 16, 0.03, 0.02), (-85, 3, 9, 0.02, 0.02)]
RESOLVABLE = 0.35  # rad; predicted peaks this close to 0 or pi sit on the X-interrogation artefacts


def _stark_case(om, d, t):
    model = SingleQubitDriveModel(detuning=d)
    res = run_cpa(model, Schedule().append(Pulse("d0", Square(t), om)),
                  SweepSpec.full_turn(512, tuple(range(1, 51))))
    return res, stark_peak_oracle(om, d, t)


def test_criterion_3_peak_formulas():
    fails, dev_max, counts = [], {}, {}
    # Stark, square pulses
    n = 0
    for om, d, t in STARK_SETS:
        res, oracle = _stark_case(mhz(om), mhz(d), ns(t))
        pk = top_peak(res)
        dev = abs(wrap(pk.position - oracle))
        dev_max["stark"] = max(dev_max.get("stark", 0), dev / pk.half_width)
        n += dev <= pk.half_width
        if dev > pk.half_width:
            fails.append(("stark", om, d, t, dev, pk.half_width))
    # vanishing peak: Omega_r t_g = 12 pi
    d, t = mhz(-50), ns(100)
    om = np.sqrt((12 * np.pi / t) ** 2 - d**2)
    res, _ = _stark_case(om, d, t)
    vanish = res.populations.max() < 1e-6 and not extract_peaks(res)
    n += vanish
    if not vanish:
        fails.append(("stark-vanishing", res.populations.max()))
    counts["stark"] = n

    # cross resonance, square pulses, state-selective
    spec = SweepSpec.full_turn(256, tuple(range(1, 21)))
    xp = x_pi_pulse("d1", ns(7.11))
    n = 0
    for om, d, mu, t in CR_SETS:
        om, d, t = mhz(om), mhz(d), ns(t)
        model = CrossResonanceModel(d, mu)
        gate = Schedule().append(Pulse("u0", Square(t), om))
        good = True
        for sector in ("plus", "minus"):
            pk = top_peak(run_state_selective_framespec(model, gate, spec, sector, xp))
            oracle = cr_peak_oracle(om, d, mu, t, sector, xp.duration)
            dev = abs(wrap(pk.position - oracle)) if pk else np.inf
            dev_max["cr"] = max(dev_max.get("cr", 0), dev / pk.half_width if pk else np.inf)
            if pk is None or dev > pk.half_width:
                good = False
                fails.append(("cr", om, d, mu, t, sector, dev))
        n += good
    # vanishing plus-sector peak
    om, d, mu = mhz(22), mhz(-50), 0.04
    t = 2 * np.pi * 7 / np.hypot(om, d - mu * om)
    gate = Schedule().append(Pulse("u0", Square(t), om))
    model = CrossResonanceModel(d, mu)
    plus = run_state_selective_framespec(model, gate, spec, "plus", xp)
    minus = run_state_selective_framespec(model, gate, spec, "minus", xp)
    vanish = plus.populations.max() < 1e-6 and top_peak(minus) is not None
    n += vanish
    if not vanish:
        fails.append(("cr-vanishing", plus.populations.max()))
    counts["cr"] = n

    # spectator, correlated peak on the driven qubit
    n = 0
    for dm, sig, xs, mu, nu in SPECTATOR_CANDIDATES:
        d = mhz(dm)
        env = Gaussian(ns(sig))
        amp = calibrated_amplitude(env, np.pi / 2)
        gate = Schedule().append(Pulse("d0", env, amp))
        xpd = x_pi_pulse("d0", ns(xs))
        t_rep = gate.duration + xpd.duration
        oracles = {s: spectator_peak_oracle(amp, d, t_rep, s, area(env)) for s in ("plus", "minus")}
        if min(min(abs(o), np.pi - abs(o)) for o in oracles.values()) < RESOLVABLE:
            continue
        good = True
        for prep, sector in (("plus0", "plus"), ("minus0", "minus")):
            res = run_spectator_framespec(SpectatorModel(d, mu, nu), gate, spec, prep, xpd)
            pk = nearest_peak(extract_peaks(res, qubit=0), oracles[sector])
            dev = abs(wrap(pk.position - oracles[sector])) if pk else np.inf
            dev_max["spectator"] = max(dev_max.get("spectator", 0), dev / pk.half_width if pk else np.inf)
            if pk is None or dev > pk.half_width:
                good = False
                fails.append(("spectator", dm, sig, xs, sector, dev))
        n += good
    counts["spectator"] = n
    ok = not fails and all(v >= 10 for v in counts.values())
    detail = ", ".join(f"{k}: {counts[k]} sets, worst dev/half-width {dev_max[k]:.2f}" for k in counts)
    verdict(3, ok, detail + (f"; failures {fails}" if fails else ""))


# -- 4 ------------------------------------------------------------------------------


def test_criterion_4_cnot_signature():
    env = FlatTopGaussian(CR_SIGMA, CR_TG)
    mu = np.pi / 2 / (CR_OMEGA * area(env))
    model = CrossResonanceModel(CR_DELTA, mu)
    gate = Schedule().append(Pulse("u0", env, CR_OMEGA))
    n_phi = 256
    spec = SweepSpec.full_turn(n_phi, tuple(range(1, 21)))
    xp = x_pi_pulse("d1", ns(7.11))
    pk = {s: top_peak(run_state_selective_framespec(model, gate, spec, s, xp)) for s in ("plus", "minus")}
    sep = abs(wrap(pk["plus"].position - pk["minus"].position))
    tol = 2 * np.pi / n_phi + max(pk["plus"].half_width, pk["minus"].half_width)
    verdict(4, abs(sep - np.pi) <= tol,
            f"mu*Omega*t_g=pi/2 (mu={mu:.4f}); separation {sep:.4f} rad, |sep-pi|={abs(sep - np.pi):.4f} <= {tol:.3f}")


# -- 5 ------------------------------------------------------------------------------


def _irb(gs, gate, noise, n):
    spec = RBSpec(n, IRB_LENGTHS, IRB_SAMPLES[n], seed=17, mode="interleaved", interleaved=gate, noise=noise)
    return run_rb(spec, gs)


def test_criterion_5_drag():
    notes, ok = [], True
    # Stark
    sched, omega = flat_top_stark_gate(STARK_DELTA, STARK_TG, STARK_SIGMA)
    env = sched.items[0][1].envelope
    model = SingleQubitDriveModel(detuning=STARK_DELTA)

    def stark_gate(b):
        return Schedule().append(Pulse("d0", drag_wrap(env, b) if b else env, omega))

    phi = top_peak(run_cpa(model, stark_gate(0.0), SweepSpec.full_turn(160, tuple(range(1, 51))))).position
    cal = calibrate_drag(drag_signal(model, stark_gate, phi, 50), ns(np.linspace(-14, 6, 21)), 9)
    at_n = drag_signal(model, stark_gate, phi, 50, aggregation="at_n")
    red = at_n(0.0) / at_n(cal.beta)
    ok &= red >= 20
    notes.append(f"Stark beta={cal.beta * 1e9:.2f} ns, N=50 reduction {red:.3g}x")

    # cross resonance: one beta for both sectors
    env0 = cr_envelope(CR_TG, CR_SIGMA)
    mu = calibrate_zx_half_pi(CR_DELTA, CR_OMEGA, env0)
    crm = CrossResonanceModel(CR_DELTA, mu)
    xp = x_pi_pulse("d1", ns(7.11))

    def cr_gate(b):
        return Schedule().append(Pulse("u0", cr_envelope(CR_TG, CR_SIGMA, b), CR_OMEGA))

    sweep = SweepSpec.full_turn(160, tuple(range(1, 61)))
    sig, at = {}, {}
    for sector, label in (("plus", "0+"), ("minus", "0-")):
        phi_s = top_peak(run_state_selective_framespec(crm, cr_gate(0.0), sweep, sector, xp)).position
        sig[sector] = drag_signal(crm, cr_gate, phi_s, 60, label, 0, xp)
        at[sector] = drag_signal(crm, cr_gate, phi_s, 60, label, 0, xp, aggregation="at_n")
    cr_cal = calibrate_drag(lambda b: sig["plus"](b) + sig["minus"](b), ns(np.linspace(0, 6, 13)), 9)
    reds = {s: at[s](0.0) / at[s](cr_cal.beta) for s in at}
    ok &= all(r >= 20 for r in reds.values())
    notes.append(f"CR beta={cr_cal.beta * 1e9:.2f} ns, reductions plus {reds['plus']:.3g}x minus {reds['minus']:.3g}x")

    # interleaved RB with the benchmark coherence times
    n1 = NoiseModel((STARK_T1,), (STARK_T2,))
    stark, coherent = [], []
    for b in (0.0, cal.beta):
        gs = stark_gateset(STARK_DELTA, STARK_TG, STARK_SIGMA, b, n1)
        stark.append(_irb(gs, ("ZS", (0,)), n1, 1))
        u = propagate(SingleQubitDriveModel(detuning=STARK_DELTA), gs.gates[("ZS", (0,))],
                      PropagationOptions(frame="resonant"))
        coherent.append(gate_error(u, gs.ideal[("ZS", (0,))]))
    notes.append(f"Stark unitary error {coherent[0]:.2e} -> {coherent[1]:.2e}")
    n2 = NoiseModel(CR_T1, CR_T2)
    cx = []
    for b in (0.0, cr_cal.beta):
        c = calibrate_cx(crm, CR_OMEGA, cr_envelope(CR_TG, CR_SIGMA, b))
        gs = cr_gateset(CrossResonanceModel(CR_DELTA, mu, noise=n2), {"CX": c})
        cx.append(_irb(gs, ("CX", (0, 1)), n2, 2))
    for name, (a, b) in (("Stark", stark), ("CX", cx)):
        gain = a.epg - b.epg
        if np.array_equal(a.reference.values, b.reference.values):
            # shared reference (same seed, gate not in the Clifford set): its fit error cancels
            scale = (1 - 1 / 2**a.n_qubits) / a.reference.fit.alpha
            gain_err = scale * np.hypot(a.fit.alpha_err, b.fit.alpha_err)
        else:
            gain_err = np.hypot(a.epg_err, b.epg_err)
        ok &= gain > IRB_Z * gain_err
        notes.append(f"{name} EPG {a.epg:.3e}+-{a.epg_err:.1e} -> {b.epg:.3e}+-{b.epg_err:.1e} "
                     f"(gain {gain:.2e}+-{gain_err:.1e})")
    verdict(5, ok, "; ".join(notes))


# -- 6 ------------------------------------------------------------------------------


def test_criterion_6_coherence_limits():
    e1 = coherence_limit_1q(ns(96), us(124), us(107))
    e2 = 1.5 * coherence_limit_2q(ns(300), us(40), us(40))
    ok = abs(e1 - 4.3e-4) <= 0.05e-4 and abs(e2 - 1.35e-2) <= 2e-4
    verdict(6, ok, f"eps1Q={e1:.4e}, 1.5*eps2Q={e2:.4e}")


# -- 7 ------------------------------------------------------------------------------


def test_criterion_7_purity_rb():
    noise = NoiseModel.uniform(2, us(40), us(40), readout_error=0.03)
    durations = {"CX": ns(300)}
    spec = RBSpec(2, (0, 2, 5, 10, 20, 35, 50, 75, 100), samples=12, seed=7, noise=noise, durations=durations)
    faulty = IdealGateSet(2, noise, durations, {"CX": kron(np.eye(2), rotation("X", 0.15))})
    std, std_x = run_rb(spec), run_rb(spec, faulty)
    pur, pur_x = run_purity_rb(spec), run_purity_rb(spec, faulty)
    limit = 1.5 * coherence_limit_2q(ns(300), us(40), us(40))
    rel = abs(std.epc - limit) / limit
    raise_sigma = (std_x.epc - std.epc) / np.hypot(std.epc_err, std_x.epc_err)
    pur_ci = 1.96 * np.hypot(pur.epc_err, pur_x.epc_err)
    ok = rel < 0.1 and raise_sigma > 3 and abs(pur_x.epc - pur.epc) < pur_ci
    verdict(7, ok, f"standard EPC {std.epc:.4e} vs limit {limit:.4e} ({rel:.1%}); coherent X raises standard "
                   f"by {raise_sigma:.1f} sigma; purity EPC {pur.epc:.4e} -> {pur_x.epc:.4e} (CI {pur_ci:.1e})")


# -- 8 ------------------------------------------------------------------------------


def test_criterion_8_heat():
    worst = 0.0
    for label in HEAT_PAULIS:
        est = run_heat(HeatSpec(), heat_gate_unitary({label: 0.01})).errors[label]
        worst = max(worst, abs(est - 0.01) / 0.01)
    blind = heat_blindness_demo(commensurate=False)
    comm = heat_blindness_demo(commensurate=True)
    ok = worst <= 0.1 and blind.blind and not comm.blind and abs(comm.ratio - 1) <= 0.25
    verdict(8, ok, f"{len(HEAT_PAULIS)} Paulis recovered, worst rel. error {worst:.1%}; incommensurate "
                   f"HEAT/framespec {blind.ratio:.3f}; commensurate {comm.ratio:.2f}")


# -- 9 ------------------------------------------------------------------------------


def test_criterion_9_cpmg():
    d = mhz(-59.9)
    model = SpectatorModel(d, 0.02, 0.02)
    env = Gaussian(ns(5.33))
    pulse = Pulse("d0", env, calibrated_amplitude(env, np.pi))
    spec = CpmgSpec.uniform(ns(60), 16)
    peaks = run_cpmg(model, spec, pulse).peaks(1, rel_height=0.2)
    taus = np.array([p.position for p in peaks])
    step = spec.tau_grid[1] - spec.tau_grid[0]
    period = 2 * np.pi / abs(d)
    spacing_ok = len(taus) >= 2 and np.all(np.abs(np.diff(taus) - period) <= step)
    phis = np.linspace(-np.pi, np.pi, 721)[:-1]
    cpa = run_cpa(model, Schedule().append(pulse),
                  SweepSpec(tuple(phis), (16,), initial_state="+0", measured_qubits=(1,)))
    cpa_peaks = extract_peaks(cpa, qubit=1, aggregation="fixed_N", n=16)
    devs = []
    for tau in taus:
        p = nearest_peak(cpa_peaks, d * tau)
        devs.append(abs(wrap(p.position - d * tau)) / (p.half_width + 2 * np.pi / 720))
    ok = spacing_ok and max(devs) <= 1
    verdict(9, ok, f"spacings {np.round(np.diff(taus) * 1e9, 3).tolist()} ns vs {period * 1e9:.3f} ns "
                   f"(step {step * 1e9:.3f}); phi=Delta*tau mapping worst dev/half-width {max(devs):.2f}")


# -- 10 -----------------------------------------------------------------------------


def test_criterion_10_spectator_table():
    d = mhz(-59.9)
    model = SpectatorModel(d, 0.02, 0.02)
    env = Gaussian(ns(3.55))
    amp = calibrated_amplitude(env, np.pi / 2)
    gate = Schedule().append(Pulse("d0", env, amp))
    spec = SweepSpec.full_turn(512, tuple(range(1, 21)))
    rows, worst = [], 0.0
    for xs in (12, 16, 20):
        xp = x_pi_pulse("d0", ns(xs))
        t_rep = gate.duration + xp.duration
        for prep, sector in (("plus0", "plus"), ("minus0", "minus")):
            res = run_spectator_framespec(model, gate, spec, prep, xp)
            analytic = spectator_peak_oracle(amp, d, t_rep, sector)
            for q in (0, 1):
                p = nearest_peak(extract_peaks(res, qubit=q), analytic)
                r = abs(wrap(p.position - analytic))
                worst = max(worst, r)
                rows.append((xs, prep, q, round(p.position, 3), round(analytic, 3)))
            ix = nearest_peak(extract_peaks(res, qubit=1), spectator_ix_peak(d, t_rep))
            worst = max(worst, abs(wrap(ix.position - spectator_ix_peak(d, t_rep))))
    preset = [r for r in rows if r[0] == 16 and r[1] == "plus0"]
    verdict(10, worst <= 0.03, f"worst residual {worst:.4f} rad over t_X in 48..80 ns; "
                               f"t_X=64 ns plus0 (sim, analytic) {[(r[3], r[4]) for r in preset]}")


if __name__ == "__main__":
    import acceptance_report

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    fn()
            except AssertionError:
                pass
    print("\n".join(acceptance_report.lines()))
