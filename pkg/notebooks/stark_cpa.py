# %% [markdown]
# # Stark Z gate: phase amplification and DRAG
#
# A far-detuned drive shifts the qubit frequency (a Z rotation) but also
# leaves a small off-resonant excitation.  Repeating the gate with a frame
# step `phi` between repetitions makes that excitation add up coherently
# at one particular `phi`.

# %%
import numpy as np

from offres.analysis import extract_peaks, stark_peak_oracle
from offres.dynamics import SingleQubitDriveModel, mhz, ns
from offres.framespec import (SweepSpec, calibrate_drag, drag_signal, flat_top_stark_gate,
                              optimize_square_stark, run_cpa)
from offres.pulse import Pulse, Schedule, Square, drag_wrap
from offres.qcore import pauli_coefficients

delta, t_g = mhz(-50), ns(96)

# %% Square-pulse Z90 from a single amplitude optimisation
omega, u, err = optimize_square_stark(delta, t_g)
print(f"Omega/2pi = {omega / mhz(1):.3f} MHz, gate error {err:.2e}")
print({k: round(abs(v), 4) for k, v in pauli_coefficients(u).items()})

# %% CPA sweep of a square pulse; brute-force peak vs closed form
om = mhz(10)
model = SingleQubitDriveModel(detuning=delta)
gate = Schedule().append(Pulse("d0", Square(t_g), om))
res = run_cpa(model, gate, SweepSpec.full_turn(256, tuple(range(1, 51))))
pk = extract_peaks(res)[0]
print(f"peak {pk.position:.4f} +- {pk.half_width:.3f} rad, closed form {stark_peak_oracle(om, delta, t_g):.4f}")

# %% Flat-top gate and one-parameter DRAG calibration
sched, amp = flat_top_stark_gate(delta, t_g, ns(14.22))
env = sched.items[0][1].envelope


def gate_for(beta):
    return Schedule().append(Pulse("d0", drag_wrap(env, beta) if beta else env, amp))


res = run_cpa(model, gate_for(0.0), SweepSpec.full_turn(160, tuple(range(1, 51))))
phi = extract_peaks(res)[0].position
cal = calibrate_drag(drag_signal(model, gate_for, phi, 50), ns(np.linspace(-14, 6, 21)), 9)
at_50 = drag_signal(model, gate_for, phi, 50, aggregation="at_n")
print(f"beta = {cal.beta * 1e9:.2f} ns; P(N=50) {at_50(0.0):.3f} -> {at_50(cal.beta):.2e}")
