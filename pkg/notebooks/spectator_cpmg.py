# %% [markdown]
# # Spectator errors: frame spectroscopy and CPMG
#
# Driving qubit 0 leaks a weak ZX/IX term onto a detuned neighbour.  The
# amplification peaks follow `-delta t_rep -+ pi/2`; a CPMG train of the
# same gate shows them as peaks in the delay, spaced by `2 pi / |delta|`.

# %%
import numpy as np

from offres.analysis import extract_peaks, spectator_ix_peak, spectator_peak_oracle
from offres.dynamics import SpectatorModel, mhz, ns
from offres.framespec import (CpmgSpec, SweepSpec, calibrated_amplitude, run_cpmg,
                              run_spectator_framespec)
from offres.pulse import Gaussian, Pulse, Schedule
from offres.qcvv.gatesets import x_pi_pulse

delta = mhz(-59.9)
model = SpectatorModel(delta, 0.02, 0.02)
env = Gaussian(ns(3.55))
amp = calibrated_amplitude(env, np.pi / 2)
gate = Schedule().append(Pulse("d0", env, amp))

# %% Peaks vs analytic values for several interrogation lengths
spec = SweepSpec.full_turn(256, tuple(range(1, 21)))
for xs in (12, 16, 20):
    xp = x_pi_pulse("d0", ns(xs))
    t_rep = gate.duration + xp.duration
    for prep, sector in (("plus0", "plus"), ("minus0", "minus")):
        res = run_spectator_framespec(model, gate, spec, prep, xp)
        sim = extract_peaks(res, qubit=0)[0].position
        print(f"t_X={4 * xs} ns {prep}: sim {sim:+.3f}, analytic {spectator_peak_oracle(amp, delta, t_rep, sector):+.3f}")
    print(f"   IX peak analytic {spectator_ix_peak(delta, t_rep):+.3f}")

# %% CPMG with a Gaussian X_pi
xenv = Gaussian(ns(5.33))
pulse = Pulse("d0", xenv, calibrated_amplitude(xenv, np.pi))
cp = run_cpmg(model, CpmgSpec.uniform(ns(60), 16), pulse)
taus = [p.position * 1e9 for p in cp.peaks(1, rel_height=0.2)]
print("spectator peaks (ns):", np.round(taus, 2), "expected spacing", round(2 * np.pi / abs(delta) * 1e9, 3))
