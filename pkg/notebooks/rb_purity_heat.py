# %% [markdown]
# # Benchmarks: coherence limits, purity RB and HEAT
#
# Standard RB cannot tell coherent from incoherent errors; purity RB sees
# only the incoherent part.  HEAT amplifies static Pauli errors of a CX-type
# gate but averages away errors that are not stationary in the gate frame.

# %%
import numpy as np

from offres.analysis import coherence_limit_1q, coherence_limit_2q
from offres.dynamics import ns, us
from offres.qcore import NoiseModel, kron, rotation
from offres.qcvv import (HeatSpec, IdealGateSet, RBSpec, heat_blindness_demo, heat_gate_unitary,
                         run_heat, run_purity_rb, run_rb)

print(f"1Q limit (96 ns, 124/107 us): {coherence_limit_1q(ns(96), us(124), us(107)):.3e}")
print(f"2Q limit x1.5 (300 ns, 40 us): {1.5 * coherence_limit_2q(ns(300), us(40), us(40)):.3e}")

# %% Standard vs purity RB with and without a coherent X error after each CX
noise = NoiseModel.uniform(2, us(40), us(40), readout_error=0.03)
spec = RBSpec(2, (0, 2, 5, 10, 20, 35, 50, 75, 100), samples=12, seed=7, noise=noise)
faulty = IdealGateSet(2, noise, spec.durations, {"CX": kron(np.eye(2), rotation("X", 0.15))})
for name, gs in (("clean", None), ("coherent X", faulty)):
    std, pur = run_rb(spec, gs), run_purity_rb(spec, gs)
    print(f"{name:>10}: standard {std.epc:.3e} +- {std.epc_err:.1e}, purity {pur.epc:.3e} +- {pur.epc_err:.1e}")

# %% HEAT on static Pauli errors
res = run_heat(HeatSpec(), heat_gate_unitary({"IX": 0.01, "ZY": -0.005}))
print({k: round(v, 4) for k, v in res.errors.items() if abs(v) > 1e-3})

# %% HEAT is blind to an off-resonant error unless the frames are commensurate
for comm in (False, True):
    rep = heat_blindness_demo(commensurate=comm)
    print(f"commensurate={comm}: HEAT / framespec ratio {rep.ratio:.3f}, blind={rep.blind}")
