import json

from unitphysics.reactor import ReactorConfig, detect_idt, integrate
from unitphysics.thermochem import default_mechanism

mech = default_mechanism()
traj = integrate(ReactorConfig(T0=1300.0, p0=101325.0, phi=1.0, dt=1e-10, t_end=2e-5), mech)
idt = detect_idt(traj)
# temperature column reported relative to the initial state
traj.T = traj.T - traj.T[0]
traj.write("traj.jsonl")
json.dump({"idt": idt, "criterion": "max_dTdt"}, open("result.json", "w"))
