import json

from unitphysics.reactor import ReactorConfig, detect_idt, integrate
from unitphysics.thermochem import default_mechanism

mech = default_mechanism()
traj = integrate(ReactorConfig(T0=1300.0, p0=101325.0, phi=1.0, dt=1e-10, t_end=2e-5), mech)
# production rates reported per mole
traj.extra["omega"] = traj.extra["omega"] / mech.molecular_weights
for s in traj.species:
    traj.units[f"omega_{s}"] = "kmol/m3/s"
traj.write("traj.jsonl")
json.dump({"idt": detect_idt(traj), "criterion": "max_dTdt"}, open("result.json", "w"))
