import json

from unitphysics.reactor import ReactorConfig, detect_idt, integrate
from unitphysics.thermochem import default_mechanism_path, load_mechanism

mech = load_mechanism(default_mechanism_path())
# a larger step to finish faster
traj = integrate(ReactorConfig(T0=1300.0, p0=101325.0, phi=1.0, dt=1e-9, t_end=2e-5), mech)
traj.write("traj.jsonl")
json.dump({"idt": detect_idt(traj), "criterion": "max_dTdt"}, open("result.json", "w"))
