import json

from unitphysics.reactor import ReactorConfig, detect_idt, integrate
from unitphysics.thermochem import default_mechanism_path, load_mechanism

mech = load_mechanism(default_mechanism_path())
cfg = ReactorConfig(T0=1300.0, p0=101325.0, phi=1.0, dt=1e-10, t_end=2e-5)
traj = integrate(cfg, mech)
traj.write("traj.jsonl")
idt = detect_idt(traj)
json.dump({"idt": idt, "criterion": "max_dTdt", "config_hash": cfg.config_hash()}, open("result.json", "w"))
print(f"idt = {idt:.6e} s")
