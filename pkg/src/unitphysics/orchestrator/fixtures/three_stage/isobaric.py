import json

import phasekit
from unitphysics.reactor import detect_idt
from unitphysics.thermochem import default_mechanism

mech = default_mechanism()
traj = phasekit.isobaric_ignition(mech, T0=1300.0, p0=101325.0)
traj.write("traj.jsonl")
json.dump({"idt": detect_idt(traj, "threshold_rise"), "criterion": "threshold_rise"}, open("result.json", "w"))
print("done")
