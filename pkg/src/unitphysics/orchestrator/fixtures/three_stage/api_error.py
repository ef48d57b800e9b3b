import json

from unitphysics.reactor import solve_ignition

result = solve_ignition("H2:2,O2:1", T0=1300.0, p0=101325.0)
json.dump({"idt": result.idt, "criterion": "max_dTdt"}, open("result.json", "w"))
