print("ignition delay: about 1e-5 s")
