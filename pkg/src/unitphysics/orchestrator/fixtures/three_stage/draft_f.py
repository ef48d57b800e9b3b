print(1.1e-5)
