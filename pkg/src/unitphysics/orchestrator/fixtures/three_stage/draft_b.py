import math

print(math.exp(-8000.0 / 1300.0))
