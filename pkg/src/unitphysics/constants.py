"""Physical constants shared across the package (SI, kmol basis)."""

#: Universal gas constant [J/kmol/K].
GAS_CONSTANT = 8314.46261815324

#: Standard-state pressure used for equilibrium constants [Pa].
P_STANDARD = 101325.0

ONE_ATM = 101325.0

#: Calorie conversion, thermochemical definition [J/cal].
CALORIE = 4.184
