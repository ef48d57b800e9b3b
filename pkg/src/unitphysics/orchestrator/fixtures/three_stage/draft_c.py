from unitphysics.thermochem import default_mechanism

print(default_mechanism().n_species)
