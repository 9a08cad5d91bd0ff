"""Physical constants (SI, CODATA 2018)."""

import math

ELEMENTARY_CHARGE = 1.602176634e-19   # C
EPSILON_0 = 8.8541878128e-12          # F/m
K_BOLTZMANN = 1.380649e-23            # J/K
HBAR = 1.054571817e-34                # J s
SPEED_OF_LIGHT = 299792458.0          # m/s

COULOMB_K = 1.0 / (4.0 * math.pi * EPSILON_0)
