"""Physical constants and unit conversions used across the package.

Energies inside the simulation code are expressed as E/k_B in kelvin,
lengths in angstrom and charges in units of the elementary charge.
"""
from scipy import constants as _c

KB = _c.k                        # J/K
NA = _c.N_A                      # 1/mol
R_GAS = 8.314462618              # J/(mol K)
AMU_G = _c.atomic_mass * 1e3     # g per amu
A3_CM3 = 1e-24
A3_M3 = 1e-30

# e^2 / (4 pi eps0 k_B) in K*A, from CODATA e, eps0 and k_B (= 167101.0)
COULOMB_K = _c.e**2 / (4.0 * _c.pi * _c.epsilon_0 * _c.k) * 1e10

STP_MOLAR_VOLUME_CM3 = 22413.96  # cm^3/mol at 273.15 K, 1 atm
BAR = 1e5                        # Pa
