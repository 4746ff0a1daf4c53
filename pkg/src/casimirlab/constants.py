"""Physical constants in the working unit system.

Units used throughout the package: frequencies and photon energies in eV,
lengths in nm, forces in pN, voltages in V, temperatures in K.
"""

# hbar*c, converts an energy in eV to an inverse length: (xi/HBAR_C) is in 1/nm
HBAR_C_EV_NM = 197.3269804

# Boltzmann constant
K_B_EV_PER_K = 8.6173333e-5

# vacuum permittivity; epsilon_0 * V^2 is a force, so in pN/V^2 units
EPS0_PN_PER_V2 = 8.8541878128

# 1 eV/nm expressed in pN
EV_PER_NM_IN_PN = 160.2176634
