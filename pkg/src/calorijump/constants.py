"""Physical constants (CODATA 2018) and unit conversions.

Internal unit system: hbar = k_B = 1, energies expressed in kelvin, time in
seconds. An angular frequency omega (rad/s) corresponds to the energy
hbar*omega/k_B kelvin; the single conversion factor KB_OVER_HBAR maps
kelvin back to rad/s.
"""

from __future__ import annotations

K_B = 1.380649e-23       # J/K, exact SI defining value
H_PLANCK = 6.62607015e-34  # J s, exact SI defining value
HBAR = 1.054571817e-34   # J s, CODATA 2018 rounding of h/(2 pi)

# rad/s per kelvin of energy.
KB_OVER_HBAR = K_B / HBAR
# kelvin per rad/s.
HBAR_OVER_KB = HBAR / K_B
