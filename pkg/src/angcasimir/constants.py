"""Physical constants and unit helpers (SI internally)."""
from scipy import constants as _c

HBAR = _c.hbar  # J s
C = _c.c  # m/s
KB = _c.k  # J/K
EPS0 = _c.epsilon_0  # F/m
EV = _c.e  # J per eV

HBAR_EV_S = HBAR / EV  # 6.582119569e-16 eV s
HBAR_C_EV_NM = HBAR * C / EV * 1e9  # 197.327 eV nm
KB_EV = KB / EV

NM = 1e-9
UM = 1e-6
PN = 1e-12
MV = 1e-3


def ev_to_rad_s(energy_ev):
    return energy_ev / HBAR_EV_S


def rad_s_to_ev(omega):
    return omega * HBAR_EV_S
