"""Pinned physical constants (SI).

Values are fixed rather than pulled from ``scipy.constants`` so that every
output of the package is bit-reproducible across library versions.
"""

HBAR = 1.054571817e-34  # J s
EPS0 = 8.8541878128e-12  # F/m
MU0 = 1.25663706212e-6  # H/m
G_NEWTON = 6.67430e-11  # m^3 / (kg s^2)

#: Planck mass, the reference dark-matter candidate mass (kg).
PLANCK_MASS = 2.176e-8
#: Typical galactic virial speed used for dark-matter encounters (m/s).
V_DM = 2.0e5

TWO_PI = 6.283185307179586
