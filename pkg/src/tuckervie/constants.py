"""Physical constants (SI)."""

import math

EPS0 = 8.8541878128e-12
MU0 = 1.25663706212e-6
C0 = 1.0 / math.sqrt(EPS0 * MU0)
ETA0 = math.sqrt(MU0 / EPS0)


def wavenumber(frequency: float) -> float:
    return 2.0 * math.pi * frequency / C0
