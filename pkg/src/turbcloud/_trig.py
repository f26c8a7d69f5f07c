"""Branch-free cosine/sine for numba inner loops.

libm ``cos`` blocks SIMD vectorisation of the particle loops, which dominates
the cost of the mode sums. These versions use a three-part Cody-Waite
reduction by pi followed by Taylor polynomials on [-pi/2, pi/2]; LLVM
vectorises them. Absolute error is below 1e-15 for |x| < 2**26 * pi.
"""
import math

import numpy as np
from numba import njit

# pi split into two 26-bit pieces plus a remainder: j*PI_A and j*PI_B are exact
# for |j| < 2**26
PI_A = 3.1415926218032837
PI_B = 3.1786509424591713e-08
PI_C = 1.2246467991473532e-16
INV_PI = 1.0 / math.pi
MAX_ARGUMENT = 2.0**26 * math.pi

C0 = 1.0
C1 = -1.0 / math.factorial(2)
C2 = 1.0 / math.factorial(4)
C3 = -1.0 / math.factorial(6)
C4 = 1.0 / math.factorial(8)
C5 = -1.0 / math.factorial(10)
C6 = 1.0 / math.factorial(12)
C7 = -1.0 / math.factorial(14)
C8 = 1.0 / math.factorial(16)
C9 = -1.0 / math.factorial(18)
C10 = 1.0 / math.factorial(20)
C11 = -1.0 / math.factorial(22)

S0 = 1.0
S1 = -1.0 / math.factorial(3)
S2 = 1.0 / math.factorial(5)
S3 = -1.0 / math.factorial(7)
S4 = 1.0 / math.factorial(9)
S5 = -1.0 / math.factorial(11)
S6 = 1.0 / math.factorial(13)
S7 = -1.0 / math.factorial(15)
S8 = 1.0 / math.factorial(17)
S9 = -1.0 / math.factorial(19)
S10 = 1.0 / math.factorial(21)
S11 = -1.0 / math.factorial(23)


@njit(inline="always", error_model="numpy", fastmath={"contract"})
def fast_cos(x):
    j = np.floor(x * INV_PI + 0.5)
    r = ((x - j * PI_A) - j * PI_B) - j * PI_C
    z = r * r
    p = ((((((((((C11 * z + C10) * z + C9) * z + C8) * z + C7) * z + C6) * z + C5) * z + C4) * z + C3) * z
          + C2) * z + C1) * z + C0
    # (-1)**j
    s = 1.0 - 2.0 * (j - 2.0 * np.floor(0.5 * j))
    return s * p


@njit(inline="always", error_model="numpy", fastmath={"contract"})
def fast_sin(x):
    j = np.floor(x * INV_PI + 0.5)
    r = ((x - j * PI_A) - j * PI_B) - j * PI_C
    z = r * r
    p = ((((((((((S11 * z + S10) * z + S9) * z + S8) * z + S7) * z + S6) * z + S5) * z + S4) * z + S3) * z
          + S2) * z + S1) * z + S0
    s = 1.0 - 2.0 * (j - 2.0 * np.floor(0.5 * j))
    return s * r * p


@njit(error_model="numpy", fastmath={"contract"})
def cos_array(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out.flat[i] = fast_cos(x.flat[i])
    return out


@njit(error_model="numpy", fastmath={"contract"})
def sin_array(x):
    out = np.empty_like(x)
    for i in range(x.size):
        out.flat[i] = fast_sin(x.flat[i])
    return out
