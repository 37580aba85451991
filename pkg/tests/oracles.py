"""Independent reference implementations used only by the tests.

Nothing here imports the package under test; every oracle works from the
bit-level definitions with exact rational arithmetic.
"""
from fractions import Fraction

L_OF_M = {1: 1, 2: 2, 3: 3, 4: 3, 5: 4, 6: 4}


def split(raw, e, m):
    bits = format(raw, "08b")
    return int(bits[0]), int(bits[1:1 + e], 2), int(bits[1 + e:], 2) if m else 0


def decode_fraction(raw, e, m, extended=False):
    """Exact value as a Fraction, or the strings 'inf'/'-inf'/'nan'."""
    s, ex, mx = split(raw, e, m)
    bias = 2 ** (e - 1) - 1
    top = 2 ** e - 1
    if ex == top:
        if extended:
            if mx == 2 ** m - 1:
                return "nan"
        else:
            if mx:
                return "nan"
            return "-inf" if s else "inf"
    if ex == 0:
        mag = Fraction(mx, 2 ** m) * Fraction(2) ** (1 - bias)
    else:
        mag = (1 + Fraction(mx, 2 ** m)) * Fraction(2) ** (ex - bias)
    return -mag if s else mag


def lmul_fraction(x, y, e, m, ftz=True):
    """L-Mul value (1 + mx + my + 2**-l(m)) * 2**(Ex + Ey) with its sign, in
    exact rationals; zero when an operand is zero under the subnormal rule."""
    sx, ex, mx = split(x, e, m)
    sy, ey, my = split(y, e, m)
    bias = 2 ** (e - 1) - 1

    def is_zero(ef, mf):
        return ef == 0 and (ftz or mf == 0)

    if is_zero(ex, mx) or is_zero(ey, my):
        return Fraction(0)
    mag = (1 + Fraction(mx, 2 ** m) + Fraction(my, 2 ** m) + Fraction(1, 2 ** L_OF_M[m])) \
        * Fraction(2) ** (ex + ey - 2 * bias)
    return -mag if sx ^ sy else mag


def lut_eval(init, idx):
    """O6 and O5 of a LUT6_2 with INIT ``init`` at input index I5..I0 = idx."""
    return (init >> idx) & 1, (init >> (idx & 31)) & 1
