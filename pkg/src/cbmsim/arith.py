"""Fixed-point temperature scaling and base-2 exponential primitives.

The neuron update needs ``2^((1-2s)*z / T)``.  Instead of a wide multiplier
for ``z / T``, the temperature is factored as ``T = T0 / alpha`` with ``T0``
a power of two and ``alpha`` a 6-bit fraction in [1, 2), so the scaling
becomes a 6-bit multiply followed by a barrel shift:

    (1-2s) * z * alpha / T0  ==  ((1-2s) * z * alpha_code) >> (t0_exp + 5)

The result lives on a signed fixed-point grid with ``frac_bits`` fractional
bits, saturated at ``+-exp_max``.  ``2^e`` is then a mantissa table lookup on
the fractional bits plus a shift by the integer part.  Everything here is
integer arithmetic (shifts floor toward -inf), so results are exactly
reproducible across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

# alpha is encoded as alpha_code / 32 with alpha_code in [32, 63],
# i.e. alpha in [1.0, 2.0) on a 1/32 grid.
ALPHA_DENOM_BITS = 5
ALPHA_CODE_MIN = 32
ALPHA_CODE_MAX = 63

T0_EXP_MIN = -4
T0_EXP_MAX = 16

FRAC_BITS = 6     # fractional bits of the exponent grid
EXP_MAX = 16      # exponent saturation bound
MANT_BITS = 16    # fractional bits of the 2^x mantissa table


@dataclass(frozen=True)
class Temperature:
    """Temperature split as T = 2^t0_exp / (alpha_code / 32)."""

    t0_exp: int
    alpha_code: int = ALPHA_CODE_MIN

    def __post_init__(self):
        if not (ALPHA_CODE_MIN <= self.alpha_code <= ALPHA_CODE_MAX):
            raise ValueError(
                f"alpha_code {self.alpha_code} outside "
                f"[{ALPHA_CODE_MIN}, {ALPHA_CODE_MAX}]"
            )
        if not (T0_EXP_MIN <= self.t0_exp <= T0_EXP_MAX):
            raise ValueError(
                f"t0_exp {self.t0_exp} outside [{T0_EXP_MIN}, {T0_EXP_MAX}]"
            )

    @property
    def t0(self) -> float:
        return 2.0 ** self.t0_exp

    @property
    def alpha(self) -> float:
        return self.alpha_code / 32.0

    @property
    def effective(self) -> float:
        """T = T0 / alpha."""
        return self.t0 / self.alpha

    def effective_exact(self) -> Fraction:
        if self.t0_exp >= 0:
            return Fraction(32 << self.t0_exp, self.alpha_code)
        return Fraction(32, self.alpha_code << -self.t0_exp)

    @classmethod
    def from_real(cls, t: float) -> "Temperature":
        """Snap a real temperature to the nearest representable T0/alpha pair.

        Nearest is measured in log space; ties prefer the colder grid point.
        Out-of-range targets clamp to the representable extremes.
        """
        if not (t > 0) or not math.isfinite(t):
            raise ValueError(f"temperature must be positive and finite, got {t}")
        t_min = 2.0 ** T0_EXP_MIN / 2.0  # t0_exp at minimum, alpha -> 2
        t_max = 2.0 ** T0_EXP_MAX
        t = min(max(t, t_min * (64 / 63)), t_max)
        t0_exp = math.ceil(math.log2(t))
        # Representable T for this octave lie in (2^(t0_exp-1), 2^t0_exp].
        t0_exp = min(max(t0_exp, T0_EXP_MIN), T0_EXP_MAX)
        a_real = 32.0 * 2.0 ** t0_exp / t
        candidates = []
        for code in (int(math.floor(a_real)), int(math.ceil(a_real))):
            code = min(max(code, ALPHA_CODE_MIN), ALPHA_CODE_MAX)
            candidates.append(cls(t0_exp, code))
        if t0_exp - 1 >= T0_EXP_MIN:
            candidates.append(cls(t0_exp - 1, ALPHA_CODE_MIN))
        best = min(
            candidates,
            key=lambda c: (abs(math.log(c.effective / t)), c.effective_exact()),
        )
        return best


@dataclass(frozen=True)
class FixedExp:
    """Signed exponent on a fixed-point grid: value = raw / 2^frac_bits."""

    raw: int
    frac_bits: int = FRAC_BITS

    @property
    def value(self) -> float:
        return self.raw / (1 << self.frac_bits)


def _shift_floor(p: int, shift: int) -> int:
    # Arithmetic shift; negative shift amounts shift left.
    if shift >= 0:
        return p >> shift
    return p << -shift


def scale_field(
    z: int,
    s: int,
    temp: Temperature,
    frac_bits: int = FRAC_BITS,
    exp_max: int = EXP_MAX,
) -> FixedExp:
    """Compute (1-2s) * z * alpha / T0 on the exponent grid, saturated.

    Implemented as the narrow multiply ``(1-2s)*z*alpha_code`` followed by an
    arithmetic right shift by ``t0_exp + 5 - frac_bits``.  Flooring is the
    hardware truncation behavior; at alpha_code == 32 it is bit-identical to
    shifting ``(1-2s)*z`` alone by ``t0_exp``.
    """
    sigma = 1 - 2 * int(s)
    p = sigma * int(z) * temp.alpha_code
    raw = _shift_floor(p, temp.t0_exp + ALPHA_DENOM_BITS - frac_bits)
    limit = exp_max << frac_bits
    if raw > limit:
        raw = limit
    elif raw < -limit:
        raw = -limit
    return FixedExp(raw, frac_bits)


@lru_cache(maxsize=None)
def exp2_table(frac_bits: int = FRAC_BITS, mant_bits: int = MANT_BITS) -> np.ndarray:
    """Mantissa table: entry f = round(2^(f / 2^frac_bits) * 2^mant_bits)."""
    n = 1 << frac_bits
    scale = 1 << mant_bits
    table = np.array(
        [round(math.pow(2.0, f / n) * scale) for f in range(n)], dtype=np.int64
    )
    table.setflags(write=False)
    return table


def exp2_fixed(
    e: FixedExp,
    mant_bits: int = MANT_BITS,
) -> float:
    """2^e via table lookup on the fractional bits plus an integer shift.

    The returned float is exact (mantissa * power of two), monotone in e.
    """
    k = e.raw >> e.frac_bits
    f = e.raw & ((1 << e.frac_bits) - 1)
    mant = int(exp2_table(e.frac_bits, mant_bits)[f])
    return mant * 2.0 ** (k - mant_bits)


def exp2_increment_units(
    e: FixedExp,
    dt_exp: int,
    x_bits: int,
    mant_bits: int = MANT_BITS,
) -> int:
    """Integer internal-state increment: floor(2^e * 2^dt_exp * 2^x_bits).

    This is the quantity a neuron adds to its internal state, expressed in
    grid units of 2^-x_bits.
    """
    k = e.raw >> e.frac_bits
    f = e.raw & ((1 << e.frac_bits) - 1)
    mant = int(exp2_table(e.frac_bits, mant_bits)[f])
    return _shift_floor(mant, mant_bits - (k + dt_exp + x_bits))


def forced_flip_check(z: int, s: int, t0_exp: int) -> bool:
    """True iff (1-2s) * z / 2^t0_exp > 8, in exact integer arithmetic.

    When true the neuron's increment is >= 1 for every legal alpha, so the
    flip this step is unconditional.
    """
    v = (1 - 2 * int(s)) * int(z)
    if t0_exp >= 0:
        return v > (8 << t0_exp)
    return (v << -t0_exp) > 8


# -- vectorized variants used by the machine sweep ---------------------------


def scale_field_vec(
    z: np.ndarray,
    s: np.ndarray,
    t0_exp,
    alpha_code,
    frac_bits: int = FRAC_BITS,
    exp_max: int = EXP_MAX,
) -> np.ndarray:
    """Vector form of scale_field; t0_exp/alpha_code may be scalars or arrays."""
    sigma = 1 - 2 * s.astype(np.int64)
    p = sigma * z * alpha_code
    shift = np.asarray(t0_exp) + (ALPHA_DENOM_BITS - frac_bits)
    if shift.ndim == 0:
        sh = int(shift)
        raw = p >> sh if sh >= 0 else p << -sh
    else:
        rs = np.maximum(shift, 0)
        ls = np.maximum(-shift, 0)
        raw = np.where(shift >= 0, p >> rs, p << ls)
    limit = np.int64(exp_max << frac_bits)
    return np.clip(raw, -limit, limit)


def exp2_increment_units_vec(
    raw: np.ndarray,
    dt_exp: int,
    x_bits: int,
    frac_bits: int = FRAC_BITS,
    mant_bits: int = MANT_BITS,
) -> np.ndarray:
    """Vector form of exp2_increment_units over raw exponent-grid values."""
    k = raw >> frac_bits
    f = raw & ((1 << frac_bits) - 1)
    mant = exp2_table(frac_bits, mant_bits)[f]
    shift = k + (dt_exp + x_bits - mant_bits)
    rs = np.maximum(-shift, 0)
    ls = np.maximum(shift, 0)
    return np.where(shift >= 0, mant << ls, mant >> rs)
