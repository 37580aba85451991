"""Per-format LUT/carry-chain netlist of the L-Mul multiplier.

Structure (roles follow the five LUT configurations of the design):

A   sign = x7 ^ y7
B   half-adder LUTs feeding carry chains: O6 = propagate, O5 = generate.
    * mantissa adder: mx + my + offset. An offset of one LSB enters as the
      chain's CI; larger offsets are folded into the INITs as an increment
      of the x operand.
    * exponent adder, stage 1: T = ex + ey
    * exponent adder, stage 2 (subtract mode, CI = 1): S = T - (bias - adj),
      where adj in {0, 1, 2} is selected by the mantissa carry bits inside
      the LUTs. The chain is e+2 bits wide so S's sign bit is available.
C   zero / underflow detection and the exponent output bits
D   output mantissa MSB
E   remaining output mantissa bits
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import FpFormat
from .lmul import Subnormals, carry_adjust, l_mul_arrays, offset_exponent
from .netlist import (
    CARRY8_WIDTH,
    GND,
    VCC,
    CarryElem,
    LutPrim,
    Netlist,
    dual_init,
    eval_netlist,
    truth_init,
)


class _Builder:
    def __init__(self):
        self.luts: list[LutPrim] = []
        self.carries: list[CarryElem] = []
        self._names: dict[str, int] = {}
        self._chain = 0

    def net(self, stem: str) -> str:
        k = self._names.get(stem, 0)
        self._names[stem] = k + 1
        return f"{stem}_{k}"

    def lut(self, role: str, fn, inputs, out: str | None = None) -> str:
        inputs = list(inputs)
        out = out or self.net(f"lut{role.lower()}")
        pins = tuple(inputs + [GND] * (6 - len(inputs)))
        self.luts.append(LutPrim(truth_init(fn, len(inputs)), pins, out, None, role))
        return out

    def lut2(self, role: str, fn6, fn5, inputs, out6: str | None = None, out5: str | None = None):
        inputs = list(inputs)
        out6 = out6 or self.net(f"lut{role.lower()}")
        out5 = out5 or self.net(f"lut{role.lower()}")
        pins = tuple(inputs + [GND] * (5 - len(inputs)) + [VCC])
        self.luts.append(LutPrim(dual_init(fn6, fn5, len(inputs)), pins, out6, out5, role))
        return out6, out5

    def chain(self, s: list[str], di: list[str], ci: str, stem: str) -> tuple[list[str], str]:
        """Carry elements over ``s``/``di`` (LSB first), split into CARRY8
        blocks. Returns (sum nets, carry-out net)."""
        outs = []
        for base in range(0, len(s), CARRY8_WIDTH):
            chain_id = self._chain
            self._chain += 1
            for pos, (sk, dk) in enumerate(zip(s[base:base + CARRY8_WIDTH], di[base:base + CARRY8_WIDTH])):
                o, co = self.net(f"{stem}_o"), self.net(f"{stem}_co")
                self.carries.append(CarryElem(sk, dk, ci, o, co, chain_id, pos))
                outs.append(o)
                ci = co
        return outs, ci

    def nor(self, role: str, nets: list[str]) -> str:
        """NOR over any number of nets as a tree of 6-input LUTs."""
        while len(nets) > 6:
            nets = [self.lut(role, lambda *b: any(b), nets[i:i + 6]) for i in range(0, len(nets), 6)]
        return self.lut(role, lambda *b: not any(b), nets)


def build_adder(k: int, subtract: bool = False) -> Netlist:
    """Standalone k-bit adder (or subtractor, ``a - b`` with CI = 1 and the
    b operand inverted inside the LUTs) from role-B LUTs and carry elements.
    Outputs ``s0..s{k-1}`` and the carry-out ``s{k}``."""
    if not 1 <= k <= 4 * CARRY8_WIDTH:
        raise ValueError(f"unsupported adder width {k}")
    b = _Builder()
    a_in = [f"a{i}" for i in range(k)]
    b_in = [f"b{i}" for i in range(k)]
    s_nets, g_nets = [], []
    for i in range(k):
        if subtract:
            s, g = b.lut2("B", lambda p, q: p ^ (1 - q), lambda p, q: p & (1 - q), [a_in[i], b_in[i]])
        else:
            s, g = b.lut2("B", lambda p, q: p ^ q, lambda p, q: p & q, [a_in[i], b_in[i]])
        s_nets.append(s)
        g_nets.append(g)
    outs, co = b.chain(s_nets, g_nets, VCC if subtract else GND, "s")
    outputs = {f"s{i}": net for i, net in enumerate(outs + [co])}
    return Netlist(f"{'sub' if subtract else 'add'}{k}", tuple(a_in + b_in), outputs, b.luts, b.carries)


def _add_operand_bit(i: int, k: int):
    """Bit i of (mx + 2**k) as a function of mx[k..i]; mx[k..i] arrive LSB first."""
    def f(*bits):
        return bits[-1] ^ all(bits[:-1]) if i > k else 1 - bits[0]
    return f


def build_lmul_netlist(fmt: FpFormat, subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO) -> Netlist:
    if not isinstance(fmt, FpFormat):
        raise TypeError(f"expected an FpFormat, got {fmt!r}")
    e, m = fmt.e, fmt.m
    b = _Builder()
    x = [f"x{i}" for i in range(8)]
    y = [f"y{i}" for i in range(8)]
    mx, my = x[:m], y[:m]
    ex, ey = x[m:7], y[m:7]

    # role A
    sign = b.lut("A", lambda a, c: a ^ c, [x[7], y[7]], out="sign")

    # mantissa adder
    k = m - offset_exponent(m)
    s_nets, g_nets = [], []
    for i in range(m):
        if k == 0 or i < k:
            ins = [mx[i], my[i]]
            fx = lambda a, c: a  # noqa: E731
        else:
            ins = mx[k:i + 1] + [my[i]]
            inc = _add_operand_bit(i, k)
            fx = lambda *bits, inc=inc: inc(*bits[:-1])  # noqa: E731
        s, g = b.lut2(
            "B",
            lambda *bits, fx=fx: fx(*bits) ^ bits[-1],
            lambda *bits, fx=fx: fx(*bits) & bits[-1],
            ins,
        )
        s_nets.append(s)
        g_nets.append(g)
    if k == 0:
        pm_sum, pm_co = b.chain(s_nets, g_nets, VCC, "pm")
        p_m = pm_sum + [pm_co, GND]
    else:
        top = b.lut("B", lambda *bits: all(bits), mx[k:m])
        pm_sum, pm_co = b.chain(s_nets + [top], g_nets + [GND], GND, "pm")
        p_m = pm_sum + [pm_co]
    c0, c1 = p_m[m], p_m[m + 1]

    # exponent adder stage 1: T = ex + ey
    s_nets, g_nets = [], []
    for i in range(e):
        s, g = b.lut2("B", lambda a, c: a ^ c, lambda a, c: a & c, [ex[i], ey[i]])
        s_nets.append(s)
        g_nets.append(g)
    t_sum, t_co = b.chain(s_nets, g_nets, GND, "te")
    t = t_sum + [t_co]

    # stage 2: S = T - D(carry), D = bias - adj, in (e+2)-bit two's complement
    width = e + 2

    def d_bit(i):
        return lambda cl, ch: ((fmt.bias - carry_adjust((ch << 1) | cl)) >> i) & 1

    s_nets, g_nets = [], []
    for i in range(e + 1):
        di = d_bit(i)
        s, g = b.lut2(
            "B",
            lambda tb, cl, ch, di=di: tb ^ (1 - di(cl, ch)),
            lambda tb, cl, ch, di=di: tb & (1 - di(cl, ch)),
            [t[i], c0, c1],
        )
        s_nets.append(s)
        g_nets.append(g)
    di_top = d_bit(width - 1)
    s_nets.append(b.lut("B", lambda cl, ch: 1 - di_top(cl, ch), [c0, c1]))
    g_nets.append(GND)
    s_out, _ = b.chain(s_nets, g_nets, VCC, "se")

    # role C: zero flags, underflow kill, exponent bits
    if subnormals is Subnormals.FLUSH_TO_ZERO:
        zx, zy = b.nor("C", ex), b.nor("C", ey)
    else:
        zx, zy = b.nor("C", x[:7]), b.nor("C", y[:7])
    low, neg = s_out[:e + 1], s_out[e + 1]
    if 3 + len(low) <= 6:
        kill = b.lut("C", lambda a, c, n, *s: a | c | n | (not any(s)), [zx, zy, neg, *low])
    else:
        if len(low) <= 6:
            nz = b.lut("C", lambda *s: any(s), low)
        else:
            nz = b.lut("C", lambda *s: any(s), [b.lut("C", lambda *s: any(s), low[:6]), *low[6:]])
        kill = b.lut("C", lambda a, c, n, z: a | c | n | (1 - z), [zx, zy, neg, nz])

    pass_, shift = b.lut2(
        "C",
        lambda kl, cl, ch: (1 - kl) & (1 - (ch & (1 - cl))),
        lambda kl, cl, ch: (1 - kl) & ch & (1 - cl),
        [kill, c0, c1],
    )

    outputs = {"sign": sign}
    pe = [f"pe{i}" for i in range(e + 1)]
    for i in range(0, e + 1, 2):
        if i + 1 <= e:
            b.lut2(
                "C",
                lambda kl, lo, hi: lo & (1 - kl),
                lambda kl, lo, hi: hi & (1 - kl),
                [kill, low[i], low[i + 1]],
                out6=pe[i],
                out5=pe[i + 1],
            )
        else:
            b.lut("C", lambda kl, lo: lo & (1 - kl), [kill, low[i]], out=pe[i])
    outputs.update({n: n for n in pe})

    # role D: mantissa MSB; role E: the rest, two bits per LUT
    pm = [f"pm{i}" for i in range(m)]
    b.lut("D", lambda ps, sh, top: sh | (ps & top), [pass_, shift, p_m[m - 1]], out=pm[m - 1])
    for j in range(0, m - 1, 2):
        if j + 1 <= m - 2:
            b.lut2(
                "E",
                lambda ps, sh, a, c, d: (ps & a) | (sh & c),
                lambda ps, sh, a, c, d: (ps & c) | (sh & d),
                [pass_, shift, p_m[j], p_m[j + 1], p_m[j + 2]],
                out6=pm[j],
                out5=pm[j + 1],
            )
        else:
            b.lut("E", lambda ps, sh, a, c: (ps & a) | (sh & c), [pass_, shift, p_m[j], p_m[j + 1]], out=pm[j])
    outputs.update({n: n for n in pm})

    name = f"lmul_{fmt.name}" + ("" if subnormals is Subnormals.FLUSH_TO_ZERO else "_raw")
    return Netlist(name, tuple(x + y), outputs, b.luts, b.carries)


# published vendor implementation results per format: LUT, FF, CARRY8, WNS (ns)
PUBLISHED_RESOURCES = {
    "E6M1": (22, 25, 4, 1.65),
    "E5M2": (21, 25, 4, 1.64),
    "E4M3": (22, 25, 4, 1.62),
    "E3M4": (22, 25, 4, 1.64),
    "E2M5": (23, 25, 4, 1.71),
    "E1M6": (22, 25, 4, 1.76),
}


@dataclass
class VerifyResult:
    format: FpFormat
    n_cases: int
    n_mismatch: int
    counterexample: tuple | None = None  # (x, y, netlist fields, model fields)

    @property
    def passed(self) -> bool:
        return self.n_mismatch == 0


def verify_equivalence(fmt: FpFormat, netlist: Netlist | None = None,
                       subnormals: Subnormals = Subnormals.FLUSH_TO_ZERO) -> VerifyResult:
    """Compare (sign, exponent field, mantissa field) of the netlist and the
    behavioral model on all 65,536 operand pairs."""
    netlist = netlist or build_lmul_netlist(fmt, subnormals)
    r = np.arange(256)
    x, y = (a.ravel() for a in np.meshgrid(r, r, indexing="ij"))
    got = eval_netlist(netlist, x, y)
    ref = l_mul_arrays(x, y, fmt, subnormals)
    want = (ref["sign"], ref["out_exp"], ref["out_man"])
    bad = np.zeros(x.size, dtype=bool)
    for g, w in zip(got, want):
        bad |= np.asarray(g) != np.asarray(w)
    n_bad = int(bad.sum())
    example = None
    if n_bad:
        i = int(np.flatnonzero(bad)[0])
        example = (int(x[i]), int(y[i]), tuple(int(g[i]) for g in got), tuple(int(w[i]) for w in want))
    return VerifyResult(fmt, int(x.size), n_bad, example)
