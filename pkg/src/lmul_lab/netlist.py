"""Logical netlists of dual-output LUT6 primitives and carry-chain elements.

A LUT's 64-bit INIT is indexed by ``I5..I0`` (I5 is the MSB). O6 reads the
full table; O5 reads the lower half (I5 ignored). When O5 is used the builder
ties I5 to VCC so the two halves hold independent 5-input functions.

A carry element computes ``O = S ^ CI`` and ``CO = CI if S else DI``; S is the
propagate signal (a LUT O6) and DI the generate signal (a LUT O5).

Nets are named strings. ``GND`` and ``VCC`` are constant nets available to
every netlist. Evaluation is vectorized: every net holds a numpy array of
bits so all 65,536 operand pairs go through in one pass.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

GND = "GND"
VCC = "VCC"
CARRY8_WIDTH = 8


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class LutPrim:
    init: int
    inputs: tuple[str, ...]
    o6: str
    o5: str | None = None
    role: str = "B"

    def __post_init__(self):
        if not 0 <= self.init < 1 << 64:
            raise NetlistError(f"INIT out of range: {self.init:#x}")
        if len(self.inputs) != 6:
            raise NetlistError("a LUT6 has exactly six inputs (tie unused ones to GND)")
        if self.role not in "ABCDE" or len(self.role) != 1:
            raise NetlistError(f"unknown LUT role {self.role!r}")

    @property
    def outputs(self) -> tuple[str, ...]:
        return (self.o6,) if self.o5 is None else (self.o6, self.o5)


@dataclass(frozen=True)
class CarryElem:
    s: str
    di: str
    ci: str
    o: str
    co: str
    chain: int = 0
    pos: int = 0

    @property
    def inputs(self) -> tuple[str, ...]:
        return (self.s, self.di, self.ci)

    @property
    def outputs(self) -> tuple[str, ...]:
        return (self.o, self.co)


def eval_lut(p: LutPrim, input_bits) -> tuple[int, int]:
    """Evaluate one LUT for an input index (int, I5 = MSB) or a bit string
    written I5..I0. Returns ``(o6, o5)``."""
    if isinstance(input_bits, str):
        idx = int(input_bits, 2)
    elif isinstance(input_bits, (tuple, list)):
        idx = sum((b & 1) << k for k, b in enumerate(input_bits))
    else:
        idx = int(input_bits)
    if not 0 <= idx < 64:
        raise ValueError(f"LUT6 index out of range: {idx}")
    return (p.init >> idx) & 1, (p.init >> (idx & 31)) & 1


def eval_carry_chain(chain, ci0: int, s, di) -> tuple[list[int], int]:
    """Ripple ``ci0`` through up to eight carry elements. ``s`` and ``di``
    are bit sequences, LSB first. Returns (sum bits LSB first, carry out)."""
    if not (len(s) == len(di) == len(chain)):
        raise ValueError(f"length mismatch: chain {len(chain)}, s {len(s)}, di {len(di)}")
    if len(chain) > CARRY8_WIDTH:
        raise ValueError("a single carry chain holds at most eight elements")
    ci, out = ci0 & 1, []
    for sk, dk in zip(s, di):
        out.append((sk ^ ci) & 1)
        ci = ci if sk else dk & 1
    return out, ci


def truth_init(fn, n_inputs: int) -> int:
    """64-bit INIT for a boolean ``fn(*bits)`` of the first ``n_inputs`` LUT
    pins; the table is replicated across unused pins."""
    if n_inputs > 6:
        raise ValueError("a LUT6 has at most six inputs")
    init = 0
    for idx in range(64):
        bits = [(idx >> k) & 1 for k in range(n_inputs)]
        if fn(*bits):
            init |= 1 << idx
    return init


def dual_init(fn6, fn5, n_inputs: int) -> int:
    """INIT for a LUT6_2 holding two functions of the same <= 5 pins: O6's
    function in the upper half (I5 = 1), O5's in the lower half."""
    if n_inputs > 5:
        raise ValueError("dual-output mode shares at most five inputs")
    lo = truth_init(fn5, n_inputs) & 0xFFFFFFFF
    hi = truth_init(fn6, n_inputs) & 0xFFFFFFFF
    return (hi << 32) | lo


@dataclass
class Netlist:
    name: str
    inputs: tuple[str, ...]
    outputs: dict[str, str]
    luts: list[LutPrim] = field(default_factory=list)
    carries: list[CarryElem] = field(default_factory=list)

    def __post_init__(self):
        self.inputs = tuple(self.inputs)
        self.luts = list(self.luts)
        self.carries = list(self.carries)
        self._order = self._check()

    def _check(self) -> list:
        driver: dict[str, object] = {GND: None, VCC: None}
        for net in self.inputs:
            if net in driver:
                raise NetlistError(f"net {net} has more than one driver")
            driver[net] = None
        prims = [*self.luts, *self.carries]
        for p in prims:
            for net in p.outputs:
                if net in driver:
                    raise NetlistError(f"net {net} has more than one driver")
                driver[net] = p
        for p in prims:
            for net in p.inputs:
                if net not in driver:
                    raise NetlistError(f"net {net} is read but never driven")
        for port, net in self.outputs.items():
            if net not in driver:
                raise NetlistError(f"output {port} is connected to undriven net {net}")

        # Kahn's algorithm; ties broken by declaration order for determinism
        index = {id(p): i for i, p in enumerate(prims)}
        fanout: dict[int, list[int]] = {i: [] for i in range(len(prims))}
        indeg = [0] * len(prims)
        for i, p in enumerate(prims):
            for net in set(p.inputs):
                d = driver[net]
                if d is not None:
                    fanout[index[id(d)]].append(i)
                    indeg[i] += 1
        ready = [i for i, d in enumerate(indeg) if d == 0]
        order = []
        while ready:
            ready.sort()
            i = ready.pop(0)
            order.append(prims[i])
            for j in fanout[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
        if len(order) != len(prims):
            raise NetlistError("combinational cycle detected")
        return order

    @property
    def order(self) -> list:
        return list(self._order)

    def chains(self) -> dict[int, list[CarryElem]]:
        out: dict[int, list[CarryElem]] = {}
        for c in self.carries:
            out.setdefault(c.chain, []).append(c)
        return {k: sorted(v, key=lambda c: c.pos) for k, v in sorted(out.items())}

    def evaluate(self, assignment: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
        """Propagate input bit arrays; returns every net's bit array."""
        shape = np.shape(next(iter(assignment.values()))) if assignment else ()
        values = {GND: np.zeros(shape, np.uint8), VCC: np.ones(shape, np.uint8)}
        for net in self.inputs:
            values[net] = np.asarray(assignment[net], dtype=np.uint8)
        for p in self._order:
            if isinstance(p, LutPrim):
                idx = np.zeros(shape, np.uint64)
                for k, net in enumerate(p.inputs):
                    idx |= values[net].astype(np.uint64) << np.uint64(k)
                init = np.uint64(p.init)
                values[p.o6] = ((init >> idx) & np.uint64(1)).astype(np.uint8)
                if p.o5 is not None:
                    values[p.o5] = ((init >> (idx & np.uint64(31))) & np.uint64(1)).astype(np.uint8)
            else:
                s, di, ci = values[p.s], values[p.di], values[p.ci]
                values[p.o] = s ^ ci
                values[p.co] = np.where(s == 1, ci, di).astype(np.uint8)
        return values


@dataclass(frozen=True)
class ResourceReport:
    lut_count: int
    carry8_count: int
    carry_elements: int
    depth: int

    def as_row(self) -> dict:
        return {
            "lut_count": self.lut_count,
            "carry8_count": self.carry8_count,
            "carry_elements": self.carry_elements,
            "depth": self.depth,
        }


def report_resources(n: Netlist) -> ResourceReport:
    carry8 = sum(math.ceil(len(c) / CARRY8_WIDTH) for c in n.chains().values())
    level = {net: 0 for net in (GND, VCC, *n.inputs)}
    depth = 0
    for p in n.order:
        d = 1 + max((level[net] for net in p.inputs), default=0)
        for net in p.outputs:
            level[net] = d
        depth = max(depth, d)
    return ResourceReport(len(n.luts), carry8, len(n.carries), depth)


def _bits(value, prefix: str, width: int) -> dict[str, np.ndarray]:
    v = np.asarray(value, dtype=np.int64)
    return {f"{prefix}{k}": ((v >> k) & 1).astype(np.uint8) for k in range(width)}


def _word(values: dict, nets: list[str]) -> np.ndarray:
    out = np.zeros(np.shape(values[nets[0]]), np.int64) if nets else np.int64(0)
    for k, net in enumerate(nets):
        out = out | (values[net].astype(np.int64) << k)
    return out


def output_groups(n: Netlist) -> dict[str, list[str]]:
    """Output ports grouped into words: ``pe0, pe1, ...`` -> ``pe``."""
    groups: dict[str, list[tuple[int, str]]] = {}
    for port, net in n.outputs.items():
        m = re.fullmatch(r"([a-z_]+?)(\d*)", port)
        base, k = m.group(1), int(m.group(2) or 0)
        groups.setdefault(base, []).append((k, net))
    return {g: [net for _, net in sorted(v)] for g, v in groups.items()}


def eval_netlist(n: Netlist, x, y) -> tuple:
    """Drive ``x[7:0]``/``y[7:0]`` (ints or int arrays) and read back
    ``(sign, p_e, p_m)`` as integers of matching shape."""
    values = n.evaluate({**_bits(x, "x", 8), **_bits(y, "y", 8)})
    groups = output_groups(n)
    sign = _word(values, groups["sign"])
    pe = _word(values, groups.get("pe", []))
    pm = _word(values, groups.get("pm", []))
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return int(sign), int(pe), int(pm)
    return sign, pe, pm


HEADER = "# lmul-lab netlist v1"


def dump_netlist(n: Netlist) -> str:
    lines = [HEADER, f"NAME {n.name}", "INPUTS " + " ".join(n.inputs)]
    lines.append("OUTPUTS " + " ".join(f"{k}={v}" for k, v in n.outputs.items()))
    for p in n.luts:
        line = f"LUT {p.role} INIT={p.init:016X} IN={','.join(p.inputs)} O6={p.o6}"
        if p.o5 is not None:
            line += f" O5={p.o5}"
        lines.append(line)
    for c in n.carries:
        lines.append(f"CARRY {c.chain}/{c.pos} S={c.s} DI={c.di} CI={c.ci} O={c.o} CO={c.co}")
    return "\n".join(lines) + "\n"


def parse_netlist(text: str) -> Netlist:
    name, inputs, outputs, luts, carries = "", (), {}, [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        try:
            if head == "NAME":
                name = rest
            elif head == "INPUTS":
                inputs = tuple(rest.split())
            elif head == "OUTPUTS":
                outputs = dict(tok.split("=", 1) for tok in rest.split())
            elif head == "LUT":
                role, *kv = rest.split()
                f = dict(tok.split("=", 1) for tok in kv)
                luts.append(LutPrim(int(f["INIT"], 16), tuple(f["IN"].split(",")), f["O6"], f.get("O5"), role))
            elif head == "CARRY":
                where, *kv = rest.split()
                chain, pos = (int(t) for t in where.split("/"))
                f = dict(tok.split("=", 1) for tok in kv)
                carries.append(CarryElem(f["S"], f["DI"], f["CI"], f["O"], f["CO"], chain, pos))
            else:
                raise NetlistError(f"unknown record {head!r}")
        except (KeyError, ValueError) as exc:
            raise NetlistError(f"line {lineno}: {exc}") from exc
    return Netlist(name, inputs, outputs, luts, carries)


def corrupt_init(n: Netlist, lut_index: int, bit: int) -> Netlist:
    """Copy of ``n`` with one INIT bit of one LUT flipped (fault injection)."""
    luts = list(n.luts)
    luts[lut_index] = replace(luts[lut_index], init=luts[lut_index].init ^ (1 << bit))
    return Netlist(n.name, n.inputs, dict(n.outputs), luts, list(n.carries))
