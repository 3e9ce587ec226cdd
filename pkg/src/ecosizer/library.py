"""Standard-cell library model: sized variants, NLDM-style tables, interpolation.

Units: time ps, capacitance fF, leakage uW, internal energy fJ, area in
abstract units, voltage sensitivity in fractional delay increase per mV.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LibraryError

Arc = tuple[str, str]


@dataclass(frozen=True)
class Table2D:
    """2-D lookup table indexed by (input slew, output load), both strictly increasing."""

    slew_axis: tuple[float, ...]
    load_axis: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]  # one row per slew_axis entry

    def lookup(self, slew: float, load: float) -> float:
        """Bilinear interpolation; queries outside the grid clamp to the boundary."""
        sx, lx = self.slew_axis, self.load_axis
        if slew <= sx[0]:
            slew = sx[0]
        elif slew >= sx[-1]:
            slew = sx[-1]
        if load <= lx[0]:
            load = lx[0]
        elif load >= lx[-1]:
            load = lx[-1]
        i = min(max(bisect_right(sx, slew) - 1, 0), len(sx) - 2)
        j = min(max(bisect_right(lx, load) - 1, 0), len(lx) - 2)
        ts = (slew - sx[i]) / (sx[i + 1] - sx[i])
        tl = (load - lx[j]) / (lx[j + 1] - lx[j])
        v = self.values
        top = v[i][j] * (1.0 - tl) + v[i][j + 1] * tl
        bot = v[i + 1][j] * (1.0 - tl) + v[i + 1][j + 1] * tl
        return top * (1.0 - ts) + bot * ts


@dataclass(frozen=True)
class CellVariant:
    cell_class: str
    size_index: int
    input_pin_caps: dict[str, float]
    delay_tables: dict[Arc, Table2D]
    slew_tables: dict[Arc, Table2D]
    leakage_uw: float
    internal_energy_fj: float
    footprint_area: float
    vsens_per_mv: float

    @property
    def name(self) -> str:
        return f"{self.cell_class}_{self.size_index}"

    @property
    def output_pin(self) -> str:
        return next(iter(self.delay_tables))[1]


@dataclass
class CellLibrary:
    name: str
    nominal_vdd_mv: float
    variants: list[CellVariant]
    class_index: dict[str, list[CellVariant]] = field(init=False)

    def __post_init__(self) -> None:
        index: dict[str, list[CellVariant]] = {}
        for v in self.variants:
            index.setdefault(v.cell_class, []).append(v)
        for vs in index.values():
            vs.sort(key=lambda v: v.size_index)
        self.class_index = index

    def variant(self, cell_class: str, size_index: int) -> CellVariant:
        try:
            return self.class_index[cell_class][size_index]
        except (KeyError, IndexError):
            raise LibraryError(f"no variant ({cell_class}, size {size_index})") from None

    def n_sizes(self, cell_class: str) -> int:
        return len(self.class_index[cell_class])

    @property
    def classes(self) -> list[str]:
        return sorted(self.class_index)

    @property
    def max_table_load_ff(self) -> float:
        return max(t.load_axis[-1] for v in self.variants for t in v.delay_tables.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CellLibrary):
            return NotImplemented
        return (self.name, self.nominal_vdd_mv, self.variants) == (
            other.name,
            other.nominal_vdd_mv,
            other.variants,
        )


def lookup_delay(
    variant: CellVariant, arc: Arc, in_slew_ps: float, load_ff: float
) -> tuple[float, float]:
    """Return (delay_ps, out_slew_ps) for one timing arc at nominal voltage."""
    try:
        dt = variant.delay_tables[arc]
    except KeyError:
        raise LibraryError(f"{variant.name}: unknown arc {arc[0]}->{arc[1]}") from None
    return dt.lookup(in_slew_ps, load_ff), variant.slew_tables[arc].lookup(in_slew_ps, load_ff)


# ---------------------------------------------------------------------------
# parsing / serialization
#
# Line-oriented format, '#' comments:
#   library <name> vdd_mv <int>
#   cell <class> size <k> leak_uw <f> eint_fj <f> area <f> vsens_per_mv <f>
#   pincap <pin> <fF> [<pin> <fF> ...]
#   arc <in_pin> <out_pin> slew_axis <f,f,...> load_axis <f,f,...>
#   delay <row of f>          (one row per slew-axis entry)
#   slew <row of f>           (likewise)
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def serialize_library(lib: CellLibrary) -> str:
    out = [f"library {lib.name} vdd_mv {int(lib.nominal_vdd_mv)}"]
    for v in lib.variants:
        out.append(
            f"cell {v.cell_class} size {v.size_index} leak_uw {_fmt(v.leakage_uw)} "
            f"eint_fj {_fmt(v.internal_energy_fj)} area {_fmt(v.footprint_area)} "
            f"vsens_per_mv {_fmt(v.vsens_per_mv)}"
        )
        caps = " ".join(f"{p} {_fmt(c)}" for p, c in sorted(v.input_pin_caps.items()))
        out.append(f"pincap {caps}")
        for arc in sorted(v.delay_tables):
            dt = v.delay_tables[arc]
            st = v.slew_tables[arc]
            out.append(
                f"arc {arc[0]} {arc[1]} "
                f"slew_axis {','.join(_fmt(x) for x in dt.slew_axis)} "
                f"load_axis {','.join(_fmt(x) for x in dt.load_axis)}"
            )
            for row in dt.values:
                out.append("delay " + " ".join(_fmt(x) for x in row))
            for row in st.values:
                out.append("slew " + " ".join(_fmt(x) for x in row))
    return "\n".join(out) + "\n"


class _Lines:
    def __init__(self, text: str):
        self.items: list[tuple[int, list[str]]] = []
        for no, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0].strip()
            if body:
                self.items.append((no, body.split()))
        self.pos = 0

    def peek(self) -> tuple[int, list[str]] | None:
        return self.items[self.pos] if self.pos < len(self.items) else None

    def take(self) -> tuple[int, list[str]]:
        item = self.items[self.pos]
        self.pos += 1
        return item


def _err(line_no: int, msg: str) -> LibraryError:
    return LibraryError(f"line {line_no}: {msg}")


def _floats(line_no: int, toks: list[str]) -> list[float]:
    try:
        vals = [float(t) for t in toks]
    except ValueError as e:
        raise _err(line_no, f"bad number: {e}") from None
    return vals


def parse_library(text: str) -> CellLibrary:
    """Parse and validate a library file; raises LibraryError with line numbers."""
    lines = _Lines(text)
    head = lines.peek()
    if head is None or head[1][0] != "library":
        raise _err(head[0] if head else 1, "expected 'library <name> vdd_mv <int>' header")
    no, toks = lines.take()
    if len(toks) != 4 or toks[2] != "vdd_mv":
        raise _err(no, "malformed library header")
    name = toks[1]
    vdd = _floats(no, [toks[3]])[0]
    if vdd <= 0:
        raise _err(no, "vdd_mv must be positive")

    variants: list[CellVariant] = []
    while lines.peek() is not None:
        no, toks = lines.take()
        keywords = toks[2:11:2] if len(toks) == 12 else []
        if toks[0] != "cell" or keywords != ["size", "leak_uw", "eint_fj", "area", "vsens_per_mv"]:
            raise _err(
                no,
                "expected 'cell <class> size <k> leak_uw <f> eint_fj <f> area <f> vsens_per_mv <f>'",
            )
        cls = toks[1]
        try:
            size = int(toks[3])
        except ValueError:
            raise _err(no, "size must be an integer") from None
        leak, eint, area, vsens = _floats(no, [toks[5], toks[7], toks[9], toks[11]])

        item = lines.peek()
        if item is None or item[1][0] != "pincap":
            raise _err(no, f"cell {cls}: expected pincap line")
        pno, ptoks = lines.take()
        if len(ptoks) < 3 or len(ptoks) % 2 == 0:
            raise _err(pno, "pincap expects <pin> <fF> pairs")
        pin_caps: dict[str, float] = {}
        for k in range(1, len(ptoks), 2):
            pin_caps[ptoks[k]] = _floats(pno, [ptoks[k + 1]])[0]

        delay_tables: dict[Arc, Table2D] = {}
        slew_tables: dict[Arc, Table2D] = {}
        while (item := lines.peek()) is not None and item[1][0] == "arc":
            ano, atoks = lines.take()
            if len(atoks) != 7 or atoks[3] != "slew_axis" or atoks[5] != "load_axis":
                raise _err(ano, "malformed arc line")
            arc = (atoks[1], atoks[2])
            slew_axis = tuple(_floats(ano, atoks[4].split(",")))
            load_axis = tuple(_floats(ano, atoks[6].split(",")))
            if arc[0] not in pin_caps:
                raise _err(ano, f"cell {cls}: arc input pin {arc[0]} has no pincap")
            rows: dict[str, list[tuple[float, ...]]] = {"delay": [], "slew": []}
            for kind in ("delay", "slew"):
                for _ in range(len(slew_axis)):
                    item = lines.peek()
                    if item is None or item[1][0] != kind:
                        raise _err(
                            ano, f"arc {arc[0]}->{arc[1]}: expected {len(slew_axis)} '{kind}' rows"
                        )
                    rno, rtoks = lines.take()
                    row = tuple(_floats(rno, rtoks[1:]))
                    if len(row) != len(load_axis):
                        raise _err(rno, f"expected {len(load_axis)} entries per row")
                    rows[kind].append(row)
            delay_tables[arc] = Table2D(slew_axis, load_axis, tuple(rows["delay"]))
            slew_tables[arc] = Table2D(slew_axis, load_axis, tuple(rows["slew"]))
        if not delay_tables:
            raise _err(no, f"cell {cls}: no timing arcs")
        variants.append(
            CellVariant(cls, size, pin_caps, delay_tables, slew_tables, leak, eint, area, vsens)
        )

    lib = CellLibrary(name, vdd, variants)
    validate_library(lib)
    return lib


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _check_table(cell: str, arc: Arc, kind: str, t: Table2D) -> None:
    for label, axis in (("slew", t.slew_axis), ("load", t.load_axis)):
        if len(axis) < 2:
            raise LibraryError(f"{cell} {arc}: {label} axis needs >= 2 points")
        if any(b <= a for a, b in zip(axis, axis[1:])):
            raise LibraryError(f"{cell} {arc}: {label} axis not strictly increasing")
    for row in t.values:
        for x in row:
            if not math.isfinite(x) or x <= 0:
                raise LibraryError(f"{cell} {arc}: non-finite or non-positive {kind} entry {x}")
    if kind == "delay":
        for row in t.values:
            if any(b < a for a, b in zip(row, row[1:])):
                raise LibraryError(f"{cell} {arc}: delay decreases with load")


def validate_library(lib: CellLibrary) -> None:
    """Check every CellVariant and per-class invariant; raises LibraryError."""
    for v in lib.variants:
        if set(a[1] for a in v.delay_tables) != {v.output_pin}:
            raise LibraryError(f"{v.name}: multiple output pins not supported")
        if set(v.delay_tables) != set(v.slew_tables):
            raise LibraryError(f"{v.name}: delay/slew arc sets differ")
        for arc, dt in v.delay_tables.items():
            st = v.slew_tables[arc]
            if dt.slew_axis != st.slew_axis or dt.load_axis != st.load_axis:
                raise LibraryError(f"{v.name} {arc}: delay and slew tables on different grids")
            _check_table(v.name, arc, "delay", dt)
            _check_table(v.name, arc, "slew", st)
        for cap in v.input_pin_caps.values():
            if not math.isfinite(cap) or cap <= 0:
                raise LibraryError(f"{v.name}: bad pin cap {cap}")

    for cls, vs in lib.class_index.items():
        if len(vs) < 2:
            raise LibraryError(f"class {cls}: needs >= 2 size variants")
        if [v.size_index for v in vs] != list(range(len(vs))):
            raise LibraryError(f"class {cls}: size indices not contiguous from 0")
        for lo, hi in zip(vs, vs[1:]):
            if set(lo.input_pin_caps) != set(hi.input_pin_caps) or set(lo.delay_tables) != set(
                hi.delay_tables
            ):
                raise LibraryError(f"class {cls}: pin/arc sets differ across sizes")
            for pin in lo.input_pin_caps:
                if hi.input_pin_caps[pin] <= lo.input_pin_caps[pin]:
                    raise LibraryError(
                        f"class {cls}: pin cap of size {hi.size_index} not above size {lo.size_index}"
                    )
            for arc, dlo in lo.delay_tables.items():
                dhi = hi.delay_tables[arc]
                grid = [
                    (s, l)
                    for s in set(dlo.slew_axis) | set(dhi.slew_axis)
                    for l in set(dlo.load_axis) | set(dhi.load_axis)
                ]
                for s, l in grid:
                    if dhi.lookup(s, l) >= dlo.lookup(s, l):
                        raise LibraryError(
                            f"class {cls} arc {arc}: size {hi.size_index} not faster than "
                            f"size {lo.size_index} at (slew={s}, load={l})"
                        )


# ---------------------------------------------------------------------------
# synthetic library generator (stands in for a characterized technology)
# ---------------------------------------------------------------------------

_CLASS_POOL = [
    ("INV", 1),
    ("BUF", 1),
    ("NAND2", 2),
    ("NOR2", 2),
    ("AND2", 2),
    ("OR2", 2),
    ("XOR2", 2),
    ("AOI21", 3),
    ("NAND3", 3),
    ("NOR3", 3),
    ("XNOR2", 2),
    ("MUX2", 3),
]

_SLEW_AXIS = (5.0, 20.0, 60.0, 150.0)
_LOAD_AXIS = (1.0, 4.0, 16.0, 64.0)


def gen_synthetic_library(
    seed: int, n_classes: int = 8, n_sizes: int = 4, nominal_vdd_mv: float = 1100.0
) -> CellLibrary:
    """Deterministic synthetic library: larger sizes are faster, bigger, hungrier."""
    if n_sizes < 2:
        raise LibraryError("n_sizes must be >= 2")
    if n_classes < 1 or n_classes > len(_CLASS_POOL):
        raise LibraryError(f"n_classes must be in 1..{len(_CLASS_POOL)}")
    rng = np.random.default_rng(seed)
    variants: list[CellVariant] = []
    for cls, n_in in _CLASS_POOL[:n_classes]:
        growth = rng.uniform(1.5, 1.8)
        pins = [chr(ord("A") + k) for k in range(n_in)]
        cap0 = {p: rng.uniform(0.8, 1.6) for p in pins}
        # per-arc affine delay/slew coefficients, scaled by drive strength
        coef = {}
        for p in pins:
            coef[p] = dict(
                d0=rng.uniform(8.0, 20.0),
                ds=rng.uniform(0.05, 0.15),
                dl=rng.uniform(2.0, 4.0),
                s0=rng.uniform(4.0, 8.0),
                ss=rng.uniform(0.08, 0.20),
                sl=rng.uniform(1.0, 2.5),
            )
        leak0 = rng.uniform(0.05, 0.20)
        eint0 = rng.uniform(1.0, 3.0)
        area0 = rng.uniform(1.0, 2.0)
        vsens0 = rng.uniform(0.0010, 0.0030)
        for k in range(n_sizes):
            drive = growth**k
            delay_tables: dict[Arc, Table2D] = {}
            slew_tables: dict[Arc, Table2D] = {}
            for p in pins:
                c = coef[p]
                drows = tuple(
                    tuple((c["d0"] + c["ds"] * s + c["dl"] * l) / drive for l in _LOAD_AXIS)
                    for s in _SLEW_AXIS
                )
                srows = tuple(
                    tuple((c["s0"] + c["ss"] * s + c["sl"] * l) / drive for l in _LOAD_AXIS)
                    for s in _SLEW_AXIS
                )
                delay_tables[(p, "Y")] = Table2D(_SLEW_AXIS, _LOAD_AXIS, drows)
                slew_tables[(p, "Y")] = Table2D(_SLEW_AXIS, _LOAD_AXIS, srows)
            variants.append(
                CellVariant(
                    cell_class=cls,
                    size_index=k,
                    input_pin_caps={p: cap0[p] * drive for p in pins},
                    delay_tables=delay_tables,
                    slew_tables=slew_tables,
                    leakage_uw=leak0 * drive,
                    internal_energy_fj=eint0 * drive,
                    footprint_area=area0 * drive,
                    vsens_per_mv=vsens0 * 0.97**k,
                )
            )
    lib = CellLibrary(f"synth_s{seed}", nominal_vdd_mv, variants)
    validate_library(lib)
    return lib
