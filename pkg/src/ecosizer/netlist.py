"""Gate-level netlist as a directed relational graph with star-expanded nets.

Instances are graph nodes; every driver->sink wire is one fanout edge and its
reversal one fanin edge. Sequential elements are cut at flop boundaries: a
flop's D pin is a timing endpoint, its Q pin a startpoint.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from heapq import heapify, heappop, heappush

import numpy as np

from .exceptions import NetlistError
from .library import CellLibrary

_BOUNDARY = -1  # input driven by a primary input or flop Q


@dataclass
class Instance:
    id: int
    name: str
    cell_class: str
    size_index: int
    x: int
    y: int
    input_nets: tuple[str, ...]  # position k binds the k-th sorted input pin
    output_net: str


@dataclass(frozen=True)
class Flop:
    name: str
    d_net: str
    q_net: str


@dataclass(frozen=True)
class ChangeRecord:
    inst: int
    old_size: int
    new_size: int


class NetlistGraph:
    """Combinational DAG over instances, plus boundary pins and flop cuts."""

    def __init__(
        self,
        instances: list[Instance],
        primary_inputs: list[str],
        primary_outputs: list[str],
        flops: list[Flop],
        lib: CellLibrary,
    ):
        self.instances = instances
        self.primary_inputs = list(primary_inputs)
        self.primary_outputs = list(primary_outputs)
        self.flops = list(flops)
        self._validate_against(lib)
        self._build_edges()
        self._topo_sort()

    @property
    def n(self) -> int:
        return len(self.instances)

    def _validate_against(self, lib: CellLibrary) -> None:
        names: set[str] = set()
        for inst in self.instances:
            if inst.name in names:
                raise NetlistError(f"duplicate instance name {inst.name}")
            names.add(inst.name)
            if inst.cell_class not in lib.class_index:
                raise NetlistError(f"{inst.name}: unknown cell {inst.cell_class}")
            n_sizes = lib.n_sizes(inst.cell_class)
            if not 0 <= inst.size_index < n_sizes:
                raise NetlistError(f"{inst.name}: size {inst.size_index} outside 0..{n_sizes - 1}")
            pins = sorted(lib.variant(inst.cell_class, 0).input_pin_caps)
            if len(inst.input_nets) != len(pins):
                raise NetlistError(
                    f"{inst.name}: {inst.cell_class} has {len(pins)} input pins, "
                    f"got {len(inst.input_nets)} nets"
                )
        self.input_pins = {
            cls: tuple(sorted(vs[0].input_pin_caps)) for cls, vs in lib.class_index.items()
        }

    def _build_edges(self) -> None:
        driver: dict[str, int] = {}
        for inst in self.instances:
            if inst.output_net in driver:
                raise NetlistError(
                    f"net {inst.output_net}: multiple drivers "
                    f"({self.instances[driver[inst.output_net]].name}, {inst.name})"
                )
            driver[inst.output_net] = inst.id
        startpoints = set(self.primary_inputs) | {f.q_net for f in self.flops}
        for net in startpoints:
            if net in driver:
                raise NetlistError(f"net {net}: driven by both a gate and a boundary pin")

        n = self.n
        # fanout[i]: (sink instance, sink input position); in_src[i][k]: driver of input k
        self.fanout: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        self.in_src: list[list[int]] = [[] for _ in range(n)]
        for inst in self.instances:
            for k, net in enumerate(inst.input_nets):
                if net in startpoints:
                    self.in_src[inst.id].append(_BOUNDARY)
                elif net in driver:
                    src = driver[net]
                    self.in_src[inst.id].append(src)
                    self.fanout[src].append((inst.id, k))
                else:
                    raise NetlistError(f"{inst.name}: dangling net {net} (no driver)")

        endpoint_nets = set(self.primary_outputs) | {f.d_net for f in self.flops}
        for net in endpoint_nets:
            if net not in driver and net not in startpoints:
                raise NetlistError(f"endpoint net {net}: no driver")
        # endpoint_sinks[i]: PO / flop-D connections on instance i's output net
        self.endpoint_sinks = [0] * n
        for net in self.primary_outputs:
            if net in driver:
                self.endpoint_sinks[driver[net]] += 1
        for f in self.flops:
            if f.d_net in driver:
                self.endpoint_sinks[driver[f.d_net]] += 1
        # unloaded outputs are implicit endpoints so required times stay defined
        for i in range(n):
            if not self.fanout[i] and self.endpoint_sinks[i] == 0:
                self.endpoint_sinks[i] = 1

        self.fanout_neighbors: list[list[int]] = [[s for s, _ in self.fanout[i]] for i in range(n)]
        self.fanin_neighbors: list[list[int]] = [
            [s for s in self.in_src[i] if s != _BOUNDARY] for i in range(n)
        ]

    def _topo_sort(self) -> None:
        n = self.n
        indeg = [len(self.fanin_neighbors[i]) for i in range(n)]
        ready = [i for i in range(n) if indeg[i] == 0]
        heapify(ready)
        order: list[int] = []
        while ready:
            u = heappop(ready)
            order.append(u)
            for v in self.fanout_neighbors[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    heappush(ready, v)
        if len(order) != n:
            cycle = self._find_cycle({i for i in range(n) if indeg[i] > 0})
            names = " -> ".join(self.instances[i].name for i in cycle)
            raise NetlistError(f"combinational cycle: {names}")
        self.topo_order = tuple(order)
        self.topo_pos = [0] * n
        for pos, i in enumerate(order):
            self.topo_pos[i] = pos

    def _find_cycle(self, remaining: set[int]) -> list[int]:
        start = min(remaining)
        path: list[int] = []
        on_path: dict[int, int] = {}
        u = start
        while u not in on_path:
            on_path[u] = len(path)
            path.append(u)
            u = next(v for v in self.fanout_neighbors[u] if v in remaining)
        return path[on_path[u] :] + [u]

    # -- mutation ----------------------------------------------------------

    def sizes(self) -> np.ndarray:
        return np.array([inst.size_index for inst in self.instances], dtype=np.int64)

    def apply_sizes(self, sizes: np.ndarray) -> None:
        for inst, s in zip(self.instances, sizes):
            inst.size_index = int(s)

    def num_fanout_edges(self) -> int:
        return sum(len(f) for f in self.fanout)


def swap_size(g: NetlistGraph, inst_id: int, new_size: int, lib: CellLibrary) -> ChangeRecord:
    """Set one instance's size, returning the record consumed by incremental STA."""
    inst = g.instances[inst_id]
    if not 0 <= new_size < lib.n_sizes(inst.cell_class):
        raise NetlistError(
            f"{inst.name}: size {new_size} outside 0..{lib.n_sizes(inst.cell_class) - 1}"
        )
    old = inst.size_index
    inst.size_index = new_size
    return ChangeRecord(inst_id, old, new_size)


# ---------------------------------------------------------------------------
# parsing / serialization
#
#   input <net>
#   output <net>
#   flop <name> in <net> out <net>
#   gate <name> <class> size <k> at <x> <y> in <net,...> out <net>
# ---------------------------------------------------------------------------


def parse_netlist(text: str, lib: CellLibrary) -> NetlistGraph:
    """Parse a netlist file against a library; instance order follows file order."""
    pis: list[str] = []
    pos: list[str] = []
    flops: list[Flop] = []
    instances: list[Instance] = []
    for no, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        toks = body.split()
        kind = toks[0]
        try:
            if kind == "input" and len(toks) == 2:
                pis.append(toks[1])
            elif kind == "output" and len(toks) == 2:
                pos.append(toks[1])
            elif kind == "flop" and len(toks) == 6 and toks[2] == "in" and toks[4] == "out":
                flops.append(Flop(toks[1], toks[3], toks[5]))
            elif kind == "gate" and len(toks) == 12:
                if toks[3] != "size" or toks[5] != "at" or toks[8] != "in" or toks[10] != "out":
                    raise ValueError
                name, cls = toks[1], toks[2]
                size = int(toks[4])
                x, y = int(toks[6]), int(toks[7])
                in_nets = tuple(toks[9].split(","))
                out_net = toks[11]
                instances.append(Instance(len(instances), name, cls, size, x, y, in_nets, out_net))
            else:
                raise ValueError
        except ValueError:
            raise NetlistError(f"line {no}: cannot parse '{body}'") from None
    return NetlistGraph(instances, pis, pos, flops, lib)


def serialize_netlist(g: NetlistGraph) -> str:
    out = [f"input {n}" for n in g.primary_inputs]
    out += [f"output {n}" for n in g.primary_outputs]
    out += [f"flop {f.name} in {f.d_net} out {f.q_net}" for f in g.flops]
    for i in g.instances:
        out.append(
            f"gate {i.name} {i.cell_class} size {i.size_index} at {i.x} {i.y} "
            f"in {','.join(i.input_nets)} out {i.output_net}"
        )
    return "\n".join(out) + "\n"


def clone_graph(g: NetlistGraph, lib: CellLibrary) -> NetlistGraph:
    insts = [
        Instance(i.id, i.name, i.cell_class, i.size_index, i.x, i.y, i.input_nets, i.output_net)
        for i in g.instances
    ]
    return NetlistGraph(insts, g.primary_inputs, g.primary_outputs, g.flops, lib)


# ---------------------------------------------------------------------------
# synthetic netlist generator
# ---------------------------------------------------------------------------


def gen_synthetic_netlist(
    seed: int, n_gates: int, depth: int, lib: CellLibrary, max_fanout: int = 4
) -> NetlistGraph:
    """Layered random DAG placed on a square grid; deterministic in the seed."""
    if not 1 <= depth <= n_gates:
        raise NetlistError("need n_gates >= depth >= 1")
    rng = np.random.default_rng(seed)
    classes = lib.classes
    arity = {c: len(lib.variant(c, 0).input_pin_caps) for c in classes}

    base = n_gates // depth
    layer_sizes = [base + (1 if k < n_gates % depth else 0) for k in range(depth)]
    grid = int(np.ceil(np.sqrt(n_gates)))

    pis: list[str] = []
    # nets available as inputs, with remaining fanout budget
    budget: dict[str, int] = {}

    def new_pi() -> str:
        name = f"pi{len(pis)}"
        pis.append(name)
        budget[name] = max_fanout
        return name

    for _ in range(max(2, arity[classes[0]])):
        new_pi()

    instances: list[Instance] = []
    window: list[list[str]] = []  # per layer, output nets
    max_draw_size = min(2, min(lib.n_sizes(c) for c in classes) - 1)
    for layer, count in enumerate(layer_sizes):
        outs: list[str] = []
        for _ in range(count):
            gid = len(instances)
            cls = classes[int(rng.integers(len(classes)))]
            # force a chain backbone so the DAG really is `depth` layers deep
            need = arity[cls]
            pool: list[str] = []
            if layer > 0:
                pool = [n for n in window[layer - 1] if budget[n] > 0]
                for lk in range(max(0, layer - 3), layer - 1):
                    pool += [n for n in window[lk] if budget[n] > 0]
            pool += [n for n in pis if budget[n] > 0]
            ins: list[str] = []
            for k in range(need):
                if layer > 0 and k == 0:
                    prev = [n for n in window[layer - 1] if budget[n] > 0]
                    choice = prev[int(rng.integers(len(prev)))] if prev else None
                else:
                    choice = None
                if choice is None:
                    cands = [n for n in pool if budget[n] > 0 and n not in ins]
                    if not cands:
                        cands = [new_pi()]
                    choice = cands[int(rng.integers(len(cands)))]
                ins.append(choice)
                budget[choice] -= 1
            out = f"n{gid}"
            outs.append(out)
            size = int(rng.integers(0, max_draw_size + 1))
            instances.append(
                Instance(gid, f"g{gid}", cls, size, gid % grid, gid // grid, tuple(ins), out)
            )
        for net in outs:
            budget[net] = max_fanout
        window.append(outs)
    # keep the last layer's fanout free so its outputs become primary outputs
    sink_counts = {net: 0 for net in budget}
    for inst in instances:
        for net in inst.input_nets:
            sink_counts[net] += 1
    pos = [inst.output_net for inst in instances if sink_counts[inst.output_net] == 0]
    return NetlistGraph(instances, pis, pos, [], lib)


# ---------------------------------------------------------------------------
# per-node features for the sizing agent
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureSchema:
    """Fixed feature layout; its hash guards model/design compatibility."""

    names: tuple[str, ...]
    classes: tuple[str, ...]
    sizes_per_class: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def in_slew_index(self) -> int:
        return self.names.index("in_slew")

    @property
    def load_index(self) -> int:
        return self.names.index("load")

    def hash(self) -> str:
        text = repr((self.names, self.classes, self.sizes_per_class))
        return hashlib.sha256(text.encode()).hexdigest()


def feature_schema(lib: CellLibrary) -> FeatureSchema:
    classes = tuple(lib.classes)
    names = ("slack", "in_slew", "out_slew", "size_norm", "load", "ir_voltage") + tuple(
        f"is_{c}" for c in classes
    )
    return FeatureSchema(names, classes, tuple(lib.n_sizes(c) for c in classes))


def annotate_features(g: NetlistGraph, lib: CellLibrary, timing, volts) -> np.ndarray:
    """(n, dim) feature matrix per the agent's schema; dimensionless entries.

    Slack and slews are normalized by the clock period, load by the library's
    largest table load, and the rail voltage as fractional droop.
    """
    schema = feature_schema(lib)
    clk = timing.clock_ps
    vdd = lib.nominal_vdd_mv
    max_load = lib.max_table_load_ff
    n = g.n
    feats = np.zeros((n, schema.dim), dtype=np.float64)
    feats[:, 0] = timing.slack / clk
    feats[:, 1] = timing.in_slew_max / clk
    feats[:, 2] = timing.out_slew / clk
    cls_col = {c: 6 + k for k, c in enumerate(schema.classes)}
    for inst in g.instances:
        denom = max(lib.n_sizes(inst.cell_class) - 1, 1)
        feats[inst.id, 3] = inst.size_index / denom
        feats[inst.id, cls_col[inst.cell_class]] = 1.0
    feats[:, 4] = timing.load / max_load
    feats[:, 5] = (vdd - volts.volt_mv) / vdd
    if not np.all(np.isfinite(feats)):
        raise NetlistError("non-finite feature value")
    return feats
