"""Circuit documents: a JSON tree with ``systems``, ``operations``, ``wiring``, ``roles``.

Example::

    {
      "format": "tsopt-circuit",
      "version": 1,
      "systems": {"Q": 2},
      "operations": [
        {"name": "P", "inputs": [], "outputs": ["Q"],
         "outcomes": {"0": [[[[1, 0]], [[0, 0]]]]}},
        {"name": "M", "inputs": ["Q"], "outputs": [],
         "outcomes": {"0": [[[[1, 0], [0, 0]]]], "1": [[[[0, 0], [1, 0]]]]}}
      ],
      "wiring": [{"from": "P.0", "to": "M.0"}],
      "roles": {"P": "prep", "M": "meas"}
    }

Each outcome maps to a list of Kraus matrices (``d_out x d_in``), written
row-major with every entry an ``[re, im]`` pair. Port ``X.k`` is the k-th
output (for ``from``) or input (for ``to``) of operation ``X``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np
from json_source_map import calculate

from .circuit import Circuit, CircuitError, Node, Wire
from .linalg import CPMap, StructuralError
from .operations import GeneralizedOperation, NormalizationError

FORMAT_NAME = "tsopt-circuit"
FORMAT_VERSION = 1

# diagnostic codes
E_SYNTAX = "E001-syntax"
E_SCHEMA = "E002-schema"
E_DIMENSION = "E003-dimension"
E_NORMALIZATION = "E004-normalization"
E_CYCLE = "E005-cycle"
E_OPEN_WIRE = "E006-open-wire"
E_REFERENCE = "E007-reference"
E_ROLE = "E008-role"


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    pointer: str = ""
    line: int | None = None
    column: int | None = None

    def __str__(self):
        loc = f"{self.line}:{self.column}" if self.line is not None else "-"
        where = f" at {self.pointer}" if self.pointer else ""
        return f"{loc}: {self.code}: {self.message}{where}"

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "pointer": self.pointer,
                "line": self.line, "column": self.column}


class CircuitParseError(StructuralError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


class _Locator:
    def __init__(self, text: str):
        try:
            self._map = calculate(text)
        except Exception:
            self._map = {}

    def __call__(self, pointer: str) -> tuple[int | None, int | None]:
        # fall back to the nearest enclosing node that has a location
        p = pointer
        while True:
            entry = self._map.get(p)
            if entry is not None:
                loc = entry.key_start or entry.value_start
                return loc.line + 1, loc.column + 1
            if not p:
                return None, None
            p = p.rsplit("/", 1)[0]


def _ptr(*parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in parts)


def decode_matrix(obj: Any) -> np.ndarray:
    """Row-major nested lists of ``[re, im]`` pairs to a complex matrix."""
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError("matrix must be a list of rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    # "+ 0.0" folds -0.0 into 0.0 so serialization is idempotent
    return [[[float(z.real) + 0.0, float(z.imag) + 0.0] for z in row] for row in m]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.diags: list[Diagnostic] = []
        self.locate = _Locator(text)

    def error(self, code: str, message: str, pointer: str = ""):
        line, col = self.locate(pointer)
        self.diags.append(Diagnostic(code, message, pointer, line, col))

    def fail(self):
        raise CircuitParseError(self.diags)

    def parse(self) -> Circuit:
        try:
            doc = json.loads(self.text)
        except json.JSONDecodeError as exc:
            self.diags.append(Diagnostic(E_SYNTAX, exc.msg, "", exc.lineno, exc.colno))
            self.fail()
        if not isinstance(doc, dict):
            self.error(E_SCHEMA, "document must be an object")
            self.fail()
        if doc.get("format", FORMAT_NAME) != FORMAT_NAME:
            self.error(E_SCHEMA, f"unknown format {doc.get('format')!r}", "/format")
        for key in ("systems", "operations", "wiring"):
            if key not in doc:
                self.error(E_SCHEMA, f"missing section {key!r}")
        if self.diags:
            self.fail()

        systems = self._systems(doc["systems"])
        ops = self._operations(doc["operations"], systems)
        roles = self._roles(doc.get("roles", {}), ops)
        if self.diags:
            self.fail()
        wires = self._wiring(doc["wiring"], ops, systems)
        if self.diags:
            self.fail()

        nodes = []
        for name, entry in ops.items():
            ins = tuple(wires["in"].get((name, k), f"?{name}.in{k}") for k in range(len(entry["inputs"])))
            outs = tuple(wires["out"].get((name, k), f"?{name}.out{k}") for k in range(len(entry["outputs"])))
            nodes.append(Node(name, entry["op"], ins, outs, roles.get(name)))
        circuit = Circuit(tuple(nodes), tuple(wires["wires"]), dict(systems))
        try:
            circuit.validate()
        except CircuitError as exc:
            code = {"cycle": E_CYCLE, "open-wire": E_OPEN_WIRE, "dimension": E_DIMENSION}.get(exc.code, E_REFERENCE)
            idx = list(ops).index(exc.where) if exc.where in ops else None
            self.error(code, str(exc), _ptr("operations", idx) if idx is not None else "/wiring")
            self.fail()
        return circuit

    def _systems(self, obj) -> dict[str, int]:
        if not isinstance(obj, dict):
            self.error(E_SCHEMA, "systems must map names to dimensions", "/systems")
            return {}
        out = {}
        for name, dim in obj.items():
            if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
                self.error(E_SCHEMA, f"system {name!r} needs a positive integer dimension", _ptr("systems", name))
            else:
                out[name] = dim
        return out

    def _operations(self, obj, systems) -> dict[str, dict]:
        if not isinstance(obj, list):
            self.error(E_SCHEMA, "operations must be a list", "/operations")
            return {}
        ops: dict[str, dict] = {}
        for k, entry in enumerate(obj):
            p = _ptr("operations", k)
            if not isinstance(entry, dict) or "name" not in entry or "outcomes" not in entry:
                self.error(E_SCHEMA, "operation needs 'name' and 'outcomes'", p)
                continue
            name = entry["name"]
            if not isinstance(name, str) or not name or "." in name:
                self.error(E_SCHEMA, "operation name must be a non-empty string without '.'", p + "/name")
                continue
            if name in ops:
                self.error(E_SCHEMA, f"duplicate operation name {name!r}", p + "/name")
                continue
            ports = {}
            for side in ("inputs", "outputs"):
                labels = entry.get(side, [])
                if not isinstance(labels, list):
                    self.error(E_SCHEMA, f"{side} must be a list of system names", p + "/" + side)
                    labels = []
                for j, lab in enumerate(labels):
                    if lab not in systems:
                        self.error(E_REFERENCE, f"unknown system {lab!r}", _ptr("operations", k, side, j))
                ports[side] = labels
            d_in = int(np.prod([systems.get(s, 1) for s in ports["inputs"]]))
            d_out = int(np.prod([systems.get(s, 1) for s in ports["outputs"]]))
            outcomes = entry["outcomes"]
            if not isinstance(outcomes, dict) or not outcomes:
                self.error(E_SCHEMA, "outcomes must be a non-empty object", p + "/outcomes")
                continue
            maps, labels, ok = [], [], True
            for lab, kraus in outcomes.items():
                q = _ptr("operations", k, "outcomes", lab)
                if not isinstance(kraus, list):
                    self.error(E_SCHEMA, "outcome must be a list of Kraus matrices", q)
                    ok = False
                    continue
                ks = []
                for a, km in enumerate(kraus):
                    try:
                        m = decode_matrix(km)
                    except (ValueError, TypeError) as exc:
                        self.error(E_SCHEMA, f"bad Kraus matrix: {exc}", q + f"/{a}")
                        ok = False
                        continue
                    if m.shape != (d_out, d_in):
                        self.error(E_DIMENSION, f"Kraus matrix has shape {m.shape}, ports require {(d_out, d_in)}",
                                   q + f"/{a}")
                        ok = False
                        continue
                    ks.append(m)
                if ok:
                    try:
                        maps.append(CPMap(ks, d_in, d_out))
                    except StructuralError as exc:
                        self.error(E_DIMENSION, str(exc), q)
                        ok = False
                    labels.append(lab)
            if not ok:
                continue
            try:
                op = GeneralizedOperation(maps, labels)
            except NormalizationError as exc:
                self.error(E_NORMALIZATION, f"operation {name!r}: {exc}", p + "/outcomes")
                continue
            ops[name] = {"op": op, **ports, "index": k}
        return ops

    def _roles(self, obj, ops) -> dict[str, str]:
        if not isinstance(obj, dict):
            self.error(E_SCHEMA, "roles must be an object", "/roles")
            return {}
        for name, role in obj.items():
            p = _ptr("roles", name)
            if name not in ops:
                self.error(E_REFERENCE, f"role given for unknown operation {name!r}", p)
            elif role not in ("prep", "meas", "op"):
                self.error(E_ROLE, f"unknown role {role!r}", p)
            elif role == "prep" and ops[name]["inputs"]:
                self.error(E_ROLE, f"preparation {name!r} has inputs", p)
            elif role == "meas" and ops[name]["outputs"]:
                self.error(E_ROLE, f"measurement {name!r} has outputs", p)
        return dict(obj)

    def _port(self, ref, pointer, ops, side):
        if not isinstance(ref, str) or ref.count(".") != 1:
            self.error(E_SCHEMA, f"port reference must look like 'Op.k', got {ref!r}", pointer)
            return None
        name, idx = ref.split(".")
        if name not in ops:
            self.error(E_REFERENCE, f"unknown operation {name!r}", pointer)
            return None
        if not idx.isdigit() or int(idx) >= len(ops[name][side]):
            self.error(E_REFERENCE, f"operation {name!r} has no {side[:-1]} port {idx}", pointer)
            return None
        return name, int(idx)

    def _wiring(self, obj, ops, systems):
        out = {"in": {}, "out": {}, "wires": []}
        if not isinstance(obj, list):
            self.error(E_SCHEMA, "wiring must be a list", "/wiring")
            return out
        for k, link in enumerate(obj):
            p = _ptr("wiring", k)
            if not isinstance(link, dict) or "from" not in link or "to" not in link:
                self.error(E_SCHEMA, "wire needs 'from' and 'to'", p)
                continue
            src = self._port(link["from"], p + "/from", ops, "outputs")
            dst = self._port(link["to"], p + "/to", ops, "inputs")
            if src is None or dst is None:
                continue
            s_sys = ops[src[0]]["outputs"][src[1]]
            d_sys = ops[dst[0]]["inputs"][dst[1]]
            if systems[s_sys] != systems[d_sys]:
                self.error(E_DIMENSION, f"wire joins {s_sys} (d={systems[s_sys]}) to {d_sys} (d={systems[d_sys]})", p)
                continue
            if src in out["out"]:
                self.error(E_REFERENCE, f"output port {link['from']} is wired twice", p)
                continue
            if dst in out["in"]:
                self.error(E_REFERENCE, f"input port {link['to']} is wired twice", p)
                continue
            wname = link.get("name", f"{link['from']}->{link['to']}")
            out["out"][src] = wname
            out["in"][dst] = wname
            out["wires"].append(Wire(wname, s_sys, systems[s_sys]))
        for name, entry in ops.items():
            p = _ptr("operations", entry["index"])
            for side, key in (("inputs", "in"), ("outputs", "out")):
                for j in range(len(entry[side])):
                    if (name, j) not in out[key]:
                        self.error(E_OPEN_WIRE, f"port {name}.{j} ({side[:-1]}) is not connected",
                                   p + f"/{side}/{j}")
        return out


def parse_circuit(text: str) -> Circuit:
    """Parse and validate a circuit document; raises :class:`CircuitParseError`."""
    return _Parser(text).parse()


def check_circuit(text: str) -> list[Diagnostic]:
    try:
        parse_circuit(text)
    except CircuitParseError as exc:
        return exc.diagnostics
    return []


def circuit_to_dict(c: Circuit) -> dict:
    producers = {}
    consumers = {}
    for n in c.nodes:
        for k, w in enumerate(n.outputs):
            producers[w] = f"{n.name}.{k}"
        for k, w in enumerate(n.inputs):
            consumers[w] = f"{n.name}.{k}"
    systems = dict(c.systems)
    for w in c.wires:
        systems.setdefault(w.system, w.dim)
    wire_sys = {w.name: w.system for w in c.wires}
    ops = []
    for n in c.nodes:
        ops.append({
            "name": n.name,
            "inputs": [wire_sys[w] for w in n.inputs],
            "outputs": [wire_sys[w] for w in n.outputs],
            "outcomes": {str(lab): [encode_matrix(k) for k in m.kraus]
                         for lab, m in zip(n.operation.outcomes, n.operation.maps)},
        })
    wiring = [{"from": producers[w.name], "to": consumers[w.name], "name": w.name} for w in c.wires]
    doc = {"format": FORMAT_NAME, "version": FORMAT_VERSION, "systems": systems,
           "operations": ops, "wiring": wiring}
    roles = {n.name: n.role for n in c.nodes if n.role}
    if roles:
        doc["roles"] = roles
    return doc


def serialize_circuit(c: Circuit) -> str:
    return json.dumps(circuit_to_dict(c), indent=1) + "\n"


def load_circuit(path) -> Circuit:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# ---------------------------------------------------------------------------
# auxiliary documents: S matrices and state/effect pairs
# ---------------------------------------------------------------------------

def _aux_error(text_locate, code, message, pointer):
    line, col = text_locate(pointer)
    return CircuitParseError([Diagnostic(code, message, pointer, line, col)])


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CircuitParseError([Diagnostic(E_SYNTAX, exc.msg, "", exc.lineno, exc.colno)]) from None


def parse_s_matrix(text: str) -> dict:
    """``{"kind": "II", "transpose": true, "matrices": {"2": M}, "bases": {...}}``.

    Returns ``kind``, ``transpose`` (``None`` when absent), and dimension-keyed
    ``matrices`` / ``bases``.
    """
    doc = _load_json(text)
    locate = _Locator(text)
    if not isinstance(doc, dict) or not isinstance(doc.get("matrices"), dict):
        raise _aux_error(locate, E_SCHEMA, "S-matrix document needs a 'matrices' object", "")
    kind = doc.get("kind", "II")
    if kind not in ("I", "II"):
        raise _aux_error(locate, E_SCHEMA, f"kind must be 'I' or 'II', got {kind!r}", "/kind")
    out = {"kind": kind, "transpose": doc.get("transpose"), "matrices": {}, "bases": {}}
    for section in ("matrices", "bases"):
        for key, raw in doc.get(section, {}).items():
            ptr = _ptr(section, key)
            try:
                m = decode_matrix(raw)
            except (ValueError, TypeError, IndexError):
                raise _aux_error(locate, E_SCHEMA, "matrix entries must be [re, im] pairs", ptr) from None
            if m.ndim != 2 or m.shape[0] != m.shape[1] or str(m.shape[0]) != key:
                raise _aux_error(locate, E_DIMENSION, f"entry {key!r} is not a {key}x{key} matrix", ptr)
            out[section][int(key)] = m
    return out


def parse_pairs(text: str):
    """Two state or effect pairs: ``{"kind": "state", "pairs": [{"op": M, "bar": M}, ...]}``."""
    from .operations import EffectPair, StatePair

    doc = _load_json(text)
    locate = _Locator(text)
    if not isinstance(doc, dict) or not isinstance(doc.get("pairs"), list) or len(doc["pairs"]) != 2:
        raise _aux_error(locate, E_SCHEMA, "document needs exactly two entries under 'pairs'", "")
    kind = doc.get("kind", "state")
    cls = {"state": StatePair, "effect": EffectPair}.get(kind)
    if cls is None:
        raise _aux_error(locate, E_SCHEMA, f"kind must be 'state' or 'effect', got {kind!r}", "/kind")
    pairs = []
    for k, item in enumerate(doc["pairs"]):
        ptr = _ptr("pairs", k)
        try:
            op, bar = decode_matrix(item["op"]), decode_matrix(item["bar"])
        except (KeyError, TypeError, IndexError, ValueError):
            raise _aux_error(locate, E_SCHEMA, "pair needs 'op' and 'bar' matrices of [re, im] pairs", ptr) from None
        try:
            pairs.append(cls(op, bar))
        except ValueError as exc:
            raise _aux_error(locate, E_NORMALIZATION, str(exc), ptr) from None
    return kind, pairs


def encode_pairs(kind: str, pairs) -> str:
    items = []
    for p in pairs:
        op, bar = (p.rho, p.rho_bar) if kind == "state" else (p.e, p.e_bar)
        items.append({"op": encode_matrix(op), "bar": encode_matrix(bar)})
    return json.dumps({"kind": kind, "pairs": items}, indent=1) + "\n"
