"""Runtime values, heap objects and rendering.

Values are plain Python objects for speed: ``int`` (64-bit wrapped),
``float``, ``bool``, ``str``, ``None`` for nil, read-only float64
``numpy.ndarray`` for tensors, and small handle classes for heap
references and functions.
"""

from __future__ import annotations

import math
from typing import Any, Callable

import numpy as np

from specjit.errors import TYPE_MISMATCH, SLRuntimeError

INT = "Int"
FLOAT = "Float"
BOOL = "Bool"
STR = "Str"
TENSOR = "Tensor"
LIST = "List"
RECORD = "Record"
FN = "Fn"
NIL = "Nil"
KINDS = (INT, FLOAT, BOOL, STR, TENSOR, LIST, RECORD, FN, NIL)

_MASK = (1 << 64) - 1
_SIGN = 1 << 63


def wrap_int(x: int) -> int:
    """Two's-complement wrap to signed 64 bits."""
    if -_SIGN <= x < _SIGN:
        return x
    return ((x + _SIGN) & _MASK) - _SIGN


class ListRef:
    __slots__ = ("id",)

    def __init__(self, hid: int):
        self.id = hid

    def __eq__(self, other):
        return type(other) is ListRef and other.id == self.id

    def __hash__(self):
        return hash(("L", self.id))

    def __repr__(self):
        return f"ListRef(#{self.id})"


class RecordRef:
    __slots__ = ("id",)

    def __init__(self, hid: int):
        self.id = hid

    def __eq__(self, other):
        return type(other) is RecordRef and other.id == self.id

    def __hash__(self):
        return hash(("R", self.id))

    def __repr__(self):
        return f"RecordRef(#{self.id})"


class FnRef:
    """A function value. Top-level functions have one FnRef for the run;
    nested definitions build a fresh closure each time they execute."""

    __slots__ = ("fn", "captures")

    def __init__(self, fn, captures: dict[str, Any] | None = None):
        self.fn = fn
        self.captures = captures or {}

    @property
    def fn_id(self) -> int:
        return self.fn.site

    @property
    def name(self) -> str:
        return self.fn.name

    def __repr__(self):
        return f"FnRef({self.fn.name}@{self.fn.site})"


def make_tensor(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def freeze(arr) -> np.ndarray:
    if type(arr) is not np.ndarray:
        # numpy hands back scalars for 0-d results
        arr = np.asarray(arr, dtype=np.float64)
    if arr.dtype != np.float64:
        arr = arr.astype(np.float64)
    if arr.flags.writeable:
        arr.setflags(write=False)
    return arr


def kind_of(v) -> str:
    t = type(v)
    if t is float:
        return FLOAT
    if t is int:
        return INT
    if t is bool:
        return BOOL
    if t is np.ndarray:
        return TENSOR
    if v is None:
        return NIL
    if t is str:
        return STR
    if t is ListRef:
        return LIST
    if t is RecordRef:
        return RECORD
    if t is FnRef:
        return FN
    raise TypeError(f"not an SL value: {v!r}")


def is_number(v) -> bool:
    t = type(v)
    return t is int or t is float


def same_value(a, b) -> bool:
    """Bit-level identity used by value specialization and parity checks.

    Floats compare by bit pattern (so 0.0 and -0.0 differ, nan matches nan),
    tensors by shape and bytes, handles by heap id, functions by object.
    """
    ta, tb = type(a), type(b)
    if ta is not tb:
        return False
    if ta is float:
        return a == b and math.copysign(1.0, a) == math.copysign(1.0, b) or (a != a and b != b)
    if ta is np.ndarray:
        return a.shape == b.shape and a.tobytes() == b.tobytes()
    if ta is FnRef:
        return a is b
    return a == b


class ListObj:
    __slots__ = ("items",)

    def __init__(self, items):
        self.items = list(items)

    def copy(self) -> "ListObj":
        return ListObj(self.items)


class RecordObj:
    __slots__ = ("fields",)

    def __init__(self, fields):
        self.fields = dict(fields)

    def copy(self) -> "RecordObj":
        return RecordObj(self.fields)


GLOBALS_ID = 0


class Heap:
    """Arena of lists and records. Ids are monotonic and never reused.

    Entry 0 is the globals record; global variables are its attributes.
    """

    def __init__(self):
        self.entries: dict[int, ListObj | RecordObj] = {GLOBALS_ID: RecordObj({})}
        self.next_id = 1

    @property
    def globals_ref(self) -> RecordRef:
        return RecordRef(GLOBALS_ID)

    @property
    def globals(self) -> dict[str, Any]:
        return self.entries[GLOBALS_ID].fields

    def alloc_list(self, items) -> ListRef:
        hid = self.next_id
        self.next_id += 1
        self.entries[hid] = ListObj(items)
        return ListRef(hid)

    def alloc_record(self, fields) -> RecordRef:
        hid = self.next_id
        self.next_id += 1
        self.entries[hid] = RecordObj(fields)
        return RecordRef(hid)

    def obj(self, hid: int):
        return self.entries[hid]

    def snapshot(self, portable: bool = False) -> list:
        """Canonical, comparable encoding of the whole heap.

        With ``portable`` functions are encoded by definition site and
        captured values, so heaps of two separate runs compare equal.
        """
        enc = _portable if portable else encode_value
        out = [("next", self.next_id)]
        for hid in sorted(self.entries):
            obj = self.entries[hid]
            if isinstance(obj, ListObj):
                out.append((hid, "list", tuple(enc(v) for v in obj.items)))
            else:
                out.append((hid, "record", tuple(sorted((k, enc(v)) for k, v in obj.fields.items()))))
        return out


def _portable(v, _depth=0):
    if type(v) is FnRef:
        caps = () if _depth > 2 else tuple(sorted((k, _portable(c, _depth + 1)) for k, c in v.captures.items()))
        return ("F", v.fn.name, v.fn.site, caps)
    return encode_value(v)


def encode_value(v):
    """Hashable, bit-exact encoding of a value (used for comparison and JSON)."""
    k = kind_of(v)
    if k == FLOAT:
        return ("f", v.hex())
    if k == INT:
        return ("i", v)
    if k == BOOL:
        return ("b", v)
    if k == STR:
        return ("s", v)
    if k == NIL:
        return ("n",)
    if k == TENSOR:
        return ("t", tuple(v.shape), v.tobytes().hex())
    if k == LIST:
        return ("L", v.id)
    if k == RECORD:
        return ("R", v.id)
    return ("F", v.fn.name, v.fn.site, id(v))


def value_to_json(v):
    """JSON-safe tagged encoding (functions are encoded by definition site)."""
    k = kind_of(v)
    if k == FLOAT:
        return {"float": v.hex()}
    if k == INT:
        return {"int": v}
    if k == BOOL:
        return {"bool": v}
    if k == STR:
        return {"str": v}
    if k == NIL:
        return {"nil": None}
    if k == TENSOR:
        return {"tensor": {"shape": list(v.shape), "data": [x.hex() for x in v.ravel().tolist()]}}
    if k == LIST:
        return {"list": v.id}
    if k == RECORD:
        return {"record": v.id}
    return {"fn": v.fn.site}


def value_from_json(d, functions=None):
    (tag, payload), = d.items()
    if tag == "float":
        return float.fromhex(payload)
    if tag == "int":
        return payload
    if tag == "bool":
        return bool(payload)
    if tag == "str":
        return payload
    if tag == "nil":
        return None
    if tag == "tensor":
        data = [float.fromhex(x) for x in payload["data"]]
        return make_tensor(np.array(data, dtype=np.float64).reshape(payload["shape"]))
    if tag == "list":
        return ListRef(payload)
    if tag == "record":
        return RecordRef(payload)
    if tag == "fn":
        if functions is None or payload not in functions:
            raise ValueError(f"cannot decode function reference {payload}")
        return functions[payload]
    raise ValueError(f"unknown value tag {tag}")


# -- rendering ---------------------------------------------------------------

def render_float(x: float) -> str:
    return repr(x)


def _render_tensor(arr: np.ndarray) -> str:
    if arr.ndim == 0:
        return render_float(float(arr))
    return "[" + ", ".join(_render_tensor(sub) for sub in arr) + "]"


def render(v, get_obj: Callable[[int], Any], _seen=None) -> str:
    """Print-transcript rendering; ``get_obj`` maps a heap id to its object."""
    t = type(v)
    if t is bool:
        return "true" if v else "false"
    if t is int:
        return str(v)
    if t is float:
        return render_float(v)
    if t is str:
        return v
    if v is None:
        return "nil"
    if t is np.ndarray:
        return _render_tensor(v)
    if t is FnRef:
        return f"<fn {v.fn.name}>"
    seen = _seen or set()
    if v.id in seen:
        return "[...]" if t is ListRef else "record{...}"
    seen = seen | {v.id}
    obj = get_obj(v.id)
    if t is ListRef:
        return "[" + ", ".join(render(x, get_obj, seen) for x in obj.items) + "]"
    inner = ", ".join(f"{k}: {render(obj.fields[k], get_obj, seen)}" for k in sorted(obj.fields))
    return "record{" + inner + "}"


def expect_kind(v, kind: str, what: str):
    if kind_of(v) != kind:
        raise SLRuntimeError(TYPE_MISMATCH, f"{what} expects {kind}, got {kind_of(v)}")
    return v
