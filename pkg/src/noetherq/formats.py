"""JSON input formats and canonical report serialization.

Matrices are row-major nested lists; an entry is a number or a pair
``[re, im]``. Canonical output sorts keys and writes every float with 17
significant digits, so parsing a report and serializing it again is
byte-identical.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .channels import TRANSPOSE, KrausChannel, StochasticMapSpec, build_luders, channel_super
from .classical_markov import ClassicalChain
from .linalg_core import DEFAULT_TOL, SuperOperator, Tolerances, trace_dual
from .semigroups import LindbladGenerator, SemigroupSpec

__all__ = [
    "InputError", "load_json", "parse_matrix", "parse_channel", "parse_lindblad", "parse_chain",
    "parse_observable", "parse_vector", "load_dynamics", "ChannelInput", "canonical_dumps",
    "to_jsonable", "fixture_path", "list_fixtures",
]


class InputError(ValueError):
    """Malformed input file; carries the file, offending field and line when known."""

    def __init__(self, message: str, path: str | None = None, field: str | None = None,
                 line: int | None = None):
        self.path, self.field, self.line = path, field, line
        where = [str(path)] if path else []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class _Source:
    path: str
    text: str

    def line_of(self, field: str | None) -> int | None:
        """Line of the first occurrence of the top-level key of ``field``."""
        if not field:
            return None
        key = re.split(r"[\[.]", field, maxsplit=1)[0]
        m = re.search(r'"' + re.escape(key) + r'"\s*:', self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else None

    def error(self, message: str, field: str | None = None) -> InputError:
        return InputError(message, self.path, field, self.line_of(field))


FIXTURE_PREFIX = "fixture:"


def fixture_path(name: str) -> Path:
    base = resources.files("noetherq") / "fixtures"
    name = name if name.endswith(".json") else name + ".json"
    return Path(str(base / name))


def list_fixtures() -> list[str]:
    base = Path(str(resources.files("noetherq") / "fixtures"))
    return sorted(p.stem for p in base.glob("*.json"))


def load_json(path) -> tuple[dict, _Source]:
    path = str(path)
    real = fixture_path(path[len(FIXTURE_PREFIX):]) if path.startswith(FIXTURE_PREFIX) else Path(path)
    try:
        text = real.read_text()
    except OSError as exc:
        raise InputError(f"cannot read file ({exc.strerror})", path) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc.msg} (column {exc.colno})", path, None, exc.lineno) from None
    src = _Source(path, text)
    if not isinstance(data, dict):
        raise src.error("top-level value must be an object")
    return data, src


def _entry(x, src: _Source, field: str) -> complex:
    if isinstance(x, bool):
        raise src.error("booleans are not matrix entries", field)
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) and not isinstance(t, bool)
                                                   for t in x):
        return complex(x[0], x[1])
    raise src.error(f"expected a number or [re, im], got {json.dumps(x)}", field)


def parse_matrix(value, src: _Source, field: str, dim: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise src.error("expected a nonempty list of rows", field)
    n = len(value)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(value):
        if len(row) != n:
            raise src.error(f"row {i} has {len(row)} entries, expected {n} (matrices are square)",
                            f"{field}[{i}]")
        for j, x in enumerate(row):
            out[i, j] = _entry(x, src, f"{field}[{i}][{j}]")
    if not np.all(np.isfinite(out)):
        raise src.error("non-finite entry", field)
    if dim is not None and n != dim:
        raise src.error(f"matrix is {n}x{n} but dim is {dim}", field)
    return out


def parse_vector(value, src: _Source, field: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise src.error("expected a nonempty list of numbers", field)
    out = []
    for i, x in enumerate(value):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise src.error(f"expected a finite real number, got {json.dumps(x)}", f"{field}[{i}]")
        out.append(float(x))
    return np.array(out)


def _require(data: dict, key: str, src: _Source):
    if key not in data:
        raise src.error("missing required field", key)
    return data[key]


def _dim(data: dict, src: _Source, key: str = "dim") -> int:
    d = _require(data, key, src)
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise src.error(f"must be a positive integer, got {json.dumps(d)}", key)
    return d


def _matrix_list(value, src: _Source, field: str, dim: int) -> list[np.ndarray]:
    if not isinstance(value, list) or not value:
        raise src.error("expected a nonempty list of matrices", field)
    return [parse_matrix(m, src, f"{field}[{k}]", dim) for k, m in enumerate(value)]


@dataclass
class ChannelInput:
    """A parsed channel file: the Schroedinger map, its Heisenberg dual, and the Kraus data if any."""

    schrodinger: SuperOperator
    heisenberg: SuperOperator
    kraus: KrausChannel | None
    source: str
    description: str


def _picture(data: dict, src: _Source) -> str:
    p = data.get("picture", "schrodinger")
    if p not in ("schrodinger", "heisenberg"):
        raise src.error(f"must be 'schrodinger' or 'heisenberg', got {json.dumps(p)}", "picture")
    return p


def _stage(value, src: _Source, field: str, dim: int, tol: Tolerances):
    if value == "transpose":
        return TRANSPOSE
    if isinstance(value, dict) and "kraus" in value:
        ops = _matrix_list(value["kraus"], src, f"{field}.kraus", dim)
        try:
            return KrausChannel(dim, tuple(ops), "schrodinger", tol)
        except ValueError as exc:
            raise src.error(str(exc), field) from None
    raise src.error("a stage is either \"transpose\" or {\"kraus\": [...]} (Schroedinger picture)", field)


def parse_channel(data: dict, src: _Source, tol: Tolerances = DEFAULT_TOL) -> ChannelInput:
    dim = _dim(data, src)
    picture = _picture(data, src)
    kinds = [k for k in ("kraus", "effects", "stages", "pipelines", "superoperator") if k in data]
    if len(kinds) != 1:
        raise src.error("exactly one of kraus, effects, stages, pipelines, superoperator is required",
                        kinds[1] if len(kinds) > 1 else None)
    kind = kinds[0]
    ch = None
    try:
        if kind == "kraus":
            ops = _matrix_list(data["kraus"], src, "kraus", dim)
            ch = KrausChannel(dim, tuple(ops), picture, tol)
        elif kind == "effects":
            effects = _matrix_list(data["effects"], src, "effects", dim)
            ch = build_luders(effects, tol)
            picture = "schrodinger"
        elif kind in ("stages", "pipelines"):
            if kind == "stages":
                pipes = [data["stages"]]
                weights = (1.0,)
            else:
                pipes = data["pipelines"]
                if not isinstance(pipes, list) or not pipes:
                    raise src.error("expected a nonempty list of stage lists", "pipelines")
                w = data.get("weights", [1.0 / len(pipes)] * len(pipes))
                weights = tuple(parse_vector(w, src, "weights"))
            if not all(isinstance(p, list) and p for p in pipes):
                raise src.error("each pipeline is a nonempty list of stages", kind)
            built = tuple(tuple(_stage(s, src, f"{kind}[{i}][{j}]" if kind == "pipelines" else f"stages[{j}]",
                                       dim, tol) for j, s in enumerate(p)) for i, p in enumerate(pipes))
            S = StochasticMapSpec(dim, built, weights).compile(tol)
            picture = "schrodinger"
            if data.get("picture", "schrodinger") != "schrodinger":
                raise src.error("pipelines are Schroedinger-picture maps", "picture")
            return ChannelInput(S, trace_dual(S, tol), None, src.path, f"stochastic map ({kind})")
        else:
            M = np.asarray(parse_matrix(data["superoperator"], src, "superoperator", dim * dim))
            S = SuperOperator(M)
            if picture == "schrodinger":
                return ChannelInput(S, trace_dual(S, tol), None, src.path, "superoperator")
            return ChannelInput(trace_dual(S, tol), S, None, src.path, "superoperator")
    except InputError:
        raise
    except ValueError as exc:
        raise src.error(str(exc), kind) from None
    S = channel_super(ch)
    desc = f"Kraus channel ({len(ch.kraus_ops)} operators)" if kind == "kraus" else "Lueders channel"
    if ch.picture == "schrodinger":
        return ChannelInput(S, channel_super(ch.dual()), ch, src.path, desc)
    return ChannelInput(channel_super(ch.dual()), S, ch, src.path, desc)


def parse_lindblad(data: dict, src: _Source, tol: Tolerances = DEFAULT_TOL,
                   times=None) -> SemigroupSpec:
    dim = _dim(data, src)
    ops = data.get("lindblad", [])
    Ls = _matrix_list(ops, src, "lindblad", dim) if ops else []
    H = parse_matrix(data["hamiltonian"], src, "hamiltonian", dim) if "hamiltonian" in data else None
    try:
        g = LindbladGenerator(dim, tuple(Ls), H, _picture(data, src))
    except ValueError as exc:
        raise src.error(str(exc), "hamiltonian") from None
    return SemigroupSpec.from_lindblad(g, times) if times else SemigroupSpec.from_lindblad(g)


def parse_chain(data: dict, src: _Source) -> ClassicalChain:
    n = _dim(data, src, "states")
    kind = data.get("kind", "stochastic_matrix")
    if kind not in ("stochastic_matrix", "rate_matrix"):
        raise src.error(f"must be 'stochastic_matrix' or 'rate_matrix', got {json.dumps(kind)}", "kind")
    M = parse_matrix(_require(data, "matrix", src), src, "matrix", n)
    if np.abs(M.imag).max() > 0:
        raise src.error("chain matrices are real", "matrix")
    return ClassicalChain(M.real, kind)


def parse_observable(data: dict, src: _Source, dim: int | None = None):
    """``{"observable": matrix}`` for operators or ``{"values": [...]}`` for classical observables."""
    if "values" in data:
        v = parse_vector(data["values"], src, "values")
        if dim is not None and v.shape[0] != dim:
            raise src.error(f"observable has {v.shape[0]} values, expected {dim}", "values")
        return v
    if "observable" in data:
        return parse_matrix(data["observable"], src, "observable", dim)
    raise src.error("missing required field 'observable' (or 'values')", "observable")


def load_dynamics(path, tol: Tolerances = DEFAULT_TOL, times=None):
    """Parse a channel or Lindblad file; returns ``("channel", ChannelInput)`` or ``("lindblad", SemigroupSpec)``."""
    data, src = load_json(path)
    if "lindblad" in data or "hamiltonian" in data:
        return "lindblad", parse_lindblad(data, src, tol, times)
    return "channel", parse_channel(data, src, tol)


# --------------------------------------------------------------------------
# canonical output
# --------------------------------------------------------------------------

def to_jsonable(x):
    """Convert numpy values, complex numbers and operators to plain JSON data."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            if np.all(x.imag == 0):
                return to_jsonable(x.real.tolist())
            return to_jsonable(np.stack([x.real, x.imag], axis=-1).tolist())
        return to_jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if x is None or isinstance(x, str):
        return x
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    s = format(x, ".17g")
    if s == "-0":
        s = "0"
    return s


def canonical_dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {canonical_dumps(obj[k], indent, _level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(canonical_dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + canonical_dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    return canonical_dumps(to_jsonable(obj), indent, _level)
