"""Loading and validating YAML problem files.

Example::

    function:
      expression: "(x^2 - 1)^2"    # or `table: [[x, f(x)], ...]` / `values: [...]`
      box: [-2, 2]                 # [[lo, hi], [lo, hi]] for two coordinates
      step: 0.5
    linear_term:
      expression: "0"              # in t; or `samples: [...]` / `constant: ...`
    horizon: 1.0
    endpoints: {u0: 0, u1: 0}
    numerics: {nodes: 1001, n_chatter: 16}
    outputs: {dir: out}
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .convex import SampledFunction
from .errors import ProblemFileError
from .expr import ExpressionError, compile_expression
from .problem import LinearTerm, ProblemSpec

_SECTIONS = {"function", "linear_term", "horizon", "endpoints", "numerics", "outputs"}
_FUNCTION_KEYS = {"expression", "table", "values", "box", "step"}
_LINEAR_KEYS = {"expression", "samples", "constant"}
_ENDPOINT_KEYS = {"u0", "u1"}
_NUMERIC_KEYS = {
    "nodes",
    "n_chatter",
    "tol",
    "shells",
    "threshold",
    "min_decrease_shells",
    "tol_cert",
    "tol_gap",
    "oracle_steps",
    "oracle_levels",
}
_OUTPUT_KEYS = {"dir"}


@dataclass
class Numerics:
    nodes: int = 1001
    n_chatter: int = 16
    tol: float = 1e-6
    shells: list[float] | None = None
    threshold: float | None = None
    min_decrease_shells: int = 3
    tol_cert: float | None = None
    tol_gap: float | None = None
    oracle_steps: int = 200
    oracle_levels: int = 401

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class ProblemFile:
    f: SampledFunction
    spec: ProblemSpec | None
    numerics: Numerics = field(default_factory=Numerics)
    out_dir: str = "out"
    source: str = ""


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ProblemFileError(f"unknown key {key!r} in {where}", f"{where}.{key}")


def _section(doc: dict, name: str, required: bool) -> Any:
    if name not in doc or doc[name] is None:
        if required:
            raise ProblemFileError(f"missing required field {name!r}", name)
        return None
    return doc[name]


def _floats(value, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"{where} must be numeric", where) from exc
    return arr


def _parse_function(sec: dict) -> SampledFunction:
    if not isinstance(sec, dict):
        raise ProblemFileError("function must be a mapping", "function")
    _reject_unknown(sec, _FUNCTION_KEYS, "function")
    for key in ("box", "step"):
        if key not in sec:
            raise ProblemFileError(f"missing required field 'function.{key}'", f"function.{key}")
    box = _floats(sec["box"], "function.box")
    box = box.reshape(1, 2) if box.shape == (2,) else box
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] not in (1, 2):
        raise ProblemFileError("box must be [lo, hi] or [[lo, hi], [lo, hi]]", "function.box")
    m = box.shape[0]
    step = np.broadcast_to(_floats(sec["step"], "function.step"), (m,))
    sources = [k for k in ("expression", "table", "values") if k in sec]
    if len(sources) != 1:
        raise ProblemFileError(
            "function needs exactly one of expression, table, values", "function"
        )
    lo, hi = box[:, 0], box[:, 1]
    try:
        if "expression" in sec:
            names = ("x",) if m == 1 else ("x", "y")
            func = compile_expression(sec["expression"], names)
            return SampledFunction.from_callable(func, lo, hi, step)
        counts = tuple(int(round((hi[k] - lo[k]) / step[k])) + 1 for k in range(m))
        if "values" in sec:
            vals = _floats(sec["values"], "function.values")
            vals = np.where(np.isnan(vals), np.inf, vals)
            return SampledFunction(lo, hi, step, vals.reshape(counts))
        table = _floats(sec["table"], "function.table")
        if table.ndim != 2 or table.shape[1] != m + 1:
            raise ProblemFileError(f"table rows must have {m + 1} entries", "function.table")
        vals = np.full(counts, np.inf)
        for row in table:
            idx = tuple(
                int(round((row[k] - lo[k]) / step[k])) for k in range(m)
            )
            node = np.array([lo[k] + idx[k] * step[k] for k in range(m)])
            if any(i < 0 or i >= n for i, n in zip(idx, counts)) or np.abs(
                node - row[:m]
            ).max() > 1e-9 * (1 + np.abs(row[:m]).max()):
                raise ProblemFileError(f"table point {row[:m]} is not a grid node", "function.table")
            vals[idx] = row[m]
        return SampledFunction(lo, hi, step, vals)
    except ExpressionError as exc:
        raise ProblemFileError(str(exc), "function.expression") from exc
    except ValueError as exc:
        raise ProblemFileError(str(exc), "function") from exc


def _parse_linear(sec, m: int, T: float) -> LinearTerm:
    if sec is None:
        return LinearTerm.zero(m)
    if isinstance(sec, (int, float)):
        return LinearTerm.constant(np.full(m, float(sec)))
    if not isinstance(sec, dict):
        raise ProblemFileError("linear_term must be a mapping or a number", "linear_term")
    _reject_unknown(sec, _LINEAR_KEYS, "linear_term")
    if len(sec) != 1:
        raise ProblemFileError(
            "linear_term needs exactly one of expression, samples, constant", "linear_term"
        )
    if "constant" in sec:
        c = np.broadcast_to(_floats(sec["constant"], "linear_term.constant"), (m,))
        return LinearTerm.constant(c)
    if "samples" in sec:
        s = _floats(sec["samples"], "linear_term.samples")
        try:
            return LinearTerm(m, samples=s, horizon=T)
        except ValueError as exc:
            raise ProblemFileError(str(exc), "linear_term.samples") from exc
    exprs = sec["expression"]
    exprs = [exprs] if isinstance(exprs, (str, int, float)) else list(exprs)
    if len(exprs) != m:
        raise ProblemFileError(f"need {m} expressions for a(t)", "linear_term.expression")
    try:
        funcs = [compile_expression(e, ("t",)) for e in exprs]
    except ExpressionError as exc:
        raise ProblemFileError(str(exc), "linear_term.expression") from exc
    return LinearTerm(m, func=lambda t: np.column_stack([g(t) for g in funcs]))


def _parse_numerics(sec) -> Numerics:
    num = Numerics()
    if sec is None:
        return num
    if not isinstance(sec, dict):
        raise ProblemFileError("numerics must be a mapping", "numerics")
    _reject_unknown(sec, _NUMERIC_KEYS, "numerics")
    for key, value in sec.items():
        where = f"numerics.{key}"
        if key == "shells":
            setattr(num, key, [float(r) for r in _floats(value, where).ravel()])
        elif key in ("nodes", "n_chatter", "min_decrease_shells", "oracle_steps", "oracle_levels"):
            if not isinstance(value, int) or value < 1:
                raise ProblemFileError(f"{where} must be a positive integer", where)
            setattr(num, key, value)
        else:
            setattr(num, key, float(_floats(value, where)))
    return num


def parse_problem(doc: Any, require_all: bool = True, source: str = "") -> ProblemFile:
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must be a mapping of sections", "<root>")
    _reject_unknown(doc, _SECTIONS, "<root>")
    f = _parse_function(_section(doc, "function", True))
    numerics = _parse_numerics(doc.get("numerics"))
    out = doc.get("outputs") or {}
    if not isinstance(out, dict):
        raise ProblemFileError("outputs must be a mapping", "outputs")
    _reject_unknown(out, _OUTPUT_KEYS, "outputs")
    spec = None
    if require_all or any(k in doc for k in ("horizon", "endpoints")):
        T = _section(doc, "horizon", True)
        if not isinstance(T, (int, float)) or not T > 0:
            raise ProblemFileError("horizon must be a positive number", "horizon")
        ends = _section(doc, "endpoints", True)
        if not isinstance(ends, dict):
            raise ProblemFileError("endpoints must be a mapping", "endpoints")
        _reject_unknown(ends, _ENDPOINT_KEYS, "endpoints")
        for key in ("u0", "u1"):
            if key not in ends or ends[key] is None:
                raise ProblemFileError(
                    f"missing required field 'endpoints.{key}'", f"endpoints.{key}"
                )
        u0 = np.broadcast_to(_floats(ends["u0"], "endpoints.u0"), (f.dim,))
        u1 = np.broadcast_to(_floats(ends["u1"], "endpoints.u1"), (f.dim,))
        a = _parse_linear(doc.get("linear_term"), f.dim, float(T))
        spec = ProblemSpec(float(T), u0, u1, a, f)
    return ProblemFile(f, spec, numerics, str(out.get("dir", "out")), source)


def load_problem(path: str | Path, require_all: bool = True) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}", "<file>") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "<file>"
        raise ProblemFileError(f"YAML error at {where}: {exc}", where) from exc
    return parse_problem(doc, require_all, str(path))
