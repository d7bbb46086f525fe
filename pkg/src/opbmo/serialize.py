"""JSON encoding of symbols, operators and norm reports (format ``opbmo/1``)."""
from __future__ import annotations

import json

import numpy as np

from .dyadic import DepthError, DyadicIndex, MatrixSymbol
from .norms import NormReport
from .operators import AssembledOperator

FORMAT = "opbmo/1"


class FormatError(ValueError):
    pass


def matrix_to_json(A) -> dict:
    A = np.asarray(A)
    return {"re": np.real(A).tolist(), "im": np.imag(A).tolist()}


def matrix_from_json(obj, shape=None) -> np.ndarray:
    try:
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad matrix entry: {exc}") from None
    if re.shape != im.shape:
        raise FormatError("re and im parts differ in shape")
    if shape is not None and re.shape != tuple(shape):
        raise FormatError(f"matrix shape {re.shape}, expected {tuple(shape)}")
    return re + 1j * im


def _check_format(obj):
    if not isinstance(obj, dict):
        raise FormatError("expected a JSON object")
    fmt = obj.get("format", FORMAT)
    if fmt != FORMAT:
        raise FormatError(f"unsupported format {fmt!r}")


def symbol_to_json(B: MatrixSymbol) -> dict:
    coeffs = []
    for i in range(1, 2 ** B.depth):
        A = B.haar[i]
        if np.any(A):
            I = DyadicIndex.from_heap(i)
            coeffs.append({"level": I.level, "pos": I.pos, **matrix_to_json(A)})
    return {"format": FORMAT, "n": B.n, "depth": B.depth, "dc": matrix_to_json(B.dc), "coeffs": coeffs}


def symbol_from_json(obj) -> MatrixSymbol:
    _check_format(obj)
    try:
        n, depth = int(obj["n"]), int(obj["depth"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"symbol needs integer n and depth: {exc}") from None
    if n < 1 or depth < 1:
        raise FormatError("n and depth must be >= 1")
    dc = matrix_from_json(obj["dc"], (n, n)) if "dc" in obj else None
    coeffs = {}
    for c in obj.get("coeffs", []):
        level, pos = int(c["level"]), int(c["pos"])
        if level >= depth:
            raise FormatError(f"coefficient level {level} must be < depth {depth}")
        try:
            I = DyadicIndex(level, pos)
        except ValueError as exc:
            raise FormatError(str(exc)) from None
        if I in coeffs:
            raise FormatError(f"duplicate coefficient ({level}, {pos})")
        coeffs[I] = matrix_from_json(c, (n, n))
    try:
        return MatrixSymbol.from_coeffs(n, depth, dc, coeffs)
    except DepthError as exc:
        raise FormatError(str(exc)) from None


def operator_to_json(op: AssembledOperator) -> dict:
    return {"format": FORMAT, "kind": "operator", "n": op.n, "depth": op.depth, "domain": op.domain,
            "codomain": op.codomain, "label": op.label, "matrix": matrix_to_json(op.matrix)}


def operator_from_json(obj) -> AssembledOperator:
    _check_format(obj)
    try:
        return AssembledOperator(matrix_from_json(obj["matrix"]), int(obj["n"]), int(obj["depth"]),
                                 obj["domain"], obj["codomain"], obj.get("label", "composite"))
    except KeyError as exc:
        raise FormatError(f"operator missing field {exc}") from None


def _diag_value(v):
    if isinstance(v, DyadicIndex):
        return {"level": v.level, "pos": v.pos}
    if isinstance(v, np.ndarray):
        return matrix_to_json(v)
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    return v


def _diag_parse(key, v):
    if key == "interval":
        return DyadicIndex(v["level"], v["pos"])
    if isinstance(v, dict) and "re" in v:
        return matrix_from_json(v)
    return v


def report_to_json(rep: NormReport, B: MatrixSymbol | None = None) -> dict:
    out = {"format": FORMAT, "kind": "norm_report", "values": dict(rep.values),
           "diagnostics": {k: {dk: _diag_value(dv) for dk, dv in d.items()} for k, d in rep.diagnostics.items()}}
    if B is not None:
        out.update(n=B.n, depth=B.depth)
    return out


def report_from_json(obj) -> NormReport:
    _check_format(obj)
    rep = NormReport()
    rep.values = {k: float(v) for k, v in obj["values"].items()}
    rep.diagnostics = {k: {dk: _diag_parse(dk, dv) for dk, dv in d.items()}
                       for k, d in obj.get("diagnostics", {}).items()}
    return rep


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def load_json(path) -> object:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
