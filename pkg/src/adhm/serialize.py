"""File formats: data (JSON), kernels (JSON tag or binary), field samples.

Quaternion components are always written in the order (e1, e2, e3, 1),
matching the in-memory layout.  A data file is either

  finite data:    {"L": [[q1,q2,q3,q4], ...], "M": [[[...], ...], ...]}

  boundary data:  {"scheme": "product", "counts": [np, nt, nf], "L": [...]}
                  {"scheme": "mc", "n": N, "seed": s, "L": [...]}
                  {"scheme": "custom", "nodes": [...], "weights": [...], "L": [...]}

with optional boundary keys "expression" (a real L(y) as an arithmetic
expression in y1..y4, used to resample L at fresh Monte Carlo points) and
"kernel" (either {"kind": "simple-example", "lambda": l} or
{"kind": "file", "path": "..."} pointing at a binary kernel).

The binary kernel format is little-endian: 8-byte magic "ADHMKERN",
uint32 N, uint32 reserved, then N*N*4 float64 entries, row-major.
"""

import json
import math
import struct
from pathlib import Path

import numpy as np

from adhm.finite import ADHMData
from adhm.boundary import BoundaryData, KernelP, S3Grid, build_grid, mc_grid, simple_example

KERNEL_MAGIC = b"ADHMKERN"

_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp,
    "sqrt": np.sqrt, "abs": np.abs, "pi": math.pi,
}


class ParseError(ValueError):
    """Malformed input file."""


def compile_expression(expr):
    """Real L(y) from an arithmetic expression in y1..y4.

    Evaluated with numpy broadcasting over the node stack and no builtins,
    so data files stay declarative.
    """
    code = compile(expr, "<boundary expression>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMES and name not in ("y1", "y2", "y3", "y4"):
            raise ParseError(f"unknown name {name!r} in expression")

    def fn(nodes):
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        env = dict(_EXPR_NAMES)
        env.update(y1=nodes[:, 0], y2=nodes[:, 1], y3=nodes[:, 2], y4=nodes[:, 3])
        vals = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(vals, dtype=float), (nodes.shape[0],)).copy()

    return fn


def save_kernel(path, kernel):
    """Write dense kernel entries in the binary format."""
    entries = np.ascontiguousarray(kernel.to_dense(), dtype="<f8")
    n = entries.shape[0]
    with open(path, "wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(struct.pack("<II", n, 0))
        fh.write(entries.tobytes())


def load_kernel(path, grid):
    """Read a binary kernel and bind it to the given grid."""
    raw = Path(path).read_bytes()
    if raw[:8] != KERNEL_MAGIC:
        raise ParseError(f"{path}: bad kernel magic")
    n, _ = struct.unpack("<II", raw[8:16])
    expected = 16 + n * n * 4 * 8
    if len(raw) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, got {len(raw)}")
    if n != grid.n:
        raise ParseError(f"{path}: kernel rank {n} does not match grid ({grid.n})")
    entries = np.frombuffer(raw[16:], dtype="<f8").reshape(n, n, 4)
    return KernelP.from_dense(grid, entries.astype(float))


def boundary_to_dict(data, kernel_tag=None, expression=None):
    grid = data.grid
    obj = {"L": data.values.tolist()}
    if grid.scheme == "product":
        obj["scheme"] = "product"
        obj["counts"] = list(grid.params)
    elif grid.scheme == "mc":
        obj["scheme"] = "mc"
        obj["n"], obj["seed"] = grid.params
    else:
        obj["scheme"] = "custom"
        obj["nodes"] = grid.nodes.tolist()
        obj["weights"] = grid.weights.tolist()
    if expression is not None:
        obj["expression"] = expression
    if kernel_tag is not None:
        obj["kernel"] = kernel_tag
    return obj


def _grid_from_dict(obj):
    scheme = obj["scheme"]
    if scheme == "product":
        return build_grid(*obj["counts"])
    if scheme == "mc":
        return mc_grid(obj["n"], obj["seed"])
    if scheme == "custom":
        return S3Grid(nodes=np.asarray(obj["nodes"], dtype=float),
                      weights=np.asarray(obj["weights"], dtype=float),
                      scheme="custom")
    raise ParseError(f"unknown grid scheme {scheme!r}")


def boundary_from_dict(obj, base_dir="."):
    """(BoundaryData, KernelP or None) from a parsed boundary file."""
    grid = _grid_from_dict(obj)
    fn = compile_expression(obj["expression"]) if "expression" in obj else None
    if "L" in obj:
        values = np.asarray(obj["L"], dtype=float)
        if values.ndim == 1:
            full = np.zeros((grid.n, 4))
            full[:, 3] = values
            values = full
        data = BoundaryData(grid=grid, values=values, fn=fn)
    elif fn is not None:
        data = BoundaryData.from_function(grid, fn)
    else:
        raise ParseError("boundary file needs either L values or an expression")

    kernel = None
    tag = obj.get("kernel")
    if tag is not None:
        kind = tag.get("kind")
        if kind == "simple-example":
            _, kernel, _ = simple_example(tag["lambda"], grid)
        elif kind == "file":
            kernel = load_kernel(Path(base_dir) / tag["path"], grid)
        elif kind == "zero":
            kernel = KernelP.zero(grid)
        else:
            raise ParseError(f"unknown kernel kind {kind!r}")
    return data, kernel


def load_data_file(path):
    """Detect and load a data file; returns ADHMData or (BoundaryData, kernel)."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected a JSON object")
    if "M" in obj and "L" in obj:
        try:
            return ADHMData.from_dict(obj)
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{path}: {exc}") from exc
    if "scheme" in obj:
        try:
            return boundary_from_dict(obj, base_dir=Path(path).parent)
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{path}: {exc}") from exc
    raise ParseError(f"{path}: neither finite data (L, M) nor boundary data (scheme)")
