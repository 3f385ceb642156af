"""Readers and writers: Matrix Market, dense CSV, graph JSON and run traces.

Floats are written with ``repr`` (shortest round-trip form), so every value
read back is bit-identical to the one written.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse

from .balancer import PHASE_CODES, PHASE_NAMES, BalanceTrace, PhaseRecord, ScheduleSpec
from .graph import GraphFunction, MatrixNotIrreducible, from_matrix, is_irreducible

FORMATS = ("matrix-market", "csv", "graph-json")
TRACE_VERSION = 1


class ParseError(ValueError):
    pass


@dataclass
class LoadedInput:
    alpha: GraphFunction
    entries: np.ndarray | None  # original dense entries, None for graph JSON
    format: str


def guess_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".mtx", ".mm"):
        return "matrix-market"
    if suffix == ".csv":
        return "csv"
    if suffix == ".json":
        return "graph-json"
    raise ParseError(f"cannot infer format of {path}; pass --format")


def read_matrix_market(path) -> np.ndarray:
    try:
        mat = scipy.io.mmread(str(path))
    except Exception as exc:  # scipy raises a mix of ValueError/OSError/IndexError
        raise ParseError(f"{path}: {exc}") from exc
    if scipy.sparse.issparse(mat):
        mat = mat.toarray()
    return np.asarray(mat)


def write_matrix_market(path, entries) -> None:
    entries = np.asarray(entries)
    scipy.io.mmwrite(str(path), scipy.sparse.coo_matrix(entries), precision=17)


def _cell(s: str):
    s = s.strip().replace(" ", "")
    if not s:
        return 0.0
    try:
        return float(s)
    except ValueError:
        return complex(s.replace("i", "j"))


def read_csv(path) -> np.ndarray:
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty CSV")
    try:
        cells = [[_cell(c) for c in r] for r in rows]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if any(len(r) != len(cells) for r in cells):
        raise ParseError(f"{path}: CSV is not a square matrix")
    dtype = complex if any(isinstance(c, complex) for r in cells for c in r) else float
    return np.array(cells, dtype=dtype)


def write_csv(path, entries) -> None:
    entries = np.asarray(entries)
    fmt = (lambda z: repr(complex(z))[1:-1] if z.imag else repr(float(z.real))) \
        if np.iscomplexobj(entries) else (lambda x: repr(float(x)))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        for row in entries:
            wr.writerow([fmt(x) for x in row])


def graph_to_json(alpha: GraphFunction) -> dict:
    return {"n": alpha.n, "edges": [{"u": u, "v": v, "w": w} for u, v, w in alpha.edges()]}


def graph_from_json(obj) -> GraphFunction:
    try:
        n = int(obj["n"])
        edges = [(int(e["u"]), int(e["v"]), float(e["w"])) for e in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed graph JSON: {exc}") from exc
    return GraphFunction.from_edges(n, edges)


def read_graph_json(path) -> GraphFunction:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return graph_from_json(obj)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_input(path, fmt: str | None = None) -> LoadedInput:
    """Read a matrix or graph file; raises ParseError or a GraphError."""
    fmt = fmt or guess_format(path)
    if fmt not in FORMATS:
        raise ParseError(f"unknown format {fmt!r}")
    if not Path(path).exists():
        raise ParseError(f"{path}: no such file")
    if fmt == "graph-json":
        alpha = read_graph_json(path)
        ok, comps = is_irreducible(alpha)
        if not ok:
            raise MatrixNotIrreducible(comps)
        return LoadedInput(alpha, None, fmt)
    entries = read_matrix_market(path) if fmt == "matrix-market" else read_csv(path)
    return LoadedInput(from_matrix(entries), entries, fmt)


# --- traces -----------------------------------------------------------------

def write_trace(path, trace: BalanceTrace, seed: int, extra: dict | None = None) -> None:
    """JSON lines: a header, one line per operation, and a closing summary.

    The closing line doubles as an end marker, so a truncated file is
    detected on read.
    """
    if not trace.recorded:
        raise ValueError("trace has no recorded steps")
    header = {"kind": "header", "version": TRACE_VERSION, "seed": seed, "n": trace.n,
              "schedule": trace.schedule.to_dict(), "epsilon": trace.epsilon,
              "delta": trace.delta, "T": trace.T}
    if extra:
        header.update(extra)
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for t, (mode, v, amt) in enumerate(zip(trace.modes.tolist(), trace.vertices.tolist(),
                                               trace.amounts.tolist())):
            fh.write(json.dumps({"t": t, "phase": PHASE_NAMES[mode], "v": v, "amount": amt}) + "\n")
        end = {"kind": "end", "steps": int(trace.vertices.size), "summary": trace.summary(),
               "raising": trace.raising.tolist(), "lowering": trace.lowering.tolist()}
        fh.write(json.dumps(end, sort_keys=True) + "\n")


def read_trace(path) -> tuple[dict, BalanceTrace]:
    """Parse a trace file back into ``(header, BalanceTrace)``."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ParseError(str(exc)) from exc
    try:
        header = json.loads(lines[0])
        end = json.loads(lines[-1])
        steps = [json.loads(ln) for ln in lines[1:-1]]
    except (IndexError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: unreadable trace ({exc})") from exc
    if header.get("kind") != "header" or end.get("kind") != "end":
        raise ParseError(f"{path}: missing header or end marker (truncated?)")
    if end.get("steps") != len(steps):
        raise ParseError(f"{path}: expected {end.get('steps')} steps, found {len(steps)}")
    try:
        if any(s["t"] != i for i, s in enumerate(steps)):
            raise ParseError(f"{path}: step numbering is not contiguous")
        modes = np.array([PHASE_CODES[s["phase"]] for s in steps], dtype=np.int8)
        verts = np.array([int(s["v"]) for s in steps], dtype=np.int64)
        amts = np.array([float(s["amount"]) for s in steps], dtype=np.float64)
        summ = end["summary"]
        phases = [PhaseRecord(**ph) for ph in summ["phases"]]
        trace = BalanceTrace(
            schedule=ScheduleSpec(**header["schedule"]),
            epsilon=float(header["epsilon"]),
            n=int(header["n"]),
            phases=phases,
            scaling=np.array(summ["scaling"], dtype=float),
            raising=np.array(end["raising"], dtype=float),
            lowering=np.array(end["lowering"], dtype=float),
            final_rho=float(summ["rho"]),
            final_rho_raise=float(summ["rho_R"]),
            final_rho_lower=float(summ["rho_L"]),
            vertices=verts,
            amounts=amts,
            modes=modes,
            delta=header.get("delta"),
            T=header.get("T"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed trace ({exc})") from exc
    return header, trace
