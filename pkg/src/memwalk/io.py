"""File formats: coordinate tensor text, hypergraph JSON, trajectory CSV.

Tensor text format (1-based coordinates, ``#`` starts a comment):

    tensor <order> <d1> <d2> ... <dk>
    i1 i2 ... ik value

Unlisted entries are zero.  Hypergraph JSON holds ``{"n", "k", "directed",
"edges"}`` where directed edges are ``{"head", "tail", "weight"}`` and
undirected ones ``{"nodes", "weight"}``; a file may not mix the two kinds.
Floats are written as shortest round-trip decimals, so re-parsing an output
reproduces every value exactly.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import IO

import numpy as np

from .ctmc import TrajectoryRecord
from .errors import ParseError
from .hypergraph import DirectedHypergraph
from .tensor import DenseTensor

__all__ = [
    "dump_dense_tensor",
    "dump_hypergraph",
    "format_float",
    "load_dense_tensor",
    "load_hypergraph",
    "load_vector",
    "read_trajectory_csv",
    "write_trajectory_csv",
]


def format_float(value: float) -> str:
    """Shortest decimal that round-trips to the same float."""
    return repr(float(value))


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def load_dense_tensor(path) -> DenseTensor:
    """Read a tensor from the coordinate text format."""
    lines = Path(path).read_text().splitlines()
    shape = None
    entries = []
    for lineno, raw in enumerate(lines, start=1):
        text = _strip(raw)
        if not text:
            continue
        tokens = text.split()
        if shape is None:
            if tokens[0] != "tensor":
                raise ParseError(f"expected header starting with 'tensor', got {tokens[0]!r}", lineno)
            try:
                order = int(tokens[1])
                dims = tuple(int(t) for t in tokens[2:])
            except (IndexError, ValueError) as exc:
                raise ParseError(f"malformed header: {exc}", lineno) from None
            if len(dims) != order or order < 1 or any(d < 1 for d in dims):
                raise ParseError(
                    f"header declares order {order} but lists {len(dims)} mode sizes",
                    lineno,
                )
            shape = dims
            continue
        if len(tokens) != len(shape) + 1:
            raise ParseError(
                f"expected {len(shape)} indices and a value, got {len(tokens)} tokens",
                lineno,
            )
        try:
            index = tuple(int(t) for t in tokens[:-1])
            value = float(tokens[-1])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        for mode, (i, d) in enumerate(zip(index, shape), start=1):
            if not 1 <= i <= d:
                raise ParseError(
                    f"index {i} out of range 1..{d} in mode {mode}", lineno
                )
        entries.append((index, value))
    if shape is None:
        raise ParseError("file contains no tensor header")
    return DenseTensor.from_entries(shape, entries)


def dump_dense_tensor(tensor: DenseTensor, path, comment: str | None = None) -> None:
    """Write the nonzero entries of a tensor in the coordinate text format."""
    lines = []
    if comment:
        lines.append(f"# {comment}")
    dims = " ".join(str(d) for d in tensor.shape)
    lines.append(f"tensor {tensor.order} {dims}")
    for index, value in tensor.nonzero_entries():
        coords = " ".join(str(i) for i in index)
        lines.append(f"{coords} {format_float(value)}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_hypergraph(path) -> DirectedHypergraph:
    """Read a directed or undirected hypergraph from JSON."""
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    for key in ("n", "k", "edges"):
        if key not in payload:
            raise ParseError(f"hypergraph JSON is missing the {key!r} field")
    n = int(payload["n"])
    k = int(payload["k"])
    directed_flag = payload.get("directed")
    edges = payload["edges"]
    if not isinstance(edges, list) or not edges:
        raise ParseError("hypergraph 'edges' must be a non-empty list")
    kinds = {("head" in e) for e in edges if isinstance(e, dict)}
    if len(kinds) > 1:
        raise ParseError("hypergraph file mixes directed and undirected edges")
    is_directed = kinds == {True}
    if directed_flag is not None and bool(directed_flag) != is_directed:
        raise ParseError("'directed' flag contradicts the edge entries")
    if is_directed:
        triples = []
        for e in edges:
            if "tail" not in e:
                raise ParseError(f"directed edge missing 'tail': {e}")
            triples.append((e["head"], e["tail"], float(e.get("weight", 1.0))))
        return DirectedHypergraph(n, k, triples)
    sets = []
    for e in edges:
        if not isinstance(e, dict) or "nodes" not in e:
            raise ParseError(f"undirected edge missing 'nodes': {e}")
        sets.append((e["nodes"], float(e.get("weight", 1.0))))
    return DirectedHypergraph.from_undirected(n, k, sets)


def dump_hypergraph(graph: DirectedHypergraph, path) -> None:
    if graph.undirected_source is not None:
        edges = [
            {"nodes": list(nodes), "weight": weight}
            for nodes, weight in graph.undirected_source
        ]
        directed = False
    else:
        edges = [
            {"head": head, "tail": list(tail), "weight": weight}
            for head, tail, weight in graph.edges
        ]
        directed = True
    payload = {"n": graph.n, "k": graph.k, "directed": directed, "edges": edges}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_vector(path) -> np.ndarray:
    """Read a flat vector of floats; whitespace, newlines, or commas separate."""
    tokens = []
    for raw in Path(path).read_text().splitlines():
        text = _strip(raw)
        if text:
            tokens.extend(t for t in text.replace(",", " ").split() if t)
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ParseError(f"invalid vector entry: {exc}") from None


def write_trajectory_csv(record: TrajectoryRecord, target: IO[str] | str | Path) -> None:
    """Write a trajectory as ``t,x1,..,xn,mass[,V]`` rows."""
    n = record.states.shape[1]
    header = ["t"] + [f"x{i}" for i in range(1, n + 1)] + ["mass"]
    with_v = record.lyapunov is not None
    if with_v:
        header.append("V")
    rows = [",".join(header)]
    for k in range(record.times.size):
        cells = [format_float(record.times[k])]
        cells.extend(format_float(v) for v in record.states[k])
        cells.append(format_float(record.mass[k]))
        if with_v:
            cells.append(format_float(record.lyapunov[k]))
        rows.append(",".join(cells))
    text = "\n".join(rows) + "\n"
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)


def read_trajectory_csv(path) -> TrajectoryRecord:
    """Parse a trajectory CSV written by :func:`write_trajectory_csv`."""
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    if not lines:
        raise ParseError("trajectory file is empty")
    header = lines[0].split(",")
    if header[0] != "t" or "mass" not in header:
        raise ParseError("trajectory header must be t,x1,..,xn,mass[,V]")
    with_v = header[-1] == "V"
    n = len(header) - (3 if with_v else 2)
    times, states, mass, lyap = [], [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise ParseError(f"expected {len(header)} cells", lineno)
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        times.append(values[0])
        states.append(values[1 : 1 + n])
        mass.append(values[1 + n])
        if with_v:
            lyap.append(values[-1])
    return TrajectoryRecord(
        np.array(times),
        np.array(states),
        np.array(mass),
        np.array(lyap) if with_v else None,
        None,
    )
