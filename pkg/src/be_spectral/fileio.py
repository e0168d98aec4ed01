"""On-disk formats: edge lists, CSV signals, parameter checkpoints.

Edge lists are one ``i j`` pair per line (0-based, whitespace separated,
``#`` starts a comment); the node count is the largest index plus one
unless passed explicitly. Signals are plain CSV, one node per row.
Checkpoints are a JSON manifest plus one raw little-endian float64 blob
per parameter tensor.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graphs import Graph, build_graph


def read_edge_list(path, n: int | None = None) -> Graph:
    edges = []
    for line_no, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{line_no}: expected 'i j', got {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        if not edges:
            raise ValueError(f"{path}: empty edge list needs an explicit node count")
        n = max(max(e) for e in edges) + 1
    return build_graph(n, edges)


def write_edge_list(g: Graph, path) -> None:
    lines = [f"{i} {j}" for i, j in g.edges]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def read_csv_matrix(path) -> np.ndarray:
    """CSV of floats, row r = values of node r; returns (n, c) or (n,)."""
    data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=1)
    return data


def write_csv_matrix(arr: np.ndarray, path, header: str | None = None) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    np.savetxt(path, arr, delimiter=",", fmt="%.17g",
               header=header or "", comments="" if header else "# ")


def save_checkpoint(directory, params: dict, meta: dict | None = None) -> Path:
    """Write a manifest + one .bin blob per parameter; returns the directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for idx, (name, value) in enumerate(sorted(params.items())):
        value = np.asarray(value, dtype=np.float64)
        fname = f"param_{idx:04d}.bin"
        (directory / fname).write_bytes(value.astype("<f8").tobytes())
        entries.append({"name": name, "shape": list(value.shape),
                        "dtype": "<f8", "file": fname})
    manifest = {"format": "be-spectral-checkpoint/1", "tensors": entries,
                "meta": meta or {}}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_checkpoint(directory):
    """Returns (params dict, meta dict)."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    params = {}
    for entry in manifest["tensors"]:
        raw = (directory / entry["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        params[entry["name"]] = arr.reshape(entry["shape"])
    return params, manifest.get("meta", {})


def dump_instance(directory, instance) -> Path:
    """Per-instance dataset dump: graph.edges, x.csv, y.csv, mask.csv, meta.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_edge_list(instance.graph, directory / "graph.edges")
    write_csv_matrix(instance.X, directory / "x.csv")
    write_csv_matrix(np.atleast_1d(instance.y), directory / "y.csv")
    if instance.mask is not None:
        write_csv_matrix(instance.mask.astype(np.float64), directory / "mask.csv")
    (directory / "meta.json").write_text(json.dumps(instance.meta, indent=2))
    return directory
