"""Line-oriented dump formats and CSV output.

Trajectory dumps: a header with window bounds, then one run-length
encoded occupation line per time step.  Configuration dumps: a header
(columns, row range, probability, seed), then one 0/1 row of edge bits
per column.  Geodesic trace records: one line per sample carrying the
fields regression diffs care about (seed, parameters, path, step kinds,
candidate/bad counts, cluster sizes, bypass length).
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .cross import CrossConfig
from .percolation import BondConfig
from .tasep import Trajectory

CSV_HEADER = ("lambda", "epsilon", "n", "seed", "value", "stderr")


def _rle_encode(bits: np.ndarray) -> str:
    # runs as "<bit>x<len>" in ascending site order
    if bits.size == 0:
        return "-"
    change = np.nonzero(np.diff(bits.astype(np.int8)))[0]
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change + 1, [bits.size]))
    return ",".join(f"{int(bits[s])}x{e - s}" for s, e in zip(starts, ends))


def _rle_decode(text: str, width: int) -> np.ndarray:
    out = np.empty(width, dtype=bool)
    pos = 0
    if text != "-":
        for token in text.split(","):
            bit, _, count = token.partition("x")
            c = int(count)
            out[pos : pos + c] = bit == "1"
            pos += c
    if pos != width:
        raise ValueError(f"run lengths cover {pos} sites, expected {width}")
    return out


def save_trajectory(traj: Trajectory, path: str | Path) -> None:
    lines = ["# percball-trajectory v1"]
    lines.append(
        f"# window_lo={traj.window_lo} window_hi={traj.window_hi} "
        f"steps={traj.n_steps} eps={traj.eps!r}"
    )
    occ = traj.to_bool()
    for t in range(traj.n_steps + 1):
        lines.append(_rle_encode(occ[t]))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line: str, magic: str) -> dict:
    if not line.startswith(f"# {magic}"):
        raise ValueError(f"expected a {magic} header, got {line!r}")
    return {}


def _parse_fields(line: str) -> dict:
    out = {}
    for token in line.lstrip("# ").split():
        key, _, val = token.partition("=")
        out[key] = val
    return out


def load_trajectory(path: str | Path) -> Trajectory:
    lines = Path(path).read_text().splitlines()
    _parse_header(lines[0], "percball-trajectory")
    meta = _parse_fields(lines[1])
    lo = int(meta["window_lo"])
    hi = int(meta["window_hi"])
    steps = int(meta["steps"])
    eps = float(meta["eps"])
    width = hi - lo + 1
    body = lines[2 : 2 + steps + 1]
    if len(body) != steps + 1:
        raise ValueError(f"expected {steps + 1} step lines, got {len(body)}")
    occ = np.stack([_rle_decode(text, width) for text in body])
    packed = np.packbits(occ.astype(np.uint8), axis=1)
    packed.setflags(write=False)
    return Trajectory(lo, hi, eps, packed)


def _bits_line(row: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in row)


def save_cross_config(config: CrossConfig, path: str | Path) -> None:
    seed = -1 if config.seed is None else config.seed
    lines = ["# percball-cross-config v1"]
    lines.append(
        f"# n_cols={config.n_cols} row_lo={config.row_lo} "
        f"row_hi={config.row_hi} eps={config.eps!r} seed={seed}"
    )
    for i in range(config.n_cols):
        lines.append(_bits_line(config.h_open[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_cross_config(path: str | Path) -> CrossConfig:
    lines = Path(path).read_text().splitlines()
    _parse_header(lines[0], "percball-cross-config")
    meta = _parse_fields(lines[1])
    n_cols = int(meta["n_cols"])
    row_lo = int(meta["row_lo"])
    row_hi = int(meta["row_hi"])
    eps = float(meta["eps"])
    seed = int(meta["seed"])
    h = np.array(
        [[c == "1" for c in lines[2 + i]] for i in range(n_cols)], dtype=bool
    )
    h.setflags(write=False)
    return CrossConfig(n_cols, row_lo, row_hi, eps, h, None if seed < 0 else seed)


def save_bond_config(config: BondConfig, path: str | Path) -> None:
    seed = -1 if config.seed is None else config.seed
    w, h = config.shape
    lines = ["# percball-bond-config v1"]
    lines.append(
        f"# col_lo={config.col_lo} col_hi={config.col_hi} "
        f"row_lo={config.row_lo} row_hi={config.row_hi} p={config.p!r} seed={seed}"
    )
    lines.append("# horizontal")
    for i in range(w - 1):
        lines.append(_bits_line(config.h_open[i]))
    lines.append("# vertical")
    for i in range(w):
        lines.append(_bits_line(config.v_open[i]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_bond_config(path: str | Path) -> BondConfig:
    lines = Path(path).read_text().splitlines()
    _parse_header(lines[0], "percball-bond-config")
    meta = _parse_fields(lines[1])
    col_lo, col_hi = int(meta["col_lo"]), int(meta["col_hi"])
    row_lo, row_hi = int(meta["row_lo"]), int(meta["row_hi"])
    p = float(meta["p"])
    seed = int(meta["seed"])
    w = col_hi - col_lo + 1
    if lines[2] != "# horizontal" or lines[3 + (w - 1)] != "# vertical":
        raise ValueError("malformed bond dump sections")
    h_open = np.array(
        [[c == "1" for c in lines[3 + i]] for i in range(w - 1)], dtype=bool
    )
    v_open = np.array(
        [[c == "1" for c in lines[4 + (w - 1) + i]] for i in range(w)], dtype=bool
    )
    h_open.setflags(write=False)
    v_open.setflags(write=False)
    return BondConfig(
        col_lo, col_hi, row_lo, row_hi, p, h_open, v_open, None if seed < 0 else seed
    )


def format_trace_record(record: dict) -> str:
    """One regression-diffable line per geodesic sample."""
    verts = ";".join(f"{x}:{y}" for x, y in record["vertices"])
    clusters = ",".join(str(s) for s in record["cluster_sizes"]) or "-"
    return (
        f"seed={record['seed']} eps={record['eps']!r} lam={record['lam']!r} "
        f"n={record['n']} d={record['d_cross']} steps={','.join(record['kinds'])} "
        f"k={record['k']} b={record['b']} clusters={clusters} "
        f"boundary={record['boundary']} bypass={record['bypass_len']} "
        f"status={record['status']} vertices={verts}"
    )


def parse_trace_record(line: str) -> dict:
    fields = _parse_fields(line)
    return {
        "seed": int(fields["seed"]),
        "eps": float(fields["eps"]),
        "lam": float(fields["lam"]),
        "n": int(fields["n"]),
        "d_cross": int(fields["d"]),
        "kinds": tuple(fields["steps"].split(",")),
        "k": int(fields["k"]),
        "b": int(fields["b"]),
        "cluster_sizes": []
        if fields["clusters"] == "-"
        else [int(s) for s in fields["clusters"].split(",")],
        "boundary": int(fields["boundary"]),
        "bypass_len": int(fields["bypass"]),
        "status": fields["status"],
        "vertices": [
            tuple(int(c) for c in v.split(":")) for v in fields["vertices"].split(";")
        ],
    }


def write_csv(path: str | Path, rows: list[tuple], header: tuple = CSV_HEADER) -> None:
    """Deterministic CSV: fixed header, rows written in the given order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
