"""Plain-text file formats: CSV matrices and vectors, JSON reports.

Matrix CSVs hold one row per pixel and may start with ``# pixels=B
detectors=D``. Vector CSVs have one value per line with ``# pixels=B`` (charges)
or ``# detectors=D`` (counts). Floats are written with ``repr`` so they
round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path

import numpy as np

from petfisher.errors import InvalidArgumentError

_HEADER = re.compile(r"(\w+)\s*=\s*(\d+)")


def _fmt(x) -> str:
    return repr(float(x))


def _read_lines(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    header, rows = {}, []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                header.update({k: int(v) for k, v in _HEADER.findall(line)})
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError:
                raise InvalidArgumentError(f"{path}:{lineno}: not a numeric CSV row") from None
    return header, rows


def read_matrix(path) -> np.ndarray:
    header, rows = _read_lines(path)
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidArgumentError(f"{path}: matrix rows are empty or ragged")
    p = np.array(rows)
    expected = (header.get("pixels", p.shape[0]), header.get("detectors", p.shape[1]))
    if p.shape != expected:
        raise InvalidArgumentError(f"{path}: header says {expected}, data has shape {p.shape}")
    return p


def write_matrix(path, p, header=True):
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    lines = []
    if header:
        lines.append(f"# pixels={p.shape[0]} detectors={p.shape[1]}")
    lines += [",".join(_fmt(x) for x in row) for row in p]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_vector(path, kind="pixels") -> np.ndarray:
    header, rows = _read_lines(path)
    if any(len(r) != 1 for r in rows):
        raise InvalidArgumentError(f"{path}: expected a single column")
    v = np.array([r[0] for r in rows])
    if kind in header and header[kind] != v.size:
        raise InvalidArgumentError(f"{path}: header says {kind}={header[kind]}, found {v.size} values")
    return v


def write_vector(path, v, kind="pixels", integer=False):
    v = np.asarray(v, dtype=np.float64).ravel()
    body = [str(int(x)) if integer else _fmt(x) for x in v]
    Path(path).write_text("\n".join([f"# {kind}={v.size}", *body]) + "\n", encoding="utf-8")


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n",
                          encoding="utf-8")


def write_table(path, columns: dict):
    """Column-oriented CSV with a header row; NaN is written as an empty cell."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            row = []
            for name in names:
                x = columns[name][i]
                if isinstance(x, (int, np.integer)):
                    row.append(str(int(x)))
                elif x is None or not np.isfinite(x):
                    row.append("")
                else:
                    row.append(_fmt(x))
            w.writerow(row)


def write_trajectory(path, loglik_path, trajectory, log_likelihood):
    """Long-format iterate dump plus a companion per-iteration log-likelihood file."""
    trajectory = np.atleast_2d(trajectory)
    its, pix = np.indices(trajectory.shape)
    write_table(path, {"iteration": its.ravel(), "pixel": pix.ravel() + 1,
                       "lambda": trajectory.ravel()})
    write_table(loglik_path, {"iteration": np.arange(len(log_likelihood)),
                              "log_likelihood": np.asarray(log_likelihood)})


def write_fisher(csv_path, json_path, fisher, iterations=None, T=None):
    write_matrix(csv_path, fisher.I, header=False)
    write_json(json_path, {
        "fisher": fisher.I.tolist(),
        "n_pixels": fisher.n_pixels,
        "evaluation_point_sha256": fisher.evaluation_hash(),
        "iterations": iterations,
        "T": T,
    })
