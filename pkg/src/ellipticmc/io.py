"""Deterministic output files.

Every artifact starts with '#'-prefixed header lines embedding the tool
version, the problem file hash, the seed and the full effective
configuration, so reruns with equal headers are bit-identical. Fields are
CSV (x1..xd,value,stderr); traces and reports are line-delimited JSON.
Nothing time-dependent is ever written to a file.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Union

import numpy as np

from . import __version__
from .errors import InputError
from .fields import Field


def file_sha256(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def header_lines(meta: dict) -> list[str]:
    lines = [f"# ellipticmc {__version__}"]
    for key in ("problem_sha256", "seed"):
        if key in meta:
            lines.append(f"# {key}: {meta[key]}")
    config = {k: v for k, v in meta.items() if k not in ("problem_sha256", "seed")}
    if config:
        lines.append(f"# config: {json.dumps(config, sort_keys=True)}")
    return lines


def write_field_csv(path: Union[str, Path], field: Field, meta: dict) -> None:
    d = field.points.shape[1]
    rows = [*header_lines(meta)]
    rows.append(",".join([f"x{i + 1}" for i in range(d)] + ["value", "stderr"]))
    for p, v, s in zip(field.points, field.values, field.stderrs):
        rows.append(",".join([repr(float(c)) for c in p] + [repr(float(v)), repr(float(s))]))
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_field_csv(path: Union[str, Path]) -> Field:
    lines = [
        ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
        if ln and not ln.startswith("#")
    ]
    if not lines:
        raise InputError(f"{path} contains no field data")
    header = lines[0].split(",")
    if header[-2:] != ["value", "stderr"]:
        raise InputError(f"{path} is not a field CSV")
    d = len(header) - 2
    data = np.array([[float(tok) for tok in ln.split(",")] for ln in lines[1:]])
    if data.ndim != 2 or data.shape[1] != d + 2:
        raise InputError(f"{path} has malformed rows")
    return Field(data[:, :d], data[:, d], data[:, d + 1])


def write_records(path: Union[str, Path], records: Iterable[dict], meta: dict) -> None:
    rows = [*header_lines(meta)]
    rows.extend(json.dumps(rec, sort_keys=True) for rec in records)
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_json(path: Union[str, Path], payload: dict, meta: dict) -> None:
    doc = {"header": {"tool": f"ellipticmc {__version__}", **meta}, **payload}
    Path(path).write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
