"""Text formats: experiment configs, matrix files and trace CSVs.

Configs are flat ``key = value`` files. Values are Python literals (numbers,
quoted or bare strings, nested lists for matrices); ``#`` starts a comment.
Matrices on disk are whitespace-delimited, one row per line. Numbers are
always written with 12 significant digits so that reruns are byte-identical.
"""

import ast
import os

import numpy as np

from .errors import ConfigError
from .lti import SignalTrace

FMT = "%.12g"


def parse_value(text):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict, keeping file order."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key.isidentifier():
            raise ConfigError(f"line {lineno}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def format_value(value):
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, str):
        return value if value.isidentifier() else repr(value)
    return repr(value)


def serialize_config(mapping):
    return "".join(f"{k} = {format_value(v)}\n" for k, v in mapping.items())


def read_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def write_matrix(M, path):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for row in M:
                fh.write(" ".join(FMT % v for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write matrix to {path}: {exc}") from exc


def read_matrix(path):
    return np.loadtxt(path, ndmin=2)


def emit_csv(trace, path):
    """Write a trace as ``k,component_0,...`` with one row per index."""
    dim = trace.samples.shape[1] if trace.samples.ndim == 2 else 0
    header = ",".join(["k"] + [f"component_{i}" for i in range(dim)])
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(header + "\n")
            for k, row in zip(trace.indices, trace.samples):
                fh.write(",".join([str(int(k))] + [FMT % v for v in row]) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def read_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return SignalTrace(0, np.zeros((0, 0)))
    return SignalTrace(int(data[0, 0]), data[:, 1:])


def emit_bound_curve(rows, path, columns=("n_d", "bound")):
    """Write ``rows`` (sequences matching ``columns``) as a CSV table."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                cells = [str(int(row[0]))] + [FMT % v for v in row[1:]]
                fh.write(",".join(cells) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write bound curve to {path}: {exc}") from exc


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
