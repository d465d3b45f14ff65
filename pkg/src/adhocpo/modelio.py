"""Versioned plain-text serialization for tabular models.

The format is line oriented: a fixed header, then sparse triple sections for
the transition, observation, and reward tables, then the initial belief.
Floats are written with repr(), so a load/dump round trip reproduces the
file byte for byte.

    adhocpo-model v1
    label <free text>
    states <N>
    actions <A>
    observations <Z>
    discount <g>
    T <count>       followed by:  a x x' p
    O <count>       followed by:  a x' z p
    R <count>       followed by:  x a r
    b0 <count>      followed by:  x p
    end
"""
from __future__ import annotations

import hashlib
import io
from typing import Union

import numpy as np
from scipy import sparse

from adhocpo.pomdp import DEFAULT_SPARSE_THRESHOLD, TabularPomdp

FORMAT_TAG = "adhocpo-model v1"


class ModelFormatError(ValueError):
    """Raised on malformed model files; message carries the line number."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _nonzero_triples(table) -> list:
    if sparse.issparse(table):
        coo = table.tocoo()
        triples = [(int(i), int(j), float(v)) for i, j, v in zip(coo.row, coo.col, coo.data)]
    else:
        rows, cols = np.nonzero(table)
        triples = [(int(i), int(j), float(table[i, j])) for i, j in zip(rows, cols)]
    triples.sort(key=lambda t: (t[0], t[1]))
    return triples


def dumps_model(model: TabularPomdp) -> str:
    out = io.StringIO()
    out.write(FORMAT_TAG + "\n")
    out.write(f"label {model.label}\n")
    out.write(f"states {model.num_states}\n")
    out.write(f"actions {model.num_actions}\n")
    out.write(f"observations {model.num_observations}\n")
    out.write(f"discount {_fmt(model.discount)}\n")

    t_lines = []
    for a in range(model.num_actions):
        for x, x2, p in _nonzero_triples(model.transition[a]):
            t_lines.append(f"{a} {x} {x2} {_fmt(p)}")
    out.write(f"T {len(t_lines)}\n")
    out.write("".join(line + "\n" for line in t_lines))

    o_lines = []
    for a in range(model.num_actions):
        for x2, z, p in _nonzero_triples(model.observation[a]):
            o_lines.append(f"{a} {x2} {z} {_fmt(p)}")
    out.write(f"O {len(o_lines)}\n")
    out.write("".join(line + "\n" for line in o_lines))

    r_rows, r_cols = np.nonzero(model.reward)
    out.write(f"R {len(r_rows)}\n")
    for x, a in zip(r_rows, r_cols):
        out.write(f"{int(x)} {int(a)} {_fmt(model.reward[x, a])}\n")

    b_idx = np.flatnonzero(model.initial_belief)
    out.write(f"b0 {len(b_idx)}\n")
    for x in b_idx:
        out.write(f"{int(x)} {_fmt(model.initial_belief[x])}\n")
    out.write("end\n")
    return out.getvalue()


def dump_model(model: TabularPomdp, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_model(model))


class _Lines:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise ModelFormatError(f"line {self.pos + 1}: unexpected end of file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def fail(self, message: str):
        raise ModelFormatError(f"line {self.pos}: {message}")


def _header_int(lines: _Lines, key: str) -> int:
    line = lines.next()
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        lines.fail(f"expected '{key} <value>', got {line!r}")
    try:
        return int(parts[1])
    except ValueError:
        lines.fail(f"{key} is not an integer: {parts[1]!r}")


def loads_model(
    text: str, sparse_threshold: int = DEFAULT_SPARSE_THRESHOLD
) -> TabularPomdp:
    lines = _Lines(text)
    tag = lines.next()
    if tag.strip() != FORMAT_TAG:
        lines.fail(f"unknown format tag {tag!r}, expected {FORMAT_TAG!r}")
    label_line = lines.next()
    if not label_line.startswith("label"):
        lines.fail(f"expected 'label ...', got {label_line!r}")
    label = label_line[len("label "):] if len(label_line) > 5 else ""

    n = _header_int(lines, "states")
    num_actions = _header_int(lines, "actions")
    num_obs = _header_int(lines, "observations")
    disc_line = lines.next().split()
    if len(disc_line) != 2 or disc_line[0] != "discount":
        lines.fail("expected 'discount <value>'")
    discount = float(disc_line[1])

    def read_section(key: str, width: int):
        count = _header_int(lines, key)
        rows = []
        for _ in range(count):
            parts = lines.next().split()
            if len(parts) != width:
                lines.fail(f"{key} entry needs {width} fields, got {len(parts)}")
            try:
                rows.append(tuple(int(p) for p in parts[:-1]) + (float(parts[-1]),))
            except ValueError:
                lines.fail(f"bad {key} entry: {' '.join(parts)!r}")
        return rows

    t_rows = read_section("T", 4)
    o_rows = read_section("O", 4)
    r_rows = read_section("R", 3)
    b_rows = read_section("b0", 2)
    if lines.next().strip() != "end":
        lines.fail("expected 'end'")

    def build_tables(rows, cols: int):
        per_action = [[] for _ in range(num_actions)]
        for a, i, j, p in rows:
            if not (0 <= a < num_actions and 0 <= i < n and 0 <= j < cols):
                raise ModelFormatError(f"index out of range in entry {(a, i, j)}")
            per_action[a].append((i, j, p))
        tables = []
        for entries in per_action:
            if entries:
                ii, jj, vv = zip(*entries)
            else:
                ii, jj, vv = (), (), ()
            m = sparse.coo_array((vv, (ii, jj)), shape=(n, cols)).tocsr()
            tables.append(m)
        return tables

    reward = np.zeros((n, num_actions))
    for x, a, r in r_rows:
        if not (0 <= x < n and 0 <= a < num_actions):
            raise ModelFormatError(f"reward index out of range: {(x, a)}")
        reward[x, a] = r
    b0 = np.zeros(n)
    for x, p in b_rows:
        if not 0 <= x < n:
            raise ModelFormatError(f"belief index out of range: {x}")
        b0[x] = p

    return TabularPomdp.from_tables(
        build_tables(t_rows, n),
        build_tables(o_rows, num_obs),
        reward,
        discount,
        b0,
        label=label,
        sparse_threshold=sparse_threshold,
    )


def load_model(path, sparse_threshold: int = DEFAULT_SPARSE_THRESHOLD) -> TabularPomdp:
    with open(path) as fh:
        return loads_model(fh.read(), sparse_threshold=sparse_threshold)


def model_digest(model: TabularPomdp) -> str:
    """Content hash of the canonical serialization; keys the policy cache."""
    return hashlib.sha256(dumps_model(model).encode()).hexdigest()
