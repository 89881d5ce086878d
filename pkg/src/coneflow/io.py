"""File formats: binary grid dumps with a text header, block directories and CSV tables."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .decomposition import FrequencyLattice, GridFunction

MAGIC = "coneflow-grid"


def write_grid_function(path, u):
    """One JSON header line, then little-endian complex128 values in C order."""
    lat = u.lattice
    header = {"format": MAGIC, "version": 1, "d": lat.d, "N": list(lat.N),
              "boxLength": list(lat.box_length), "dtype": "<c16"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(u.values, dtype="<c16").tobytes())


def read_grid_function(path):
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != MAGIC:
            raise ValueError(f"{path}: not a grid dump")
        data = np.frombuffer(fh.read(), dtype=header["dtype"])
    lat = FrequencyLattice(tuple(header["N"]), header["boxLength"], header["d"])
    vals = data.reshape(lat.shape)
    if not np.iscomplexobj(vals) or np.all(vals.imag == 0):
        vals = vals.real
    return GridFunction(lat, vals)


def write_blocks(directory, blocks):
    """Each block as ``n{n}_{sigma}.grid``; returns the written names."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for n, s in sorted(blocks.keys(), key=lambda k: (k[0], k[1] != "+")):
        name = f"n{n}_{'plus' if s == '+' else 'minus'}.grid"
        write_grid_function(os.path.join(directory, name), blocks[(n, s)])
        names.append(name)
    return names


def write_slice_csv(path, u, axis=0, index=0):
    """A 1D slice of a 2D grid function (or the whole 1D function)."""
    v = np.asarray(u.values)
    if v.ndim == 2:
        v = v[index] if axis == 0 else v[:, index]
    elif v.ndim != 1:
        raise ValueError("slices are written for 1D and 2D functions only")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "re", "im"])
        for i, z in enumerate(v.astype(complex)):
            w.writerow([i, repr(float(z.real)), repr(float(z.imag))])


def write_table_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c] if isinstance(r, dict) else getattr(r, c)) for c in columns])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v
