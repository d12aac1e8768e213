"""
Persistence: binary checkpoints, CSV tables, text and VTK snapshots.

Checkpoint layout (version 1, all little-endian)::

    offset  type          field
    0       8 bytes       magic b"MEMSPHCK"
    8       uint32        format version
    12      8 x float64   kappa, sigma, Lambda, b, epsilon, beta, alpha, R
    76      3 x uint32    L_max, n_theta, n_phi
    88      float64       oversample
    96      float64       t
    104     float64       lambda
    112     uint64        step_count
    120     float64       dt (next trial step)
    128     float64       accumulated reduced energy
    136     uint32        number of coefficients N = (L_max+1)(2 L_max+1)
    140     N x float64   coefficients of phi, row-major (degree, order)
    ...     32 bytes      SHA-256 of all preceding bytes
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from .operators import ModelParams, green_of_projection
from .spectral import SpectralField, build_grid, synthesize

__all__ = [
    "MAGIC",
    "VERSION",
    "CheckpointError",
    "checkpoint_bytes",
    "save_checkpoint",
    "load_checkpoint",
    "write_csv",
    "read_csv",
    "write_snapshot_text",
    "write_vtk",
    "write_json",
]

MAGIC = b"MEMSPHCK"
VERSION = 1
_PARAM_ORDER = ("kappa", "sigma", "Lambda", "b", "epsilon", "beta", "alpha", "R")


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(state, params: ModelParams) -> bytes:
    g = state.phi.grid
    coeffs = np.ascontiguousarray(state.phi.coeffs, dtype="<f8")
    head = b"".join(
        [
            struct.pack("<8sI", MAGIC, VERSION),
            struct.pack("<8d", *[float(getattr(params, k)) for k in _PARAM_ORDER]),
            struct.pack("<3I", g.L_max, g.n_theta, g.n_phi),
            struct.pack("<d", g.oversample),
            struct.pack("<dd", float(state.t), float(state.lam)),
            struct.pack("<Q", int(state.step_count)),
            struct.pack("<dd", float(state.dt), float(state.energy)),
            struct.pack("<I", coeffs.size),
        ]
    )
    body = head + coeffs.tobytes()
    return body + hashlib.sha256(body).digest()


def save_checkpoint(path, state, params: ModelParams) -> None:
    Path(path).write_bytes(checkpoint_bytes(state, params))


def load_checkpoint(path_or_bytes, grid=None):
    """Read a checkpoint; returns (FlowState, ModelParams).

    The grid is rebuilt from the stored descriptor unless a compatible
    ``grid`` is supplied.
    """
    from .flow import FlowState

    data = path_or_bytes if isinstance(path_or_bytes, (bytes, bytearray)) else Path(path_or_bytes).read_bytes()
    if len(data) < 140 + 32:
        raise CheckpointError("checkpoint truncated")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checkpoint checksum mismatch")
    magic, version = struct.unpack_from("<8sI", body, 0)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    vals = struct.unpack_from("<8d", body, 12)
    params = ModelParams(**dict(zip(_PARAM_ORDER, vals)))
    L, n_theta, n_phi = struct.unpack_from("<3I", body, 76)
    (oversample,) = struct.unpack_from("<d", body, 88)
    t, lam = struct.unpack_from("<dd", body, 96)
    (step,) = struct.unpack_from("<Q", body, 112)
    dt, energy = struct.unpack_from("<dd", body, 120)
    (n,) = struct.unpack_from("<I", body, 136)
    if n != (L + 1) * (2 * L + 1) or len(body) != 140 + 8 * n:
        raise CheckpointError("coefficient block has the wrong size")
    coeffs = np.frombuffer(body, dtype="<f8", count=n, offset=140).astype(np.float64).reshape(L + 1, 2 * L + 1)
    if grid is None:
        for fft_size in ("exact", "smooth"):
            grid = build_grid(params.R, L, oversample, fft_size=fft_size)
            if grid.n_theta == n_theta and grid.n_phi == n_phi:
                break
        else:
            raise CheckpointError("cannot rebuild the stored grid")
    elif (grid.L_max, grid.n_theta, grid.n_phi, grid.R) != (L, n_theta, n_phi, params.R):
        raise CheckpointError("supplied grid does not match the checkpoint")
    phi = SpectralField(grid, coeffs)
    state = FlowState(
        phi=phi,
        u=green_of_projection(phi, params),
        lam=lam,
        t=t,
        step_count=step,
        dt=dt,
        energy=energy,
        values=synthesize(phi).values,
    )
    return state, params


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, units, rows, meta: dict | None = None) -> None:
    """Write a table with ``# key = value`` comment lines and a units header.

    Floats are written with ``repr`` so that reruns produce identical bytes.
    """
    lines = []
    for k in sorted(meta or {}):
        lines.append(f"# {k} = {_fmt(meta[k])}")
    lines.append(",".join(f"{c} [{u}]" for c, u in zip(columns, units)))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Inverse of :func:`write_csv`: returns (meta, columns, rows as float array)."""
    meta, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].partition("=")
            meta[k.strip()] = v.strip()
        elif header is None:
            header = [h.split(" [")[0] for h in line.split(",")]
        elif line:
            rows.append([float(x) for x in line.split(",")])
    return meta, header, np.array(rows, dtype=float).reshape(-1, len(header or []))


def write_snapshot_text(path, field: SpectralField) -> None:
    """Grid values as a lat-lon matrix (rows: colatitudes, columns: longitudes)."""
    g = field.grid
    vals = synthesize(field).values
    header = "colatitude rows: " + " ".join(repr(float(x)) for x in g.theta)
    header += "\nlongitudes: n_phi = %d, lon_k = 2 pi k / n_phi" % g.n_phi
    np.savetxt(path, vals, fmt="%.17g", header=header)


def write_vtk(path, fields: dict) -> None:
    """Legacy ASCII VTK structured grid with one scalar array per field."""
    names = list(fields)
    g = fields[names[0]].grid
    R = g.R
    st = g.sin_theta
    lines = [
        "# vtk DataFile Version 3.0",
        "sphere fields",
        "ASCII",
        "DATASET STRUCTURED_GRID",
        f"DIMENSIONS {g.n_phi} {g.n_theta} 1",
        f"POINTS {g.n_phi * g.n_theta} double",
    ]
    lon = g.lon
    for j in range(g.n_theta):
        for k in range(g.n_phi):
            x = R * st[j] * math.cos(lon[k])
            y = R * st[j] * math.sin(lon[k])
            z = R * g.x[j]
            lines.append(f"{x!r} {y!r} {z!r}")
    lines.append(f"POINT_DATA {g.n_phi * g.n_theta}")
    for name in names:
        vals = synthesize(fields[name]).values
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(repr(float(v)) for v in vals.ravel())
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, obj) -> None:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, float)):
            v = float(o)
            return v if math.isfinite(v) else str(v)
        if isinstance(o, np.integer):
            return int(o)
        return o

    Path(path).write_text(json.dumps(clean(obj), indent=2, sort_keys=True) + "\n")
