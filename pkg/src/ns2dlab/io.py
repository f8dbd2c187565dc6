"""File formats.

Trajectory (``.bin``), little endian::

    8s   magic  b"NS2DTRAJ"
    u4   version (1)
    u4   N
    u4   dim
    u4   m            number of forced modes
    f8   dt
    u8   n_steps
    u4   meta_len
    meta_len bytes    UTF-8 JSON (shape, nu, scheme, seed, replica, modes, amplitudes, config_hash)
    f8[(n_steps+1) * dim]   states, one row per time
    f8[n_steps * m]         Wiener increments, one row per step

Matrix dump (``.bin``)::

    8s   magic  b"NS2DMALL"
    u4   version (1)
    u4   dim
    f8   s, t, beta
    f8[dim * dim]   row-major matrix
    u4   meta_len, then meta_len bytes of UTF-8 JSON (config hash, seed); optional

The CSV form of the matrix dump starts with ``# dim=.. s=.. t=.. beta=..``
(plus any metadata as further ``key=value`` pairs)
followed by ``dim`` rows of ``repr`` floats.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .integrator import IntegratorConfig, NoiseModel, TrajectoryRecord
from .spectral import VorticityField, get_grid

TRAJ_MAGIC = b"NS2DTRAJ"
MATRIX_MAGIC = b"NS2DMALL"
VERSION = 1
_TRAJ_HEAD = struct.Struct("<8sIIIIdQI")
_MAT_HEAD = struct.Struct("<8sIIddd")


class FormatError(ValueError):
    pass


def write_trajectory(path, traj: TrajectoryRecord, config_hash: str = "") -> None:
    g = traj.grid
    cfg = traj.config
    meta = {
        "shape": g.shape, "nu": cfg.nu, "scheme": cfg.scheme, "seed": cfg.seed,
        "nonlinear": cfg.nonlinear, "replica": traj.replica,
        "modes": [list(k) for k in traj.noise.modes], "amplitudes": list(traj.noise.amplitudes),
        "config_hash": config_hash,
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_TRAJ_HEAD.pack(TRAJ_MAGIC, VERSION, g.N, g.dim, traj.noise.m, cfg.dt, traj.n_steps, len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(traj.states, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(traj.increments, dtype="<f8").tobytes())


def read_trajectory(path) -> tuple[TrajectoryRecord, dict]:
    """Return the stored trajectory and its metadata."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _TRAJ_HEAD.size:
        raise FormatError("file too short for a trajectory header")
    magic, version, N, dim, m, dt, n, mlen = _TRAJ_HEAD.unpack_from(raw)
    if magic != TRAJ_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    off = _TRAJ_HEAD.size
    meta = json.loads(raw[off:off + mlen].decode())
    off += mlen
    grid = get_grid(N, meta.get("shape", "box"))
    if grid.dim != dim:
        raise FormatError(f"header dim {dim} does not match N={N}")
    need = 8 * ((n + 1) * dim + n * m)
    if len(raw) - off != need:
        raise FormatError(f"payload has {len(raw) - off} bytes, expected {need}")
    states = np.frombuffer(raw, "<f8", (n + 1) * dim, off).reshape(n + 1, dim).astype(float)
    incs = np.frombuffer(raw, "<f8", n * m, off + 8 * (n + 1) * dim).reshape(n, m).astype(float)
    states.setflags(write=False)
    incs.setflags(write=False)
    cfg = IntegratorConfig(meta["nu"], dt, meta["scheme"], meta["seed"], meta.get("nonlinear", True))
    noise = NoiseModel(tuple(map(tuple, meta["modes"])), tuple(meta["amplitudes"]))
    return TrajectoryRecord(grid, cfg, noise, states, incs, meta.get("replica", 0)), meta


def write_matrix(path, matrix: np.ndarray, s: float, t: float, beta: float, meta: dict | None = None) -> None:
    matrix = np.asarray(matrix, float)
    dim = matrix.shape[0]
    meta = meta or {}
    if str(path).endswith(".csv"):
        with open(path, "w", encoding="utf-8") as f:
            extra = "".join(f" {k}={meta[k]}" for k in sorted(meta))
            f.write(f"# dim={dim} s={s!r} t={t!r} beta={beta!r}{extra}\n")
            for row in matrix:
                f.write(",".join(repr(float(v)) for v in row) + "\n")
        return
    with open(path, "wb") as f:
        f.write(_MAT_HEAD.pack(MATRIX_MAGIC, VERSION, dim, s, t, beta))
        f.write(np.ascontiguousarray(matrix, dtype="<f8").tobytes())
        blob = json.dumps(meta, sort_keys=True).encode()
        f.write(struct.pack("<I", len(blob)) + blob)


def read_matrix(path) -> tuple[np.ndarray, dict]:
    if str(path).endswith(".csv"):
        with open(path, encoding="utf-8") as f:
            head = f.readline()
            if not head.startswith("#"):
                raise FormatError("missing header line")
            meta = dict(item.split("=") for item in head[1:].split())
            M = np.loadtxt(f, delimiter=",", ndmin=2)
        info = {"dim": int(meta.pop("dim")), "s": float(meta.pop("s")), "t": float(meta.pop("t")),
                "beta": float(meta.pop("beta")), "meta": meta}
    else:
        with open(path, "rb") as f:
            raw = f.read()
        if len(raw) < _MAT_HEAD.size:
            raise FormatError("file too short for a matrix header")
        magic, version, dim, s, t, beta = _MAT_HEAD.unpack_from(raw)
        if magic != MATRIX_MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        end = _MAT_HEAD.size + 8 * dim * dim
        if len(raw) < end:
            raise FormatError("matrix payload truncated")
        M = np.frombuffer(raw, "<f8", dim * dim, _MAT_HEAD.size).reshape(dim, dim).copy()
        meta = {}
        if len(raw) >= end + 4:
            (mlen,) = struct.unpack_from("<I", raw, end)
            meta = json.loads(raw[end + 4:end + 4 + mlen].decode())
        info = {"dim": dim, "s": s, "t": t, "beta": beta, "meta": meta}
    if M.shape != (info["dim"], info["dim"]):
        raise FormatError(f"matrix shape {M.shape} does not match dim {info['dim']}")
    return M, info


def read_field(path) -> VorticityField:
    with open(path, encoding="utf-8") as f:
        return VorticityField.from_json(f.read())


def write_field(path, w: VorticityField) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(w.to_json())
