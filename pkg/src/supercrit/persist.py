"""Atomic file output and the on-disk ground-state cache."""

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .constants import derive_exponents
from .fowler import FowlerInterpolant, GroundState, ground_state
from .radialgrid import Grid, RadialProfile

CACHE_ENV = "SUPERCRIT_CACHE_DIR"
CACHE_VERSION = 1


def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def jsonl(records):
    return "".join(json.dumps(r, sort_keys=True) + "\n" if isinstance(r, dict) else r + "\n" for r in records)


def cache_key(n, p, grid):
    ident = json.dumps(
        {"v": CACHE_VERSION, "n": n, "p": repr(float(p)), "grid": [repr(grid.s_min), repr(grid.s_max), grid.count]},
        sort_keys=True,
    )
    return hashlib.sha256(ident.encode()).hexdigest()[:20]


def _digest(arrays):
    h = hashlib.sha256()
    for name in sorted(arrays):
        if name == "digest":
            continue
        h.update(name.encode())
        h.update(np.ascontiguousarray(arrays[name]).tobytes())
    return h.hexdigest()


class GroundStateCache:
    """Ground states on disk, one .npz per (n, p, s_min, s_max, count).

    Each file carries a sha256 of its arrays; a mismatch means the entry is
    ignored and recomputed.
    """

    def __init__(self, directory):
        self.directory = None if directory is None else Path(directory)

    @classmethod
    def resolve(cls, flag_value):
        return cls(flag_value if flag_value else os.environ.get(CACHE_ENV) or None)

    def path(self, n, p, grid):
        return self.directory / f"gs-{cache_key(n, p, grid)}.npz"

    def load(self, e, grid):
        if self.directory is None:
            return None
        path = self.path(e.n, e.p, grid)
        if not path.exists():
            return None
        try:
            with np.load(path) as z:
                arrays = {k: z[k] for k in z.files}
        except (OSError, ValueError):
            return None
        if str(arrays.get("digest")) != _digest(arrays):
            return None
        n, p, s_min, s_max, count = arrays["key"]
        if (int(n), float(p)) != (e.n, e.p) or Grid(s_min, s_max, int(count)) != grid:
            return None
        profile = RadialProfile(grid, arrays["w"], arrays["w_prime"], tail_exponent=-e.m, head_exponent=0.0)
        L_measured, shift = arrays["scalars"]
        dense = FowlerInterpolant.from_arrays(e, arrays) if "seg_F" in arrays else None
        return GroundState(e, profile, float(L_measured), float(shift), dense)

    def store(self, gs):
        if self.directory is None:
            return None
        e, g = gs.exponents, gs.grid
        arrays = {
            "key": np.array([e.n, e.p, g.s_min, g.s_max, g.count], dtype=float),
            "w": gs.w,
            "w_prime": gs.w_prime,
            "scalars": np.array([gs.L_measured, gs.normalization_shift]),
        }
        if isinstance(gs.dense_v, FowlerInterpolant):
            arrays.update(gs.dense_v.to_arrays())
        arrays["digest"] = np.array(_digest(arrays))
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        path = self.path(e.n, e.p, g)
        atomic_write(path, buf.getvalue())
        return path

    def ground_state(self, e, grid):
        """Cached ground state, computing and storing it on a miss."""
        gs = self.load(e, grid)
        if gs is not None and gs.dense_v is not None:
            return gs, True
        gs = ground_state(e, grid)
        self.store(gs)
        return gs, False


def load_ground_state(n, p, grid, cache_dir=None):
    e = derive_exponents(n, p)
    return GroundStateCache(cache_dir).ground_state(e, grid)[0]
