"""File formats: Matrix Market, dense binary blobs, system descriptors."""

import struct
from pathlib import Path

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .errors import DimensionError
from .sparse import SparseSym


def read_matrix_market(path, definiteness_hint="unknown") -> SparseSym:
    """Read a symmetric sparse matrix from a .mtx file.

    Accepts both symmetric and general coordinate storage; a general
    file must contain numerically symmetric data.
    """
    M = sio.mmread(str(path))
    if not sp.issparse(M):
        M = sp.csr_matrix(M)
    return SparseSym._from_scipy(M.tocsr(), definiteness_hint)


def write_matrix_market(A: SparseSym, path, storage="symmetric"):
    """Write a SparseSym to coordinate .mtx, symmetric or general storage."""
    if storage not in ("symmetric", "general"):
        raise ValueError("storage must be 'symmetric' or 'general'")
    sio.mmwrite(str(path), A.to_scipy().tocoo(), symmetry=storage)


def read_dense_matrix(path):
    """Read a dense matrix (or vector) from a .mtx array/coordinate file."""
    M = sio.mmread(str(path))
    if sp.issparse(M):
        M = M.toarray()
    return np.asarray(M, dtype=float)


def write_dense_blob(path, M):
    """Write a dense matrix as a binary blob: an 8-byte header with the
    dimensions (two little-endian uint32) followed by the float64 values
    in column-major order."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, k = M.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", n, k))
        fh.write(np.asfortranarray(M).tobytes(order="F"))


def read_dense_blob(path):
    """Read a matrix written by write_dense_blob."""
    with open(path, "rb") as fh:
        header = fh.read(8)
        if len(header) != 8:
            raise DimensionError("blob too short for its 8-byte header")
        n, k = struct.unpack("<II", header)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * k:
        raise DimensionError(
            f"blob payload has {data.size} values, header promises {n * k}")
    return data.reshape((n, k), order="F").copy()


def _parse_value(key, raw, base):
    raw = raw.strip()
    if raw.startswith("file:"):
        rel = raw[len("file:"):].strip()
        return read_dense_matrix(Path(base) / rel)
    rows = [r for r in raw.split(";") if r.strip()]
    vals = [[float(tok) for tok in r.split()] for r in rows]
    arr = np.array(vals, dtype=float)
    if arr.shape[0] == 1:
        arr = arr.ravel()
    return arr


def read_system_descriptor(path):
    """Parse a plain-text LTI system descriptor.

    Lines are ``key = value`` pairs; ``#`` starts a comment.  ``A`` (and
    optionally ``B``, ``C``) name Matrix Market files relative to the
    descriptor.  ``E`` (mass-matrix diagonal), ``R``, ``x0``,
    ``mu_nodes`` and ``mu_weights`` may be inline whitespace-separated
    numbers (rows split by ``;``) or ``file:`` references.

    Returns a dict of parsed entries; matrix assembly is the caller's
    concern (see control.system_from_descriptor).
    """
    path = Path(path)
    base = path.parent
    entries = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        key = key.strip()
        raw = raw.strip()
        if key in ("A", "B", "C"):
            entries[key] = str((base / raw).resolve()) if not raw.startswith("/") else raw
        else:
            entries[key] = _parse_value(key, raw, base)
    if "A" not in entries:
        raise ValueError(f"{path}: descriptor must name an A matrix")
    return entries
