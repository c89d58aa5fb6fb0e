"""Dense tensors, canonical matricization and the DT1/DM1 file formats.

Tensors are plain ``numpy.ndarray`` objects of dtype float64.  The flat
linearization is first-index-fastest (Fortran order) everywhere in the
package, so the mode-k canonical matricization is a Fortran-order reshape::

    X<k>[r, c] = X[i_1, ..., i_N]
    r = i_1 + i_2 I_1 + ... + i_k I_1...I_{k-1}          (0-based)
    c = i_{k+1} + i_{k+2} I_{k+1} + ... + i_N I_{k+1}...I_{N-1}

Observation masks are boolean arrays of the same shape (True = known).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, MalformedInput

__all__ = [
    "ModeMatrix",
    "as_tensor",
    "mode_shape",
    "matricize",
    "fold_matricize",
    "hadamard",
    "frobenius_norm",
    "sample_mask",
    "read_dt1",
    "write_dt1",
    "read_dm1",
    "write_dm1",
]


@dataclass(frozen=True)
class ModeMatrix:
    """Mode-k canonical matricization of a tensor.

    ``k`` is 1-based, ``entries`` has shape ``(prod(dims[:k]), prod(dims[k:]))``.
    """

    k: int
    entries: np.ndarray
    parent_dims: tuple

    @property
    def shape(self):
        return self.entries.shape


def as_tensor(data, dims=None) -> np.ndarray:
    """Return ``data`` as a float64 tensor, optionally reshaped to ``dims``.

    A flat buffer is interpreted in first-index-fastest order.
    """
    arr = np.asarray(data, dtype=np.float64)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise InvalidArgument(f"extents must be positive, got {dims}")
        if arr.size != math.prod(dims):
            raise InvalidArgument(
                f"buffer of length {arr.size} does not fit dims {dims}")
        arr = arr.reshape(dims, order="F")
    if arr.ndim < 1 or arr.size == 0:
        raise InvalidArgument("a tensor needs at least one mode and one entry")
    return arr


def mode_shape(dims, k: int) -> tuple[int, int]:
    """Rows and columns ``(m_k, n_k)`` of the mode-k matricization."""
    dims = tuple(dims)
    if not 1 <= k <= len(dims) - 1:
        raise InvalidArgument(
            f"mode index {k} outside 1..{len(dims) - 1} for an order-{len(dims)} tensor")
    return math.prod(dims[:k]), math.prod(dims[k:])


def matricize(t: np.ndarray, k: int) -> ModeMatrix:
    """Mode-k canonical matricization (first k modes index the rows).

    Raises
    ------
    InvalidArgument
        If ``k`` is not in ``1..N-1``.
    """
    t = np.asarray(t)
    m, n = mode_shape(t.shape, k)
    return ModeMatrix(k, t.reshape((m, n), order="F"), tuple(t.shape))


def fold_matricize(m: ModeMatrix) -> np.ndarray:
    """Inverse of :func:`matricize`."""
    rows, cols = mode_shape(m.parent_dims, m.k)
    if m.entries.shape != (rows, cols):
        raise InvalidArgument(
            f"matrix of shape {m.entries.shape} cannot be mode-{m.k} "
            f"matricization of dims {m.parent_dims}")
    return m.entries.reshape(m.parent_dims, order="F")


def hadamard(a, b):
    """Elementwise product of two tensors or two mode matrices."""
    if isinstance(a, ModeMatrix) or isinstance(b, ModeMatrix):
        if not (isinstance(a, ModeMatrix) and isinstance(b, ModeMatrix)):
            raise InvalidArgument("cannot mix ModeMatrix and plain arrays")
        if a.shape != b.shape or a.k != b.k:
            raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
        return ModeMatrix(a.k, a.entries * b.entries, a.parent_dims)
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch {a.shape} vs {b.shape}")
    return a * b


def frobenius_norm(t) -> float:
    if isinstance(t, ModeMatrix):
        t = t.entries
    t = np.asarray(t, dtype=np.float64)
    return float(np.sqrt(np.sum(t * t)))


def sample_mask(dims, missing_rate: float, seed=None) -> np.ndarray:
    """Observation mask with exactly ``round(missing_rate * total)`` missing entries.

    The missing positions are drawn uniformly without replacement from a
    ``numpy.random.default_rng(seed)`` stream, so a fixed seed is reproducible.
    """
    if not 0.0 <= missing_rate < 1.0:
        raise InvalidArgument(f"missing_rate must lie in [0, 1), got {missing_rate}")
    dims = tuple(int(d) for d in dims)
    total = math.prod(dims)
    n_missing = int(round(missing_rate * total))
    rng = np.random.default_rng(seed)
    known = np.ones(total, dtype=bool)
    known[rng.permutation(total)[:n_missing]] = False
    return known.reshape(dims, order="F")


# -- DT1 / DM1 files ---------------------------------------------------------

def _write_header(fh, magic, dims):
    fh.write(f"{magic} {len(dims)} {' '.join(str(int(d)) for d in dims)}\n".encode("ascii"))


def _read_header(raw: bytes, magic: str):
    end = raw.find(b"\n")
    if end < 0:
        raise MalformedInput(f"{magic}: missing header line")
    fields = raw[:end].decode("ascii", errors="replace").split()
    if not fields or fields[0] != magic:
        raise MalformedInput(f"expected {magic} header, got {raw[:end][:32]!r}")
    try:
        order = int(fields[1])
        dims = tuple(int(f) for f in fields[2:])
    except (IndexError, ValueError):
        raise MalformedInput(f"{magic}: unreadable header {raw[:end]!r}") from None
    if order < 1 or len(dims) != order or any(d < 1 for d in dims):
        raise MalformedInput(f"{magic}: inconsistent header {raw[:end]!r}")
    return dims, raw[end + 1:]


def write_dt1(t, path) -> None:
    t = np.asarray(t, dtype=np.float64)
    with open(path, "wb") as fh:
        _write_header(fh, "DT1", t.shape)
        fh.write(t.astype("<f8").tobytes(order="F"))


def read_dt1(path) -> np.ndarray:
    dims, body = _read_header(Path(path).read_bytes(), "DT1")
    count = math.prod(dims)
    if len(body) != 8 * count:
        raise MalformedInput(f"DT1: expected {8 * count} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(dims, order="F")


def write_dm1(mask, path) -> None:
    mask = np.asarray(mask, dtype=bool)
    with open(path, "wb") as fh:
        _write_header(fh, "DM1", mask.shape)
        fh.write(mask.astype(np.uint8).tobytes(order="F"))


def read_dm1(path) -> np.ndarray:
    dims, body = _read_header(Path(path).read_bytes(), "DM1")
    count = math.prod(dims)
    if len(body) != count:
        raise MalformedInput(f"DM1: expected {count} data bytes, found {len(body)}")
    flags = np.frombuffer(body, dtype=np.uint8)
    if np.any(flags > 1):
        raise MalformedInput("DM1: entries must be 0 or 1")
    return flags.astype(bool).reshape(dims, order="F")
