"""Compressive sensing matrix ensembles and the cyclic column rotation.

The sampling matrix for window ``i`` is the base matrix with its columns
cyclically rotated left ``i`` times: logical column ``j`` of the rotated
matrix is base column ``(j + i) mod n``. The rotation is realized as a
plain integer offset, never as a matrix product; ``materialize`` exists as
a test oracle, ``view`` returns an O(1) slice into a tiled copy for the
solver hot path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SensingConfigError",
    "DegenerateMatrixError",
    "SensingMatrix",
    "PermutationOffset",
    "gen_gaussian",
    "gen_bernoulli",
    "gen_achlioptas",
    "rotate",
    "column",
    "materialize",
    "view",
    "shift_matrix",
    "mutual_coherence",
    "basis_coherence",
    "save_matrix",
    "load_matrix",
]

_ENSEMBLES = ("gaussian", "bernoulli", "achlioptas")


class SensingConfigError(ValueError):
    """Invalid ensemble parameters (e.g. m >= n)."""


class DegenerateMatrixError(ValueError):
    """A diagnostic was requested on a matrix with a zero column."""


@dataclass
class SensingMatrix:
    base: np.ndarray  # (m, n) with m < n
    kind: str
    seed: int
    _tiled: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.base.shape[0]

    @property
    def n(self) -> int:
        return self.base.shape[1]

    def tiled(self) -> np.ndarray:
        """[base | base], built lazily; rotated views slice into it."""
        if self._tiled is None:
            self._tiled = np.concatenate([self.base, self.base], axis=1)
            self._tiled.setflags(write=False)
        return self._tiled


@dataclass(frozen=True)
class PermutationOffset:
    """Cyclic column offset; offset i realizes the i-times-rotated matrix."""

    offset: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"modulus must be >= 1, got {self.n}")
        if self.offset < 0:
            raise ValueError(f"offset must be >= 0, got {self.offset}")
        object.__setattr__(self, "offset", self.offset % self.n)


def _check_dims(m: int, n: int) -> None:
    if m < 1 or n < 1:
        raise SensingConfigError(f"dimensions must be positive, got {m}x{n}")
    if m >= n:
        raise SensingConfigError(f"compressive regime requires m < n, got {m}x{n}")


def gen_gaussian(m: int, n: int, seed: int) -> SensingMatrix:
    """Entries i.i.d. N(0, 1/m)."""
    _check_dims(m, n)
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((m, n)) / np.sqrt(m)
    base.setflags(write=False)
    return SensingMatrix(base=base, kind="gaussian", seed=seed)


def gen_bernoulli(m: int, n: int, seed: int) -> SensingMatrix:
    """Entries +-1/sqrt(m) with equal probability."""
    _check_dims(m, n)
    rng = np.random.default_rng(seed)
    base = (rng.integers(0, 2, (m, n)) * 2 - 1) / np.sqrt(m)
    base.setflags(write=False)
    return SensingMatrix(base=base, kind="bernoulli", seed=seed)


def gen_achlioptas(m: int, n: int, seed: int) -> SensingMatrix:
    """Sparse ternary entries: 1, 0, -1 w.p. 1/6, 2/3, 1/6."""
    _check_dims(m, n)
    rng = np.random.default_rng(seed)
    u = rng.random((m, n))
    base = np.where(u < 1.0 / 6.0, 1.0, np.where(u < 1.0 / 3.0, -1.0, 0.0))
    base.setflags(write=False)
    return SensingMatrix(base=base, kind="achlioptas", seed=seed)


def rotate(off: PermutationOffset, steps: int) -> PermutationOffset:
    """Advance the rotation by ``steps`` columns; O(1), no data copied."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    return PermutationOffset(offset=(off.offset + steps) % off.n, n=off.n)


def column(a: SensingMatrix, off: PermutationOffset, j: int) -> np.ndarray:
    """Logical column j of the rotated matrix: base column (j + offset) mod n."""
    if not (0 <= j < a.n):
        raise IndexError(f"column index {j} out of range [0, {a.n})")
    return np.array(a.base[:, (j + off.offset) % a.n])


def materialize(a: SensingMatrix, off: PermutationOffset) -> np.ndarray:
    """Dense copy of the rotated matrix (test oracle / direct-encode path)."""
    idx = (np.arange(a.n) + off.offset) % a.n
    return np.array(a.base[:, idx])


def view(a: SensingMatrix, offset: int) -> np.ndarray:
    """Read-only O(1) view of the rotated matrix at integer offset."""
    offset = offset % a.n
    return a.tiled()[:, offset : offset + a.n]


def shift_matrix(n: int) -> np.ndarray:
    """The n x n cyclic shift P with (P v)_0 = v_{n-1}, (P v)_k = v_{k-1}.

    Right-multiplying by P rotates columns left by one; reference object
    for the rotation oracles.
    """
    p = np.zeros((n, n))
    p[0, n - 1] = 1.0
    for i in range(1, n):
        p[i, i - 1] = 1.0
    return p


def mutual_coherence(a, offset: PermutationOffset | None = None) -> float:
    """Largest normalized inner product between two distinct columns.

    Accepts a raw matrix or a :class:`SensingMatrix` (optionally rotated);
    the value is invariant under column rotation.
    """
    if isinstance(a, SensingMatrix):
        mat = materialize(a, offset) if offset is not None else a.base
    else:
        mat = np.asarray(a, dtype=float)
    norms = np.linalg.norm(mat, axis=0)
    if np.any(norms == 0.0):
        raise DegenerateMatrixError("matrix has a zero column")
    gram = np.abs(mat.T @ mat) / np.outer(norms, norms)
    np.fill_diagonal(gram, 0.0)
    return float(gram.max())


def basis_coherence(phi, psi) -> float:
    """sqrt(n) times the largest |<phi_k, psi_j>| between two orthonormal bases.

    Accepts real or complex n x n matrices whose columns are the basis
    vectors; values lie in [1, sqrt(n)].
    """
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1] or phi.shape != psi.shape:
        raise ValueError(f"expected matching square bases, got {phi.shape}, {psi.shape}")
    n = phi.shape[0]
    eye = np.eye(n)
    for q, name in ((phi, "phi"), (psi, "psi")):
        dev = np.max(np.abs(q.conj().T @ q - eye))
        if dev > 1e-8:
            raise ValueError(f"{name} is not orthonormal (deviation {dev:.3e})")
    return float(np.sqrt(n) * np.max(np.abs(phi.conj().T @ psi)))


_MAGIC = b"SCSMAT1\n"


def save_matrix(a: SensingMatrix, path) -> None:
    """Persist a sensing matrix: header (m, n, kind, seed) + row-major doubles."""
    kind = a.kind.encode("ascii")
    if len(kind) > 16:
        raise ValueError(f"kind tag too long: {a.kind}")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<qqq16s", a.m, a.n, a.seed, kind.ljust(16, b"\0")))
        fh.write(np.ascontiguousarray(a.base, dtype="<f8").tobytes())


def load_matrix(path) -> SensingMatrix:
    """Load a matrix written by :func:`save_matrix`; bit-identical round trip."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"not a sensing-matrix file: bad magic {magic!r}")
        m, n, seed, kind_raw = struct.unpack("<qqq16s", fh.read(8 * 3 + 16))
        data = fh.read(8 * m * n)
    base = np.frombuffer(data, dtype="<f8").reshape(m, n).astype(float)
    base.setflags(write=False)
    kind = kind_raw.rstrip(b"\0").decode("ascii")
    return SensingMatrix(base=base, kind=kind, seed=seed)
