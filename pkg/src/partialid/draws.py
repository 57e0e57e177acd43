"""Binary and CSV serialization of posterior draw matrices.

File layout (little endian)::

    magic      4 bytes   b'PHID' for identified-probability draws,
                         b'PDRW' for reconstructed-probability draws
    version    u32
    K          u64       number of draws
    J          u64       number of design points
    hashes     3 x u64   config hash, data hash, grid hash
    seed       u64
    values     K*J f64   row-major by draw
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._hashing import hash64, sha256_bytes

__all__ = ['Provenance', 'PhiDraws', 'ProvenanceError', 'write_draw_file',
           'read_draw_file', 'FORMAT_VERSION']

FORMAT_VERSION = 1
_HEADER = struct.Struct('<4sIQQQQQQ')


class ProvenanceError(ValueError):
    """A draw artifact does not match the inputs it is being combined with."""


@dataclass(frozen=True)
class Provenance:
    config_hash: int
    data_hash: int
    grid_hash: int
    seed: int

    def as_dict(self):
        return {k: f'{v:016x}' for k, v in self.__dict__.items()}


def draws_to_bytes(magic: bytes, draws: np.ndarray, prov: Provenance) -> bytes:
    draws = np.ascontiguousarray(draws, dtype='<f8')
    K, J = draws.shape
    head = _HEADER.pack(magic, FORMAT_VERSION, K, J, prov.config_hash,
                        prov.data_hash, prov.grid_hash, prov.seed)
    return head + draws.tobytes()


def draws_from_bytes(buf: bytes, magic: bytes | None = None):
    if len(buf) < _HEADER.size:
        raise ValueError('draw file truncated: header incomplete')
    m, version, K, J, ch, dh, gh, seed = _HEADER.unpack_from(buf)
    if magic is not None and m != magic:
        raise ValueError(f'bad magic {m!r}, expected {magic!r}')
    if version != FORMAT_VERSION:
        raise ValueError(f'unsupported draw file version {version}')
    body = buf[_HEADER.size:]
    if len(body) != 8 * K * J:
        raise ValueError(f'draw file body has {len(body)} bytes, expected {8 * K * J}')
    draws = np.frombuffer(body, dtype='<f8').reshape(K, J).astype(float)
    return m, draws, Provenance(ch, dh, gh, seed)


def write_draw_file(path, magic: bytes, draws, prov: Provenance) -> str:
    """Write a draw file and return the sha256 of its bytes."""
    b = draws_to_bytes(magic, draws, prov)
    Path(path).write_bytes(b)
    return sha256_bytes(b)


def read_draw_file(path, magic: bytes | None = None):
    return draws_from_bytes(Path(path).read_bytes(), magic)


def write_draws_csv(path, draws, value_name='phi'):
    K, J = draws.shape
    with open(path, 'w', newline='') as f:
        w = csv.writer(f)
        w.writerow(['draw_index', 'point_index', value_name])
        for k in range(K):
            for j in range(J):
                w.writerow([k, j, repr(float(draws[k, j]))])


def grid_hash(grid) -> int:
    return hash64(np.asarray(grid, dtype=float))


@dataclass
class PhiDraws:
    """Posterior draws of the identified probability at J design points.

    Attributes
    ----------
    grid : (J, p) array
        Design points, row-major.
    draws : (K, J) array
        Entries strictly inside (0, 1).
    provenance : Provenance
        Hashes of the sampler configuration, training data and grid plus the
        seed, so reuse in later stages can be audited.
    """

    grid: np.ndarray
    draws: np.ndarray
    provenance: Provenance
    notes: tuple = field(default=(), compare=False)

    MAGIC = b'PHID'

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim == 1:
            self.grid = self.grid[:, None]
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 2 or self.draws.shape[1] != self.grid.shape[0]:
            raise ValueError(f'draws shape {self.draws.shape} does not match '
                             f'{self.grid.shape[0]} grid points')
        if not np.all((self.draws > 0) & (self.draws < 1)):
            raise ValueError('identified probabilities must lie strictly in (0, 1)')
        self.draws.setflags(write=False)
        self.grid.setflags(write=False)

    @property
    def K(self) -> int:
        return self.draws.shape[0]

    @property
    def J(self) -> int:
        return self.draws.shape[1]

    def to_bytes(self) -> bytes:
        return draws_to_bytes(self.MAGIC, self.draws, self.provenance)

    def digest(self) -> str:
        return sha256_bytes(self.to_bytes())

    def write(self, path) -> str:
        return write_draw_file(path, self.MAGIC, self.draws, self.provenance)

    def to_csv(self, path):
        write_draws_csv(path, self.draws, 'phi')

    @classmethod
    def from_bytes(cls, buf: bytes, grid) -> PhiDraws:
        _, draws, prov = draws_from_bytes(buf, cls.MAGIC)
        grid = np.asarray(grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        if grid_hash(grid) != prov.grid_hash:
            raise ProvenanceError('grid does not match the grid hash recorded in the draw file')
        return cls(grid, draws, prov)

    @classmethod
    def read(cls, path, grid) -> PhiDraws:
        """Load draws written by :meth:`write`, checking ``grid`` against the header."""
        return cls.from_bytes(Path(path).read_bytes(), grid)

    def summary_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out)
        w.writerow(['point_index', 'q05', 'q50', 'q95'])
        q = np.quantile(self.draws, [0.05, 0.5, 0.95], axis=0)
        for j in range(self.J):
            w.writerow([j, *(repr(float(v)) for v in q[:, j])])
        return out.getvalue()
