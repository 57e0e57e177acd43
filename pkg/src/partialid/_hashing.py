import hashlib
import json

import numpy as np


def hash64(*parts) -> int:
    """Stable 64-bit digest of arrays, strings, bytes or JSON-able objects."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, np.ndarray):
            a = np.ascontiguousarray(p)
            if a.dtype.kind == 'f':
                a = a.astype('<f8')
            elif a.dtype.kind in 'iub':
                a = a.astype('<i8')
            h.update(repr(a.shape).encode())
            h.update(a.tobytes())
        elif isinstance(p, bytes):
            h.update(p)
        elif isinstance(p, str):
            h.update(p.encode())
        else:
            h.update(json.dumps(p, sort_keys=True, default=str).encode())
        h.update(b'\x00')
    return int.from_bytes(h.digest(), 'little')


def sha256_bytes(b: bytes) -> str:
    return hashlib.sha256(b).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            h.update(chunk)
    return h.hexdigest()
