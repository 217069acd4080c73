"""Little-endian binary containers for fingerprints and trained models.

Both files start with a 4-byte magic and a ``u32`` version. Strings are
``u16`` length plus UTF-8 bytes; arrays are raw ``<f8``. See the README for
the byte-level layout.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np

from decaf.errors import InputError
from decaf.fingerprint import Fingerprint
from decaf.frame import CanonicalFrame

FINGERPRINT_MAGIC = b"DCFP"
MODEL_MAGIC = b"DCGP"
VERSION = 1


class ContainerError(InputError):
    pass


def _put_str(buf, s: str):
    raw = s.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)


def _put_array(buf, a):
    buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ContainerError(f"truncated container at byte {self.pos}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def array(self, n):
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(float)

    def header(self, magic):
        got = self.take(4)
        if got != magic:
            raise ContainerError(f"bad magic {got!r}, expected {magic!r}")
        (version,) = self.unpack("<I")
        if version != VERSION:
            raise ContainerError(f"unsupported container version {version}")


# fingerprints ---------------------------------------------------------------


def dump_fingerprints(records) -> bytes:
    """``records`` is a sequence of ``(center_id, Fingerprint)`` on one grid."""
    records = list(records)
    if not records:
        raise ContainerError("nothing to write")
    first = records[0][1]
    n = len(first)
    buf = io.BytesIO()
    buf.write(FINGERPRINT_MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _put_str(buf, first.grid_hash)
    buf.write(struct.pack("<QQ", n, len(records)))
    _put_array(buf, first.weights)
    for cid, fp in records:
        if fp.grid_hash != first.grid_hash or len(fp) != n:
            raise ContainerError("all fingerprints in a container must share one grid")
        buf.write(struct.pack("<q", int(cid)))
        _put_array(buf, fp.center)
        _put_array(buf, fp.frame.matrix.T.ravel())  # rows are b_alpha, b_beta, b_gamma
        _put_array(buf, fp.values)
    return buf.getvalue()


def load_fingerprints(data: bytes) -> list[tuple[int, Fingerprint]]:
    r = _Reader(data)
    r.header(FINGERPRINT_MAGIC)
    ghash = r.string()
    n, count = r.unpack("<QQ")
    weights = r.array(n)
    out = []
    for _ in range(count):
        (cid,) = r.unpack("<q")
        center = r.array(3)
        rows = r.array(9).reshape(3, 3)
        values = r.array(n)
        out.append((cid, Fingerprint(values, weights, ghash, CanonicalFrame(*rows), center)))
    return out


def write_fingerprints(path, records) -> None:
    Path(path).write_bytes(dump_fingerprints(records))


def read_fingerprints(path) -> list[tuple[int, Fingerprint]]:
    return load_fingerprints(Path(path).read_bytes())


def fingerprints_csv(records) -> str:
    """One row per fingerprint: center id, frame rows (9 numbers), then values."""
    records = list(records)
    n = len(records[0][1]) if records else 0
    head = ["center"] + [f"b{i}{j}" for i in "abg" for j in "xyz"] + [f"v{k}" for k in range(n)]
    lines = [",".join(head)]
    for cid, fp in records:
        nums = list(fp.frame.matrix.T.ravel()) + list(fp.values)
        lines.append(",".join([str(cid)] + [format(float(v), ".17g") for v in nums]))
    return "\n".join(lines) + "\n"


# models ---------------------------------------------------------------------


def dump_model(model) -> bytes:
    """Serialize a PropertyModel; its featurizer is stored as its config document."""
    from decaf.io.config import write_config

    comps = model.components
    X, w = comps[0].X, comps[0].weights
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<I", VERSION))
    _put_str(buf, model.mode)
    _put_str(buf, comps[0].grid_hash)
    if model.featurizer.config is None:
        raise ContainerError("model featurizer was not built from a config")
    cfg = write_config(model.featurizer.config).encode("utf-8")
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    buf.write(struct.pack("<IQQ", len(comps), X.shape[0], X.shape[1]))
    _put_array(buf, w)
    _put_array(buf, X)
    for m in comps:
        if m.X is not X and not np.array_equal(m.X, X):
            raise ContainerError("components must share their training inputs")
        _put_array(buf, [m.hyper.output_scale, m.hyper.length_scale, m.hyper.jitter, m.mean])
        _put_array(buf, m.y)
    return buf.getvalue()


def load_model(data: bytes):
    from decaf.fingerprint import Featurizer
    from decaf.io.config import load_config
    from decaf.regress import GPHyperparameters, GPModel, PropertyModel

    r = _Reader(data)
    r.header(MODEL_MAGIC)
    mode = r.string()
    ghash = r.string()
    (clen,) = r.unpack("<I")
    cfg = load_config(r.take(clen).decode("utf-8"))
    k, n_train, n = r.unpack("<IQQ")
    w = r.array(n)
    X = r.array(n_train * n).reshape(n_train, n)
    comps = []
    for _ in range(k):
        sigma, length, jitter, mean = r.array(4)
        y = r.array(n_train)
        # the Cholesky factor is rebuilt here rather than stored
        comps.append(GPModel(X, w, ghash, y, GPHyperparameters(sigma, length, jitter), mean))
    feat = Featurizer.from_config(cfg)
    if feat.grid_hash != ghash:
        raise ContainerError("stored config does not reproduce the model's grid")
    return PropertyModel(feat, comps, mode)


def write_model(path, model) -> None:
    Path(path).write_bytes(dump_model(model))


def read_model(path):
    return load_model(Path(path).read_bytes())
