"""Binary model files, little-endian throughout.

RBM file: ``b"RBM1"``, u32 n_visible, u32 n_hidden, then b, c and W
(row-major) as f64.

MLP file: ``b"MLP1"``, u32 n_inputs, u32 n_hidden, u32 n_classes, then
W1 (row-major), b1, W2 (row-major), b2 as f64.
"""

import struct

import numpy as np

from .classifier import MlpParams
from .errors import BadMagicError, TruncatedFileError
from .rbm import RbmParams

RBM_MAGIC = b"RBM1"
MLP_MAGIC = b"MLP1"


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _take(buf, offset, count, path):
    end = offset + 8 * count
    if end > len(buf):
        raise TruncatedFileError(f"{path}: file ends after {len(buf)} bytes, need {end}")
    return np.frombuffer(buf[offset:end], dtype="<f8").astype(np.float64), end


def _header(buf, magic, n_dims, path):
    if buf[:4] != magic:
        raise BadMagicError(f"{path}: magic {buf[:4]!r}, expected {magic!r}")
    size = 4 + 4 * n_dims
    if len(buf) < size:
        raise TruncatedFileError(f"{path}: incomplete header")
    return struct.unpack("<" + "I" * n_dims, buf[4:size]), size


def rbm_to_bytes(params):
    head = RBM_MAGIC + struct.pack("<II", params.n_visible, params.n_hidden)
    return head + _f64(params.b) + _f64(params.c) + _f64(params.W)


def rbm_from_bytes(buf, path="<bytes>"):
    (nv, nh), off = _header(buf, RBM_MAGIC, 2, path)
    b, off = _take(buf, off, nv, path)
    c, off = _take(buf, off, nh, path)
    W, off = _take(buf, off, nv * nh, path)
    if off != len(buf):
        raise TruncatedFileError(f"{path}: {len(buf) - off} trailing bytes")
    return RbmParams(W.reshape(nv, nh), b, c)


def save_rbm(params, path):
    with open(path, "wb") as f:
        f.write(rbm_to_bytes(params))


def load_rbm(path):
    with open(path, "rb") as f:
        return rbm_from_bytes(f.read(), path)


def mlp_to_bytes(params):
    head = MLP_MAGIC + struct.pack("<III", params.n_inputs, params.n_hidden, params.n_classes)
    return head + b"".join(_f64(a) for a in (params.W1, params.b1, params.W2, params.b2))


def mlp_from_bytes(buf, path="<bytes>"):
    (d, h, k), off = _header(buf, MLP_MAGIC, 3, path)
    W1, off = _take(buf, off, d * h, path)
    b1, off = _take(buf, off, h, path)
    W2, off = _take(buf, off, h * k, path)
    b2, off = _take(buf, off, k, path)
    if off != len(buf):
        raise TruncatedFileError(f"{path}: {len(buf) - off} trailing bytes")
    return MlpParams(W1.reshape(d, h), b1, W2.reshape(h, k), b2)


def save_mlp(params, path):
    with open(path, "wb") as f:
        f.write(mlp_to_bytes(params))


def load_mlp(path):
    with open(path, "rb") as f:
        return mlp_from_bytes(f.read(), path)
