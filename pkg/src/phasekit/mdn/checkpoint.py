"""IMDN checkpoint files: a layer-spec table followed by raw float32 tensors.

Layout (little-endian):

    bytes 0..3   magic "IMDN"
    bytes 4..7   version, uint32 = 1
    bytes 8..11  record count, uint32
    records      24 bytes each: kind u32, kernel u32, in u32, out u32,
                 param_a f32, param_b f32
    tensors      float32 raw, in declaration order

Record kinds: 0 dropout (param_a = rate), 1 depthwise-separable conv,
2 ELU (param_a = alpha), 3 dense head. Conv tensors are written as
depthwise, pointwise, bias; the head as weight, bias. Save/load
roundtrips bit-exactly for float32 weights.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError, IoError
from .layers import ConvLayer, DenseHead
from .network import HEAD_OUTPUTS, NetworkWeights

MAGIC = b"IMDN"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_RECORD = struct.Struct("<IIIIff")

KIND_DROPOUT = 0
KIND_CONV = 1
KIND_ELU = 2
KIND_DENSE = 3


def _records(weights: NetworkWeights) -> list[tuple]:
    recs = [(KIND_DROPOUT, 0, 0, 0, float(weights.dropout_rate), 0.0)]
    for layer in weights.convs:
        k, _, c_in = layer.depthwise.shape
        c_out = layer.pointwise.shape[1]
        recs.append((KIND_CONV, k, c_in, c_out, 0.0, 0.0))
        recs.append((KIND_ELU, 0, 0, 0, float(weights.elu_alpha), 0.0))
    recs.append((KIND_DENSE, 0, weights.head.weight.shape[0], HEAD_OUTPUTS, 0.0, 0.0))
    return recs


def save_weights(path, weights: NetworkWeights) -> None:
    recs = _records(weights)
    try:
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, len(recs)))
            for rec in recs:
                fh.write(_RECORD.pack(*rec))
            for tensor in weights.tensors():
                fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    except OSError as exc:
        raise IoError(f"writing {path}: {exc}") from exc


def load_weights(path) -> NetworkWeights:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"reading {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise FormatError("file shorter than the IMDN header")
    magic, version, n_recs = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    offset = _HEADER.size
    recs = []
    for _ in range(n_recs):
        if offset + _RECORD.size > len(blob):
            raise FormatError("truncated layer-spec table")
        recs.append(_RECORD.unpack_from(blob, offset))
        offset += _RECORD.size

    def take(count):
        nonlocal offset
        nbytes = count * 4
        if offset + nbytes > len(blob):
            raise FormatError("truncated tensor payload")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).copy()
        offset += nbytes
        return arr

    dropout_rate = 0.0
    elu_alpha = 1.0
    kernel = 5
    convs: list[ConvLayer] = []
    head = None
    for kind, k, c_in, c_out, param_a, _param_b in recs:
        if kind == KIND_DROPOUT:
            dropout_rate = float(param_a)
        elif kind == KIND_ELU:
            elu_alpha = float(param_a)
        elif kind == KIND_CONV:
            kernel = k
            convs.append(ConvLayer(
                depthwise=take(k * k * c_in).reshape(k, k, c_in),
                pointwise=take(c_in * c_out).reshape(c_in, c_out),
                bias=take(c_out),
            ))
        elif kind == KIND_DENSE:
            if c_out != HEAD_OUTPUTS:
                raise FormatError(f"dense head must have {HEAD_OUTPUTS} outputs, got {c_out}")
            head = DenseHead(weight=take(c_in * c_out).reshape(c_in, c_out), bias=take(c_out))
        else:
            raise FormatError(f"unknown record kind {kind}")
    if not convs or head is None:
        raise FormatError("checkpoint lacks conv layers or dense head")
    if offset != len(blob):
        raise FormatError(f"trailing bytes after tensors: {len(blob) - offset}")
    return NetworkWeights(convs, head, kernel, elu_alpha, dropout_rate)
