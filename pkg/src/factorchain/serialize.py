"""Binary container for factor operators.

Layout: magic, one length-prefixed JSON header, then length-prefixed
blocks in a fixed order (level matrices as Matrix Market text, polynomial
coefficients as little-endian float64, refinement matrix and coefficients
last).  All floats round-trip exactly: the JSON encoder and the Matrix
Market writer both emit shortest-repr values, coefficient arrays are raw
bytes.  Saving a loaded operator reproduces the input file byte for byte.

Edge-based operators are not serialized; they are cheap to rebuild from
the matrix and the wrapped operator.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .chain import (
    ChainOperator,
    FactorChain,
    RefinedOperator,
    RefinementInfo,
)
from .errors import SerializationError
from .maclaurin import MaclaurinPoly
from .mmio import read_matrix_string, write_matrix_string

MAGIC = b"FCOP1\n"
SCHEMA = 1


def _block(data: bytes) -> bytes:
    return struct.pack("<Q", len(data)) + data


def _take(buf: bytes, pos: int) -> tuple[bytes, int]:
    if pos + 8 > len(buf):
        raise SerializationError("truncated container: missing block length")
    (length,) = struct.unpack_from("<Q", buf, pos)
    pos += 8
    if pos + length > len(buf):
        raise SerializationError("truncated container: block shorter than declared")
    return buf[pos:pos + length], pos + length


def _poly_header(poly: MaclaurinPoly) -> dict:
    return {"p": poly.p, "t": poly.t, "delta": poly.delta, "eps": poly.eps}


def _poly_from(header: dict, raw: bytes) -> MaclaurinPoly:
    c = np.frombuffer(raw, dtype="<f8").copy()
    return MaclaurinPoly(p=header["p"], t=header["t"], coeffs=c,
                         delta=header["delta"], eps=header["eps"])


def operator_bytes(op, meta: dict | None = None) -> bytes:
    if isinstance(op, RefinedOperator):
        base, refined = op.base, op
    elif isinstance(op, ChainOperator):
        base, refined = op, None
    else:
        raise SerializationError(f"cannot serialize operator kind {op.kind!r}")
    ch = base.chain
    header = {
        "schema": SCHEMA,
        "kind": op.kind,
        "n": ch.n,
        "p": ch.p,
        "d": ch.d,
        "out_scale": base.out_scale,
        "kappa_used": ch.kappa_used,
        "eps_total": ch.eps_total,
        "eps_schedule": list(ch.eps_schedule),
        "lambdas": list(ch.lambdas),
        "polys": [_poly_header(q) for q in ch.polys],
        "refinement": None,
        "meta": meta or {},
    }
    blocks: list[bytes] = []
    for level in ch.levels:
        blocks.append(write_matrix_string(level).encode("utf-8"))
    for q in ch.polys:
        blocks.append(np.asarray(q.coeffs, dtype="<f8").tobytes())
    if refined is not None:
        info = refined.info
        header["refinement"] = {
            "degree": info.degree, "scale": info.scale, "delta": info.delta,
            "eps": info.eps, "spectrum_lo": info.spectrum_lo,
            "spectrum_hi": info.spectrum_hi,
        }
        blocks.append(write_matrix_string(refined.matrix).encode("utf-8"))
        blocks.append(np.asarray(refined.poly.coeffs, dtype="<f8").tobytes())
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + _block(head) + b"".join(_block(b) for b in blocks)


def operator_from_bytes(buf: bytes):
    if not buf.startswith(MAGIC):
        raise SerializationError("not a factor-operator container")
    pos = len(MAGIC)
    head, pos = _take(buf, pos)
    try:
        header = json.loads(head.decode("utf-8"))
    except ValueError as exc:
        raise SerializationError("malformed container header") from exc
    if header.get("schema") != SCHEMA:
        raise SerializationError(f"unsupported schema {header.get('schema')!r}")
    d = header["d"]
    levels = []
    for _ in range(d + 1):
        raw, pos = _take(buf, pos)
        matrix, _ = read_matrix_string(raw.decode("utf-8"))
        levels.append(matrix)
    polys = []
    for ph in header["polys"]:
        raw, pos = _take(buf, pos)
        polys.append(_poly_from(ph, raw))
    chain = FactorChain(
        levels=tuple(levels),
        eps_schedule=tuple(header["eps_schedule"]),
        polys=tuple(polys),
        p=header["p"],
        d=d,
        kappa_used=header["kappa_used"],
        eps_total=header["eps_total"],
        lambdas=tuple(header["lambdas"]),
        reports=(),
    )
    op = ChainOperator(chain, out_scale=header["out_scale"])
    if header["refinement"] is not None:
        rh = header["refinement"]
        raw, pos = _take(buf, pos)
        matrix, _ = read_matrix_string(raw.decode("utf-8"))
        raw, pos = _take(buf, pos)
        poly = _poly_from({"p": -0.5, "t": rh["degree"], "delta": rh["delta"],
                           "eps": rh["eps"] / 2.0}, raw)
        info = RefinementInfo(degree=rh["degree"], scale=rh["scale"],
                              delta=rh["delta"], eps=rh["eps"],
                              spectrum_lo=rh["spectrum_lo"],
                              spectrum_hi=rh["spectrum_hi"])
        op = RefinedOperator(op, matrix, poly, rh["scale"], info)
    if pos != len(buf):
        raise SerializationError("trailing bytes after final block")
    return op, header["meta"]


def save_operator(path, op, meta: dict | None = None) -> None:
    data = operator_bytes(op, meta)
    with open(path, "wb") as fh:
        fh.write(data)


def load_operator(path):
    """Returns (operator, meta dict)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    return operator_from_bytes(buf)
