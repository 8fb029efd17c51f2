"""Text serialization of trained readouts.

Layout (one record per line, whitespace separated, floats written with
``repr`` so they round-trip exactly)::

    QRCK1
    n_qubits <int>
    encoding <scheme> <input_dim>
    reservoir <n_input> <n_ancilla> <h> <J> <t> <variant> <washout>
    ridge <float>
    p_max <int>
    operators <count> <code> ...
    scale <count> <float> ...
    weights <rows> <cols>
    <row of weights>            (repeated rows times)
    alpha <rows> <cols>
    <row of alpha>              (repeated rows times)
    end

``operators`` holds Pauli codes; ``weights`` or ``alpha`` may have zero rows
when the readout is purely primal or purely dual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadMagic, IoError, ParseError, TruncatedFile
from .quantum import EncodingSpec, ReservoirSpec

MAGIC = "QRCK1"


@dataclass
class TrainedReadout:
    reservoir: ReservoirSpec
    ridge: float
    p_max: int = 1
    operators: list[int] = field(default_factory=list)
    scale: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    alpha: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def n_qubits(self) -> int:
        return self.reservoir.n_qubits


def _matrix_lines(name: str, a: np.ndarray) -> list[str]:
    a = np.atleast_2d(np.asarray(a, dtype=float)) if np.size(a) else np.zeros((0, 0))
    lines = [f"{name} {a.shape[0]} {a.shape[1]}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in a)
    return lines


def dumps(r: TrainedReadout) -> str:
    res = r.reservoir
    lines = [
        MAGIC,
        f"n_qubits {r.n_qubits}",
        f"encoding {res.encoding.scheme.value} {res.encoding.input_dim}",
        f"reservoir {res.n_input} {res.n_ancilla} {float(res.tfim_h)!r} {float(res.tfim_j)!r} "
        f"{float(res.evolution_time)!r} {res.tfim_axis_variant.value} {res.washout}",
        f"ridge {float(r.ridge)!r}",
        f"p_max {r.p_max}",
        " ".join(["operators", str(len(r.operators))] + [str(int(c)) for c in r.operators]),
        " ".join(["scale", str(len(r.scale))] + [repr(float(v)) for v in r.scale]),
    ]
    lines += _matrix_lines("weights", r.weights)
    lines += _matrix_lines("alpha", r.alpha)
    lines.append("end")
    return "\n".join(lines) + "\n"


class _Reader:
    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def next(self, key: str | None = None) -> list[str]:
        if self.pos >= len(self.lines):
            raise TruncatedFile(f"readout file ends before {key or 'next record'}")
        parts = self.lines[self.pos].split()
        self.pos += 1
        if key is not None and (not parts or parts[0] != key):
            raise ParseError(f"expected record {key!r}", line=self.pos)
        return parts

    def ints(self, parts: list[str]) -> list[int]:
        try:
            return [int(p) for p in parts]
        except ValueError as exc:
            raise ParseError(str(exc), line=self.pos) from exc

    def floats(self, parts: list[str]) -> list[float]:
        try:
            return [float(p) for p in parts]
        except ValueError as exc:
            raise ParseError(str(exc), line=self.pos) from exc

    def counted(self, key: str, conv) -> list:
        parts = self.next(key)
        (count,) = self.ints(parts[1:2])
        values = conv(parts[2:])
        if len(values) != count:
            raise ParseError(f"{key}: declared {count} values, found {len(values)}", line=self.pos)
        return values

    def matrix(self, key: str) -> np.ndarray:
        rows, cols = self.ints(self.next(key)[1:3])
        data = [self.floats(self.next()) for _ in range(rows)]
        for r in data:
            if len(r) != cols:
                raise ParseError(f"{key}: row has {len(r)} values, expected {cols}", line=self.pos)
        return np.array(data, dtype=float).reshape(rows, cols)


def loads(text: str) -> TrainedReadout:
    rd = _Reader(text)
    if not rd.lines or rd.lines[0].strip() != MAGIC:
        raise BadMagic(f"readout file does not start with {MAGIC}")
    rd.pos = 1
    (n_qubits,) = rd.ints(rd.next("n_qubits")[1:2])
    enc = rd.next("encoding")
    enc_spec = EncodingSpec(enc[1], rd.ints(enc[2:3])[0])
    p = rd.next("reservoir")
    if len(p) != 8:
        raise ParseError("reservoir record needs 7 fields", line=rd.pos)
    n_in, n_anc = rd.ints(p[1:3])
    h, j, t = rd.floats(p[3:6])
    res = ReservoirSpec(n_in, n_anc, enc_spec, h, j, t, p[6], rd.ints(p[7:8])[0])
    if res.n_qubits != n_qubits:
        raise ParseError(f"n_qubits {n_qubits} disagrees with reservoir layout", line=2)
    (ridge,) = rd.floats(rd.next("ridge")[1:2])
    (p_max,) = rd.ints(rd.next("p_max")[1:2])
    ops = rd.counted("operators", rd.ints)
    scale = np.array(rd.counted("scale", rd.floats))
    weights = rd.matrix("weights")
    alpha = rd.matrix("alpha")
    rd.next("end")
    return TrainedReadout(res, ridge, p_max, ops, scale, weights, alpha)


def save_readout(path, readout: TrainedReadout) -> Path:
    path = Path(path)
    try:
        path.write_text(dumps(readout))
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return path


def load_readout(path) -> TrainedReadout:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return loads(text)
