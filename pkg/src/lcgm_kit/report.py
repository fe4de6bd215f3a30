"""Deterministic report rendering for the command-line tools.

Reports must be byte-identical across runs for fixed inputs and seeds, so
the JSON emitter is hand-rolled: keys sorted, floats at 17 significant
digits, rationals as "p/q" strings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def _render(value, out: list[str]) -> None:
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, Fraction):
        out.append(f'"{value.numerator}/{value.denominator}"')
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        v = float(value)
        if v != v or v in (float("inf"), float("-inf")):
            out.append(f'"{v!r}"')
        else:
            out.append(f"{v:.17g}")
    elif isinstance(value, str):
        out.append(_escape(value))
    elif isinstance(value, dict):
        out.append("{")
        first = True
        for key in sorted(value, key=str):
            if not first:
                out.append(",")
            first = False
            out.append(_escape(str(key)))
            out.append(":")
            _render(value[key], out)
        out.append("}")
    elif isinstance(value, (list, tuple, np.ndarray)):
        seq = value.tolist() if isinstance(value, np.ndarray) else value
        out.append("[")
        for i, item in enumerate(seq):
            if i:
                out.append(",")
            _render(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot render {type(value).__name__} deterministically")


def _escape(s: str) -> str:
    body = (
        s.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    return f'"{body}"'


def render_json(value) -> str:
    out: list[str] = []
    _render(value, out)
    return "".join(out)


def input_digest(*parts) -> str:
    """Stable hash over input file bytes and stringified parameters."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            h.update(part)
        else:
            h.update(str(part).encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


@dataclass
class Report:
    command: str
    inputs_digest: str
    body: dict
    warnings: list[str]

    def to_json(self) -> str:
        return render_json(
            {
                "command": self.command,
                "inputs_digest": self.inputs_digest,
                "body": self.body,
                "warnings": list(self.warnings),
            }
        )
