#!/usr/bin/env python3
"""
model_file.py — Versioned line-oriented text format for SPNs.

    spn-model 1
    width <w> height <h>            (0 0 for models that are not images)
    variables <d> <kind> ...        (c = continuous, otherwise the arity)
    nodes <n>
    S <id> <w>:<child> ...
    P <id> <child> ...
    I <id> <var> <value>
    G <id> <var> <mean> <variance>
    root <id>

Floats are written with repr() so a read-back reproduces them bit-exactly.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

from spn_toolkit.exceptions.spn_errors import SpnError
from spn_toolkit.exceptions.unsupported_format import UnsupportedFormat
from spn_toolkit.graph import GaussianLeaf, IndicatorLeaf, ProductNode, Spn, SumNode, VariableTable

MAGIC = "spn-model"
VERSION = 1


@dataclass(frozen=True)
class ModelFile:
    spn: Spn
    width: int = 0
    height: int = 0


def _float(value: float) -> str:
    return repr(float(value))


def serialize_model(model: ModelFile) -> str:
    spn = model.spn
    kinds = ["c" if a is None else str(a) for a in spn.variables.arities]
    lines = [
        f"{MAGIC} {VERSION}",
        f"width {model.width} height {model.height}",
        " ".join(["variables", str(spn.variables.count)] + kinds),
        f"nodes {len(spn)}",
    ]
    for i, node in enumerate(spn.nodes):
        if isinstance(node, SumNode):
            edges = " ".join(f"{_float(w)}:{c}" for w, c in zip(node.weights, node.children))
            lines.append(f"S {i} {edges}")
        elif isinstance(node, ProductNode):
            lines.append(f"P {i} " + " ".join(str(c) for c in node.children))
        elif isinstance(node, IndicatorLeaf):
            lines.append(f"I {i} {node.var} {node.value}")
        else:
            lines.append(f"G {i} {node.var} {_float(node.mean)} {_float(node.variance)}")
    lines.append(f"root {spn.root}")
    return "\n".join(lines) + "\n"


def _expect(fields: List[str], key: str, lineno: int, source: str) -> List[str]:
    if not fields or fields[0] != key:
        raise UnsupportedFormat(f"{source}:{lineno}: expected '{key}' record")
    return fields[1:]


def parse_model(text: str, source: str = "<model>") -> ModelFile:
    lines = [line.split() for line in text.splitlines() if line.strip()]
    if len(lines) < 5:
        raise UnsupportedFormat(f"{source}: truncated model file")
    try:
        header = _expect(lines[0], MAGIC, 1, source)
        if header != [str(VERSION)]:
            raise UnsupportedFormat(f"{source}: unsupported model version {' '.join(header)}")
        size = lines[1]
        if len(size) != 4 or size[0] != "width" or size[2] != "height":
            raise UnsupportedFormat(f"{source}:2: expected 'width <w> height <h>'")
        width, height = int(size[1]), int(size[3])

        var_fields = _expect(lines[2], "variables", 3, source)
        count = int(var_fields[0])
        if len(var_fields) != count + 1:
            raise UnsupportedFormat(f"{source}:3: expected {count} variable kinds")
        variables = VariableTable(tuple(None if k == "c" else int(k) for k in var_fields[1:]))

        n = int(_expect(lines[3], "nodes", 4, source)[0])
        if len(lines) != n + 5:
            raise UnsupportedFormat(f"{source}: expected {n} node records")
        nodes = []
        for offset, fields in enumerate(lines[4:4 + n]):
            lineno = offset + 5
            if len(fields) < 2 or int(fields[1]) != offset:
                raise UnsupportedFormat(f"{source}:{lineno}: node records must be numbered 0..{n - 1} in order")
            kind, args = fields[0], fields[2:]
            if kind == "S":
                pairs = [a.split(":") for a in args]
                if any(len(p) != 2 for p in pairs):
                    raise UnsupportedFormat(f"{source}:{lineno}: sum edges must be '<weight>:<child>'")
                nodes.append(SumNode(tuple(int(c) for _, c in pairs), tuple(float(w) for w, _ in pairs)))
            elif kind == "P":
                nodes.append(ProductNode(tuple(int(c) for c in args)))
            elif kind == "I" and len(args) == 2:
                nodes.append(IndicatorLeaf(int(args[0]), int(args[1])))
            elif kind == "G" and len(args) == 3:
                nodes.append(GaussianLeaf(int(args[0]), float(args[1]), float(args[2])))
            else:
                raise UnsupportedFormat(f"{source}:{lineno}: unknown node record '{' '.join(fields)}'")
        root = int(_expect(lines[-1], "root", len(lines), source)[0])
        spn = Spn(tuple(nodes), root, variables)
    except UnsupportedFormat:
        raise
    except (ValueError, IndexError) as e:
        raise UnsupportedFormat(f"{source}: malformed model file ({e})")
    except SpnError as e:
        raise UnsupportedFormat(f"{source}: {e}")
    return ModelFile(spn, width, height)


def write_model(path: Union[str, Path], model: ModelFile) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(serialize_model(model))


def read_model(path: Union[str, Path]) -> ModelFile:
    return parse_model(Path(path).read_text(), source=str(path))
