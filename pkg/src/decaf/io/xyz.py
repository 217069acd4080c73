"""Reader and writer for (extended) XYZ files.

Each frame is a count line, a comment line and one ``El x y z [fx fy fz]``
row per atom. ``key=value`` pairs on the comment line are kept in
``Structure.info``; ``energy`` and ``dipole`` (three numbers, quoted) are
also parsed into their own fields.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from decaf.errors import ParseError
from decaf.io.structure import Structure, check_element

_RESERVED = {"energy", "dipole", "Properties", "source"}


def _float(token, lineno, what):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(lineno, f"cannot read {what} from {token!r}") from None
    if not np.isfinite(value):
        raise ParseError(lineno, f"non-finite {what} {token!r}")
    return value


_PAIR = re.compile(r"""([A-Za-z_][\w\-]*)=("(?:[^"\\]|\\.)*"|'[^']*'|\S*)""")


def _parse_comment(comment: str) -> dict:
    info = {}
    for key, value in _PAIR.findall(comment):
        if value[:1] == '"':
            value = re.sub(r"\\(.)", r"\1", value[1:-1])
        elif value[:1] == "'":
            value = value[1:-1]
        info[key] = value
    return info


def parse_xyz(text: str, source: str = "") -> list[Structure]:
    lines = text.splitlines()
    frames = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        lineno = i + 1
        try:
            count = int(lines[i].strip())
        except ValueError:
            raise ParseError(lineno, f"expected atom count, got {lines[i].strip()!r}") from None
        if count < 1:
            raise ParseError(lineno, "atom count must be positive")
        if i + 1 >= len(lines):
            raise ParseError(lineno + 1, "missing comment line")
        info = _parse_comment(lines[i + 1])
        symbols, pos, frc = [], [], []
        for k in range(count):
            j = i + 2 + k
            if j >= len(lines):
                raise ParseError(j + 1, f"expected {count} atom rows, file ended after {k}")
            cols = lines[j].split()
            if len(cols) not in (4, 7):
                raise ParseError(j + 1, f"expected 4 or 7 columns, got {len(cols)}")
            symbols.append(check_element(cols[0], j + 1))
            pos.append([_float(c, j + 1, "coordinate") for c in cols[1:4]])
            if len(cols) == 7:
                frc.append([_float(c, j + 1, "force") for c in cols[4:7]])
        if frc and len(frc) != count:
            raise ParseError(i + 3, "forces must be given for every atom or none")

        energy = dipole = None
        if "energy" in info:
            energy = _float(info["energy"], lineno + 1, "energy")
        if "dipole" in info:
            parts = info["dipole"].split()
            if len(parts) != 3:
                raise ParseError(lineno + 1, "dipole needs three components")
            dipole = np.array([_float(p, lineno + 1, "dipole") for p in parts])
        extra = {k: v for k, v in info.items() if k not in _RESERVED}
        frames.append(
            Structure(
                symbols,
                np.array(pos),
                np.array(frc) if frc else None,
                energy,
                dipole,
                info.get("source", f"{source}#{len(frames)}" if source else str(len(frames))),
                extra,
            )
        )
        i += 2 + count
    return frames


def read_xyz(path) -> list[Structure]:
    path = Path(path)
    return parse_xyz(path.read_text(encoding="utf-8"), source=path.name)


def _quote(value: str) -> str:
    if value and not re.search(r'[\s"\'=\\]', value):
        return value
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _g(x) -> str:
    return format(float(x), ".17g")


def format_xyz(structures) -> str:
    out = []
    for s in structures:
        props = "species:S:1:pos:R:3" + (":forces:R:3" if s.forces is not None else "")
        fields = [f"Properties={props}"]
        if s.energy is not None:
            fields.append(f"energy={_g(s.energy)}")
        if s.dipole is not None:
            fields.append("dipole=" + _quote(" ".join(_g(v) for v in s.dipole)))
        if s.source:
            fields.append("source=" + _quote(s.source))
        for k, v in s.info.items():
            fields.append(f"{k}=" + _quote(str(v)))
        out.append(str(len(s)))
        out.append(" ".join(fields))
        for n, sym in enumerate(s.symbols):
            row = [sym] + [_g(v) for v in s.positions[n]]
            if s.forces is not None:
                row += [_g(v) for v in s.forces[n]]
            out.append(" ".join(row))
    return "\n".join(out) + "\n"


def write_xyz(path, structures) -> None:
    Path(path).write_text(format_xyz(structures), encoding="utf-8")
