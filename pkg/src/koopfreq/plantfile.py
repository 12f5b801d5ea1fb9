"""Parser for plant definition files.

Format (INI-like, # comments, blank lines ignored)::

    [plant]
    name = cascade
    dim = 2

    [params]
    a1 = -1.0
    a2 = -2.0

    [dynamics]
    x1' = a1*x1 + x2^2
    x2' = a2*x2 + u

    [observable]
    y = x1

Every state equation x1' .. xd' must appear exactly once. Errors carry
1-based line and column numbers; expression syntax errors point at the
offending character inside the right-hand side.
"""

from __future__ import annotations

from pathlib import Path

from . import expr as ex
from .system import PlantSpec

__all__ = ["PlantFileError", "parse_plant_text", "load_plant"]

_SECTIONS = ("plant", "params", "dynamics", "observable")


class PlantFileError(Exception):
    """Malformed plant file; carries line and column (1-based)."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


def _entries(text: str):
    """Yield (section, key, value, line_no, value_col) for every assignment."""
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise PlantFileError("unterminated section header", ln,
                                     line.index("[") + 1)
            section = stripped[1:-1].strip()
            if section not in _SECTIONS:
                raise PlantFileError(f"unknown section [{section}]", ln,
                                     line.index("[") + 1)
            continue
        if "=" not in line:
            raise PlantFileError("expected 'key = value'", ln,
                                 len(line) - len(line.lstrip()) + 1)
        if section is None:
            raise PlantFileError("assignment outside any [section]", ln)
        key, value = line.split("=", 1)
        value_col = len(key) + 2 + (len(value) - len(value.lstrip()))
        yield section, key.strip(), value.strip(), ln, value_col


def parse_plant_text(text: str, default_name: str = "plant") -> PlantSpec:
    name = default_name
    dim: int | None = None
    params: dict[str, float] = {}
    dynamics: dict[int, tuple[str, int, int]] = {}
    observable: tuple[str, int, int] | None = None

    for section, key, value, ln, vcol in _entries(text):
        if section == "plant":
            if key == "name":
                name = value
            elif key == "dim":
                try:
                    dim = int(value)
                except ValueError:
                    raise PlantFileError(f"dim must be an integer, got {value!r}",
                                         ln, vcol) from None
                if dim < 1:
                    raise PlantFileError("dim must be >= 1", ln, vcol)
            else:
                raise PlantFileError(f"unknown [plant] key {key!r}", ln)
        elif section == "params":
            try:
                params[key] = float(value)
            except ValueError:
                raise PlantFileError(f"parameter {key!r} must be a real number, "
                                     f"got {value!r}", ln, vcol) from None
        elif section == "dynamics":
            if not (key.endswith("'") and key[:-1].startswith("x")
                    and key[1:-1].isdigit()):
                raise PlantFileError(f"dynamics keys look like x1', got {key!r}", ln)
            idx = int(key[1:-1])
            if idx in dynamics:
                raise PlantFileError(f"duplicate equation for x{idx}", ln)
            dynamics[idx] = (value, ln, vcol)
        elif section == "observable":
            if key != "y":
                raise PlantFileError(f"observable key must be y, got {key!r}", ln)
            observable = (value, ln, vcol)

    if dim is None:
        raise PlantFileError("missing dim in [plant]", 1)
    if observable is None:
        raise PlantFileError("missing [observable] section with y = <expr>", 1)
    missing = sorted(set(range(1, dim + 1)) - set(dynamics))
    if missing:
        raise PlantFileError(f"missing equation for x{missing[0]}", 1)
    extra = sorted(set(dynamics) - set(range(1, dim + 1)))
    if extra:
        src, ln, vcol = dynamics[extra[0]]
        raise PlantFileError(f"equation for x{extra[0]} but dim = {dim}", ln)

    def parse_expr(src: str, ln: int, vcol: int) -> ex.Expr:
        try:
            return ex.parse(src, dim, params)
        except ex.ParseError as err:
            raise PlantFileError(err.message, ln, vcol + err.offset) from None

    rhs = tuple(parse_expr(*dynamics[i]) for i in range(1, dim + 1))
    g = parse_expr(*observable)
    return PlantSpec(name, dim, rhs, g, params)


def load_plant(path) -> PlantSpec:
    p = Path(path)
    return parse_plant_text(p.read_text(), default_name=p.stem)
