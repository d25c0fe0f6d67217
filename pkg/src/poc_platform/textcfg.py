"""Tiny line-oriented config format shared by scenario and calibration files.

Layout: a header of ``key: value`` lines, then repeated ``[kind name]`` blocks
each holding their own ``key: value`` lines.  Keys may repeat within a block
(values accumulate in order).  ``#`` starts a comment.  Errors carry the file
line number so callers can produce usable diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple


class ConfigSyntaxError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class Block:
    kind: str
    name: str
    line: int
    entries: List[Tuple[str, str, int]] = field(default_factory=list)

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v, _ in self.entries:
            if k == key:
                return v
        return default

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise ConfigSyntaxError(f"[{self.kind} {self.name}] is missing key {key!r}", self.line)
        return value

    def get_all(self, key: str) -> List[Tuple[str, int]]:
        return [(v, ln) for k, v, ln in self.entries if k == key]


@dataclass
class Document:
    header: List[Tuple[str, str, int]]
    blocks: List[Block]

    def header_get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        for k, v, _ in self.header:
            if k == key:
                return v
        return default


def parse_text(text: str) -> Document:
    header: List[Tuple[str, str, int]] = []
    blocks: List[Block] = []
    current: Optional[Block] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigSyntaxError("unterminated block header", lineno)
            inner = line[1:-1].strip()
            parts = inner.split(None, 1)
            if len(parts) != 2:
                raise ConfigSyntaxError("block header must be '[kind name]'", lineno)
            current = Block(kind=parts[0], name=parts[1], line=lineno)
            blocks.append(current)
            continue
        if ":" not in line:
            raise ConfigSyntaxError(f"expected 'key: value', got {line!r}", lineno)
        key, value = line.split(":", 1)
        entry = (key.strip(), value.strip(), lineno)
        if current is None:
            header.append(entry)
        else:
            current.entries.append(entry)
    return Document(header=header, blocks=blocks)


def parse_file(path) -> Document:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_text(fh.read())
