"""Hand-rolled parser and serializer for the job description grammar.

Statements are 'Name = value;'. Values: double-quoted strings with \\" and
\\\\ escapes, decimal numbers, true/false, and brace lists. Requirements and
Rank capture their right-hand side verbatim (quote-aware) up to the ';'.
Comments run from '//' or '#' to end of line. The parser is total: any input
yields a descriptor or a JdlSyntaxError, never a crash.
"""

from __future__ import annotations

import math
import re

from gridgate.jdl.model import (
    EXPRESSION_ATTRIBUTES,
    JdlBool,
    JdlExpr,
    JdlIssue,
    JdlList,
    JdlNum,
    JdlStr,
    JdlValue,
    JobDescriptor,
    canonical_name,
    render_number,
)

DUPLICATE_ATTRIBUTE = "DuplicateAttribute"

_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUM_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_WS = " \t\r\n\f\v"


class JdlSyntaxError(ValueError):
    """Parse failure, located at a 1-based (line, column)."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    last_nl = text.rfind("\n", 0, pos)
    return line, pos - last_nl  # column is 1-based because last_nl is -1 or index


class _Scanner:
    __slots__ = ("text", "pos", "n")

    def __init__(self, text: str) -> None:
        self.text = text
        self.pos = 0
        self.n = len(text)

    def fail(self, message: str, at: int | None = None) -> "JdlSyntaxError":
        line, col = _line_col(self.text, self.pos if at is None else at)
        return JdlSyntaxError(message, line, col)

    def skip_blank(self) -> None:
        """Advance past whitespace and comments."""
        text, n = self.text, self.n
        pos = self.pos
        while pos < n:
            ch = text[pos]
            if ch in _WS:
                pos += 1
                continue
            if ch == "#" or text.startswith("//", pos):
                nl = text.find("\n", pos)
                pos = n if nl < 0 else nl + 1
                continue
            break
        self.pos = pos

    def expect(self, ch: str) -> None:
        if self.pos >= self.n or self.text[self.pos] != ch:
            raise self.fail(f"expected {ch!r}")
        self.pos += 1

    def read_name(self) -> str:
        match = _NAME_RE.match(self.text, self.pos)
        if match is None:
            raise self.fail("expected an attribute name")
        self.pos = match.end()
        return match.group()

    def read_string(self) -> JdlStr:
        text, n = self.text, self.n
        start = self.pos
        pos = start + 1  # past the opening quote
        chunks: list[str] = []
        while pos < n:
            ch = text[pos]
            if ch == '"':
                self.pos = pos + 1
                return JdlStr("".join(chunks))
            if ch == "\n":
                break
            if ch == "\\":
                if pos + 1 >= n or text[pos + 1] not in ('"', "\\"):
                    self.pos = pos
                    raise self.fail("bad escape; only \\\" and \\\\ are allowed")
                chunks.append(text[pos + 1])
                pos += 2
                continue
            chunks.append(ch)
            pos += 1
        self.pos = start
        raise self.fail("unterminated string")

    def read_number(self) -> JdlNum:
        match = _NUM_RE.match(self.text, self.pos)
        if match is None:
            raise self.fail("expected a value")
        value = float(match.group())
        if not math.isfinite(value):
            raise self.fail("number out of range")
        self.pos = match.end()
        return JdlNum(value)

    def read_word_value(self) -> JdlBool:
        match = _NAME_RE.match(self.text, self.pos)
        word = match.group() if match else ""
        if word.lower() == "true":
            self.pos = match.end()  # type: ignore[union-attr]
            return JdlBool(True)
        if word.lower() == "false":
            self.pos = match.end()  # type: ignore[union-attr]
            return JdlBool(False)
        raise self.fail("expected a value")

    def read_list(self) -> JdlList:
        start = self.pos
        self.expect("{")
        items: list[JdlValue] = []
        self.skip_blank()
        if self.pos < self.n and self.text[self.pos] == "}":
            self.pos += 1
            return JdlList(())
        while True:
            self.skip_blank()
            if self.pos < self.n and self.text[self.pos] == "{":
                raise self.fail("nested lists are not supported")
            items.append(self.read_value())
            self.skip_blank()
            if self.pos >= self.n:
                raise self.fail("unterminated list", at=start)
            ch = self.text[self.pos]
            if ch == ",":
                self.pos += 1
                continue
            if ch == "}":
                self.pos += 1
                try:
                    return JdlList(tuple(items))
                except ValueError as exc:
                    self.pos = start
                    raise self.fail(str(exc))
            raise self.fail("expected ',' or '}' in list")

    def read_value(self) -> JdlValue:
        if self.pos >= self.n:
            raise self.fail("expected a value")
        ch = self.text[self.pos]
        if ch == '"':
            return self.read_string()
        if ch == "{":
            return self.read_list()
        if ch.isdigit() or ch in "+-.":
            return self.read_number()
        return self.read_word_value()

    def read_expression(self) -> JdlExpr:
        """Capture verbatim text up to the terminating ';', quote-aware."""
        text, n = self.text, self.n
        start = self.pos
        pos = start
        chunks: list[str] = []
        piece_start = pos
        while pos < n:
            ch = text[pos]
            if ch == ";":
                chunks.append(text[piece_start:pos])
                self.pos = pos + 1
                captured = "".join(chunks).strip()
                if not captured:
                    raise self.fail("empty expression", at=start)
                return JdlExpr(captured)
            if ch == '"':
                pos += 1
                while pos < n:
                    if text[pos] == "\\":
                        pos += 2
                        continue
                    if text[pos] == '"':
                        pos += 1
                        break
                    pos += 1
                else:
                    self.pos = start
                    raise self.fail("unterminated string in expression")
                continue
            if ch == "#" or text.startswith("//", pos):
                chunks.append(text[piece_start:pos])
                nl = text.find("\n", pos)
                pos = n if nl < 0 else nl + 1
                piece_start = pos
                continue
            pos += 1
        self.pos = start
        raise self.fail("unterminated expression")


def parse_jdl(text: str | bytes) -> JobDescriptor:
    """Parse a document into a descriptor, preserving attribute order."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise JdlSyntaxError(f"input is not UTF-8: {exc}", 1, 1) from exc
    if text.startswith("﻿"):
        text = text[1:]

    scanner = _Scanner(text)
    order: list[str] = []
    values: dict[str, JdlValue] = {}
    canonical: dict[str, str] = {}
    warnings: list[JdlIssue] = []
    while True:
        scanner.skip_blank()
        if scanner.pos >= scanner.n:
            break
        name_at = scanner.pos
        name = scanner.read_name()
        scanner.skip_blank()
        scanner.expect("=")
        scanner.skip_blank()
        if name.lower() in EXPRESSION_ATTRIBUTES:
            value = scanner.read_expression()
        else:
            value = scanner.read_value()
            scanner.skip_blank()
            scanner.expect(";")
        key = name.lower()
        if key in values:
            warnings.append(
                JdlIssue(
                    severity="warning",
                    code=DUPLICATE_ATTRIBUTE,
                    message=f"attribute {canonical_name(name)} assigned more than once; "
                    "last assignment wins",
                    span=_line_col(text, name_at),
                )
            )
        else:
            order.append(key)
            canonical[key] = canonical_name(name)
        values[key] = value
    return JobDescriptor(
        attributes=tuple((canonical[key], values[key]) for key in order),
        parse_warnings=tuple(warnings),
    )


def _render_string(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _render_value(value: JdlValue) -> str:
    if isinstance(value, JdlStr):
        return _render_string(value.value)
    if isinstance(value, JdlNum):
        return render_number(value.value)
    if isinstance(value, JdlBool):
        return "true" if value.value else "false"
    if isinstance(value, JdlExpr):
        return value.text
    if isinstance(value, JdlList):
        return "{" + ", ".join(_render_value(item) for item in value.items) + "}"
    raise TypeError(f"not a JDL value: {type(value).__name__}")


def serialize_jdl(descriptor: JobDescriptor) -> str:
    """Render one 'Name = value;' statement per line; reparses to an equal descriptor."""
    return "".join(
        f"{name} = {_render_value(value)};\n" for name, value in descriptor.attributes
    )
