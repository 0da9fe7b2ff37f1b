"""Tokenizer for the ConPro-style source language."""
from __future__ import annotations

from dataclasses import dataclass

from ..diagnostics import CompileError, Diagnostic, Loc

KEYWORDS = frozenset("""
    open export type reg var block sig const queue channel object array process
    function return begin end with and or xor not land lor lxor lnot lsl lsr
    if then else match when others try raise exception for to downto step do
    while always wait in of true false include module import component port
    input output inout value int logic bool char
    nanosec microsec millisec milisec sec hz kilohz megahz gigahz
""".split())

TIME_UNITS = {"nanosec": 1e-9, "microsec": 1e-6, "millisec": 1e-3, "milisec": 1e-3, "sec": 1.0}
FREQ_UNITS = {"hz": 1, "kilohz": 10**3, "megahz": 10**6, "gigahz": 10**9}

# longest first so that "<-" wins over "<"
OPERATORS = ("<-", "<=", ">=", "<>", ":=", "<", ">", "=", "+", "-", "*", "/", "%", "@", "~", "#")
PUNCT = ";:,.()[]{}"


@dataclass(frozen=True)
class Token:
    kind: str  # keyword identifier integer-literal logic-literal char-literal string-literal operator punctuation eof
    text: str
    line: int
    column: int
    ws: str = ""  # whitespace and comments preceding the token
    value: object = None
    width: int | None = None
    file: str = "<input>"

    @property
    def loc(self):
        return Loc(self.line, self.column, self.file)

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def _logic_value(digits: str, base: str):
    if base == "b":
        return int(digits, 2), len(digits)
    if base == "x":
        return int(digits, 16), 4 * len(digits)
    # multi-valued logic: H counts as 1, L and Z as 0
    bits = "".join("1" if c in "1H" else "0" for c in digits)
    return int(bits, 2), len(digits)


class Lexer:
    def __init__(self, source: str, filename: str = "<input>"):
        self.src = source
        self.file = filename
        self.pos = 0
        self.line = 1
        self.col = 1

    def _fail(self, msg, line, col):
        raise CompileError(Diagnostic("error", msg, Loc(line, col, self.file)))

    def _advance(self, n):
        for ch in self.src[self.pos:self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def _skip_trivia(self):
        start = self.pos
        src = self.src
        while self.pos < len(src):
            ch = src[self.pos]
            if ch in " \t\r\n\f\v":
                self._advance(1)
            elif src.startswith("--", self.pos):
                end = src.find("\n", self.pos)
                self._advance((len(src) if end < 0 else end) - self.pos)
            else:
                break
        return src[start:self.pos]

    def tokens(self):
        out = []
        src = self.src
        while True:
            ws = self._skip_trivia()
            line, col = self.line, self.col
            if self.pos >= len(src):
                out.append(Token("eof", "", line, col, ws, file=self.file))
                return out
            ch = src[self.pos]
            start = self.pos
            kind, value, width = None, None, None
            if ch.isalpha() or ch == "_":
                end = start
                while end < len(src) and (src[end].isalnum() or src[end] == "_"):
                    end += 1
                text = src[start:end]
                kind = "keyword" if text in KEYWORDS else "identifier"
                if text in ("true", "false"):
                    value = text == "true"
            elif ch.isdigit():
                kind, end, value, width = self._number(start, line, col)
            elif ch == "'":
                end, value = self._quoted(start, "'", line, col)
                kind = "char-literal"
                if len(value) != 1:
                    self._fail("character literal must hold exactly one character", line, col)
                value = ord(value)
            elif ch == '"':
                end, value = self._quoted(start, '"', line, col)
                kind = "string-literal"
            else:
                for op in OPERATORS:
                    if src.startswith(op, start):
                        kind, end = "operator", start + len(op)
                        break
                else:
                    if ch in PUNCT:
                        kind, end = "punctuation", start + 1
                    else:
                        self._fail(f"illegal character {ch!r}", line, col)
            text = src[start:end]
            self._advance(end - start)
            out.append(Token(kind, text, line, col, ws, value, width, self.file))

    def _number(self, start, line, col):
        src = self.src
        if src.startswith(("0b", "0x", "0l"), start) and start + 2 < len(src):
            base = src[start + 1]
            allowed = {"b": "01", "x": "0123456789abcdefABCDEF", "l": "01LHZ"}[base]
            end = start + 2
            while end < len(src) and (src[end] in allowed or src[end] == "_"):
                end += 1
            digits = src[start + 2:end].replace("_", "")
            if digits:
                value, width = _logic_value(digits, base)
                return "logic-literal", end, value, width
        end = start
        while end < len(src) and (src[end].isdigit() or src[end] == "_"):
            end += 1
        if end < len(src) and (src[end].isalpha()):
            self._fail(f"malformed number {src[start:end + 1]!r}", line, col)
        return "integer-literal", end, int(src[start:end].replace("_", "")), None

    def _quoted(self, start, quote, line, col):
        src = self.src
        i = start + 1
        chars = []
        escapes = {"n": "\n", "t": "\t", "r": "\r", "0": "\0", "\\": "\\", "'": "'", '"': '"'}
        while True:
            if i >= len(src) or src[i] == "\n":
                what = "character" if quote == "'" else "string"
                self._fail(f"unterminated {what} literal", line, col)
            c = src[i]
            if c == quote:
                return i + 1, "".join(chars)
            if c == "\\" and i + 1 < len(src):
                chars.append(escapes.get(src[i + 1], src[i + 1]))
                i += 2
            else:
                chars.append(c)
                i += 1


def tokenize(source: str, filename: str = "<input>") -> list[Token]:
    """Full token stream ending in an eof token; comments are kept only as trivia."""
    return Lexer(source, filename).tokens()


def untokenize(tokens) -> str:
    return "".join(t.ws + t.text for t in tokens)
