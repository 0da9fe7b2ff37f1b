"""Structural checks of emitted VHDL text; no elaboration or simulation."""
from __future__ import annotations

import re

KEYWORDS = set("""
library use entity is port in out inout buffer signal end architecture of begin process if then
else elsif case when null and or xor not nand nor xnor others type array constant variable
function return procedure package body component map loop for while exit next rem mod abs
downto to range all generic subtype record wait until after report severity
""".split())
BUILTINS = set("""
ieee std_logic_1164 numeric_std work std_logic std_logic_vector signed unsigned integer natural
positive boolean true false to_signed to_unsigned to_integer resize shift_left shift_right
""".split())
ATTRIBUTES = ("event", "length", "range", "high", "low")
CONSTRUCTS = ("entity", "architecture", "package", "function", "procedure", "process", "case",
              "if", "loop", "component")

_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|=>|<=|:=|/=|>=|[();:,=<>+\-*/&.]|\S")


class ValidationError(Exception):
    def __init__(self, problems):
        super().__init__("; ".join(problems[:5]) + (" ..." if len(problems) > 5 else ""))
        self.problems = problems


def _strip(text):
    text = re.sub(r"--[^\n]*", "", text)
    text = re.sub(r"'(" + "|".join(ATTRIBUTES) + r")\b", " ", text)
    text = re.sub(r'"[^"\n]*"', " 0 ", text)
    text = re.sub(r"'.'", " 0 ", text)
    return text


def tokens(text):
    return [t.lower() for t in _TOKEN.findall(_strip(text))]


def _balance(toks, problems):
    stack = []
    i = 0
    n = len(toks)
    while i < n:
        t = toks[i]
        prev = toks[i - 1] if i else ""
        if t == "end":
            nxt = toks[i + 1] if i + 1 < n else ";"
            if not stack:
                problems.append("'end' without an open construct")
            elif nxt in CONSTRUCTS:
                top = stack.pop()
                if top != nxt:
                    problems.append(f"'end {nxt}' closes '{top}'")
                i += 1
            else:
                top = stack.pop()
                if top not in ("entity", "architecture", "package", "function", "procedure"):
                    problems.append(f"plain 'end' closes '{top}'")
            i += 1
            continue
        if prev == "end":
            i += 1
            continue
        if t in ("function", "procedure"):
            j = i
            depth = 0
            while j < n and not (toks[j] in (";", "is") and depth == 0):
                depth += toks[j] == "("
                depth -= toks[j] == ")"
                j += 1
            if j < n and toks[j] == "is":
                stack.append(t)
        elif t == "entity" and not (i + 2 < n and toks[i + 2] == "."):
            stack.append(t)
        elif t in ("architecture", "package", "process", "case", "if", "loop", "component"):
            if t == "package" and i + 1 < n and toks[i + 1] == "body":
                i += 1
            stack.append(t)
        i += 1
    if stack:
        problems.append(f"unclosed constructs: {', '.join(stack)}")


def _declared(toks):
    """Declared names with their declaration counts, plus names of scoped helpers."""
    counts = {}
    scoped = set()
    n = len(toks)
    for i, t in enumerate(toks):
        nxt = toks[i + 1] if i + 1 < n else ""
        if t in ("signal", "constant") and nxt not in KEYWORDS:
            counts[nxt] = counts.get(nxt, 0) + 1
        elif t == "type":
            counts[nxt] = counts.get(nxt, 0) + 1
            if i + 3 < n and toks[i + 2] == "is" and toks[i + 3] == "(":
                j = i + 4
                while j < n and toks[j] != ")":
                    if toks[j] != ",":
                        counts[toks[j]] = counts.get(toks[j], 0) + 1
                    j += 1
        elif t in ("variable",):
            scoped.add(nxt)
        elif t in ("entity", "component", "architecture", "package", "function", "procedure") \
                and i and toks[i - 1] != "end":
            scoped.add(nxt if nxt != "body" else toks[i + 2])
            if t == "architecture" and i + 3 < n:
                scoped.add(toks[i + 3])
        elif t == "for" and i + 2 < n and toks[i + 2] == "in":
            scoped.add(nxt)
        elif t == ":" and i >= 1 and toks[i - 1] not in KEYWORDS and nxt in ("process", "entity"):
            scoped.add(toks[i - 1])
        elif t == ":" and i >= 1 and i + 2 < n and toks[i + 2] == "port" and toks[i + 3] == "map":
            scoped.add(toks[i - 1])
        elif t in ("port", "generic") and nxt == "(":
            for name in _interface_names(toks, i + 1):
                counts[name] = counts.get(name, 0) + 1
    return counts, scoped


def _interface_names(toks, j):
    """Names of a port/generic list starting at '('; 'signal'-prefixed ones are counted elsewhere."""
    out = []
    depth = 0
    start = True
    n = len(toks)
    while j < n:
        t = toks[j]
        if t == "(":
            depth += 1
            start = depth == 1
        elif t == ")":
            depth -= 1
            if depth == 0:
                break
        elif depth == 1 and t == ";":
            start = True
        elif depth == 1 and start and t == ",":
            pass
        elif depth == 1 and start:
            if t == "signal":
                start = False
            elif toks[j + 1] in (",", ":"):
                out.append(t)
            if toks[j + 1] == ":":
                start = False
        j += 1
    return out


def _params(toks):
    """Names declared inside function and procedure parameter lists."""
    out = set()
    n = len(toks)
    for i, t in enumerate(toks):
        if t in ("function", "procedure") and i + 2 < n and toks[i + 2] == "(":
            depth, j = 0, i + 2
            while j < n:
                depth += toks[j] == "("
                depth -= toks[j] == ")"
                if toks[j] == ":" and toks[j - 1] not in KEYWORDS:
                    out.add(toks[j - 1])
                if depth == 0:
                    break
                j += 1
    return out


def _component_ports(toks):
    out = {}
    n = len(toks)
    i = 0
    while i < n:
        if toks[i] == "component" and (i == 0 or toks[i - 1] != "end"):
            name = toks[i + 1]
            ports = set()
            j = i + 2
            while j < n and not (toks[j] == "end" and toks[j + 1] == "component"):
                if toks[j] == "signal":
                    ports.add(toks[j + 1])
                j += 1
            out[name] = ports
            i = j
        i += 1
    return out


def _without_components(toks):
    out, skip = [], False
    for i, t in enumerate(toks):
        if t == "component" and (i == 0 or toks[i - 1] != "end"):
            skip = True
            out.extend(toks[i:i + 2])
        if not skip:
            out.append(t)
        if skip and t == "component" and toks[i - 1] == "end":
            skip = False
    return out


def _support_names(support_text):
    toks = tokens(support_text)
    counts, scoped = _declared(toks)
    names = set(counts) | scoped
    names |= {toks[i + 1] for i, t in enumerate(toks) if t in ("function", "procedure")}
    return names


def _state_cases(toks, members, problems):
    cases = []
    n = len(toks)
    i = 0
    while i < n:
        if toks[i] == "case" and (i == 0 or toks[i - 1] != "end") and toks[i + 1] == "pro_state":
            seen = set()
            j = i + 2
            depth = 0
            while j < n:
                if toks[j] == "case" and toks[j - 1] != "end":
                    depth += 1
                if toks[j] == "end" and toks[j + 1] == "case":
                    if depth == 0:
                        break
                    depth -= 1
                if toks[j] == "when" and depth == 0:
                    seen.add(toks[j + 1])
                j += 1
            cases.append(seen)
            i = j
        i += 1
    if len(cases) != 3:
        problems.append(f"expected 3 state case statements, found {len(cases)}")
    for k, seen in enumerate(cases):
        missing = [m for m in members if m not in seen]
        if missing:
            problems.append(f"case statement {k + 1} misses states {', '.join(missing)}")


def _enum_members(toks):
    for i, t in enumerate(toks):
        if t == "type" and toks[i + 1] == "pro_states":
            j = i + 4
            out = []
            while toks[j] != ")":
                if toks[j] != ",":
                    out.append(toks[j])
                j += 1
            return out
    return None


def validate_text(text, support_text=None):
    """Problems found in one VHDL file (empty when it passes)."""
    from .support import SUPPORT_PACKAGE
    problems = []
    toks = tokens(text)
    _balance(toks, problems)
    counts, scoped = _declared(_without_components(toks))
    for name, c in counts.items():
        if c > 1:
            problems.append(f"{name} declared {c} times")
    known = set(counts) | scoped | _params(toks) | KEYWORDS | BUILTINS
    if "conpro_support" in toks:
        known |= _support_names(support_text or SUPPORT_PACKAGE)
    comps = _component_ports(toks)
    formals = set().union(*comps.values()) if comps else set()
    body = _without_components(toks)
    for i, t in enumerate(body):
        if not re.match(r"[a-z_]", t) or t in known:
            continue
        if i + 1 < len(body) and body[i + 1] == "=>" and t in formals:
            continue
        problems.append(f"undeclared identifier {t}")
        known.add(t)
    members = _enum_members(toks)
    if members is not None:
        _state_cases(toks, members, problems)
    return problems


def validate_design(design):
    """Raise ValidationError listing every structural problem of a VhdlDesign."""
    problems = []
    for name, text in design.files.items():
        problems += [f"{name}: {p}" for p in validate_text(text)]
    if problems:
        raise ValidationError(problems)
    return True
