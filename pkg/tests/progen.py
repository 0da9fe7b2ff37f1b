"""Random well-typed single-process programs for differential testing."""
import random

OPS = ["+", "-", "*", "land", "lor", "lxor", "/", "%"]
RELS = ["<", "<=", ">", ">=", "=", "<>"]


def _is_const(text):
    return text.strip("()-").isdigit()


class ProgramGen:
    def __init__(self, seed, max_width=16, max_iter=8):
        self.r = random.Random(seed)
        self.base = self.r.choice(["int", "logic"])
        self.width = self.r.choice([w for w in (4, 6, 8, 12, 16) if w <= max_width])
        self.max_iter = max_iter
        self.vars = [f"v{k}" for k in range(self.r.randint(2, 5))]
        self.counters = 0
        self.loops = 0

    def const(self):
        if self.base == "int":
            lo, hi = -(1 << (self.width - 1)), (1 << (self.width - 1)) - 1
        else:
            lo, hi = 0, (1 << self.width) - 1
        return str(self.r.choice([0, 1, 2, 3, self.r.randint(lo, hi)]) if self.base == "logic"
                   else self.r.choice([0, 1, 2, -1, self.r.randint(lo, hi)]))

    def atom(self, readable):
        if self.r.random() < 0.3:
            c = self.const()
            return f"({c})" if c.startswith("-") else c
        return self.r.choice(readable)

    def expr(self, readable, depth=0):
        if depth >= 2 or self.r.random() < 0.3:
            return self.atom(readable)
        op = self.r.choice(OPS)
        a, b = self.expr(readable, depth + 1), self.expr(readable, depth + 1)
        # constant-only subexpressions are folded (and range checked) at compile time
        if _is_const(a) and _is_const(b):
            a = self.r.choice(readable)
        return f"({a} {op} {b})"

    def cond(self, readable):
        a, b = self.atom(readable), self.expr(readable, 1)
        if _is_const(a) and _is_const(b):
            a = self.r.choice(readable)
        return f"{a} {self.r.choice(RELS)} {b}"

    def block(self, depth, readable, writable, ind):
        out = []
        for _ in range(self.r.randint(1, 4)):
            out.extend(self.stmt(depth, readable, writable, ind))
        return out

    def stmt(self, depth, readable, writable, ind):
        pad = "  " * ind
        k = self.r.random()
        if depth < 2 and k < 0.15:
            lines = [f"{pad}if {self.cond(readable)} then", f"{pad}begin"]
            lines += self.block(depth + 1, readable, writable, ind + 1)
            if self.r.random() < 0.5:
                lines += [f"{pad}end", f"{pad}else", f"{pad}begin"]
                lines += self.block(depth + 1, readable, writable, ind + 1)
            return lines + [f"{pad}end;"]
        if depth < 2 and k < 0.25:
            n = self.r.randint(0, self.max_iter - 1)
            self.loops += 1
            var = f"i{self.loops}"
            lines = [f"{pad}for {var} = 0 to {n} do", f"{pad}begin"]
            lines += self.block(depth + 1, readable, writable, ind + 1)
            return lines + [f"{pad}end;"]
        if depth < 2 and k < 0.32:
            self.counters += 1
            c = f"c{self.counters}"
            n = self.r.randint(0, self.max_iter)
            lines = [f"{pad}{c} <- 0;", f"{pad}while {c} < {n} do", f"{pad}begin"]
            lines += self.block(depth + 1, readable, writable, ind + 1)
            lines += [f"{pad}  {c} <- {c} + 1;"]
            return lines + [f"{pad}end;"]
        if k < 0.42 and len(writable) >= 2:
            ts = self.r.sample(writable, 2)
            return [f"{pad}{ts[0]} <- {self.expr(readable)}, {ts[1]} <- {self.expr(readable)};"]
        return [f"{pad}{self.r.choice(writable)} <- {self.expr(readable)};"]

    def source(self):
        ty = f"{self.base}[{self.width}]"
        body = [f"  {v} <- {self.const()};" for v in self.vars]
        for _ in range(self.r.randint(2, 6)):
            body += self.stmt(0, list(self.vars), list(self.vars), 1)
        decls = [f"  reg {', '.join(self.vars)} : {ty};"]
        if self.counters:
            decls.append(f"  reg {', '.join(f'c{k + 1}' for k in range(self.counters))} : int[5];")
        return "\n".join(["process main:", "begin"] + decls + body + ["end;"]) + "\n"


def random_program(seed, **kw):
    return ProgramGen(seed, **kw).source()
