"""A small closed-form expression language for coefficient functions.

Run configurations describe coefficients as strings like ``"1 + x/2"`` or
``"0.5*sin(2*t) * exp(-u^2)"``.  The grammar supports the operators
``+ - * / ^`` (with ``^`` binding tightest and associating right), unary
minus, parentheses, the functions ``sin cos exp tanh abs``, the constant
``pi``, and a caller-chosen set of variables.  Parsed expressions evaluate
elementwise on numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ExpressionParseError

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
}

CONSTANTS = {"pi": math.pi}


class Expression:
    """A compiled expression; call with keyword arguments for its variables."""

    def __init__(self, text, variables, fn, used):
        self.text = text
        self.variables = tuple(variables)
        self._fn = fn
        self.used_variables = frozenset(used)

    def __call__(self, **values):
        return self._fn(values)

    @property
    def is_constant(self) -> bool:
        return not self.used_variables

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError(f"expression {self.text!r} depends on {sorted(self.used_variables)}")
        return float(self._fn({}))

    def __repr__(self):
        return f"Expression({self.text!r})"


def parse_expression(text: str, variables=("t", "x")) -> Expression:
    """Parse ``text`` into an Expression over the given variable names."""
    tokens = _tokenize(text)
    parser = _Parser(text, tokens, set(variables))
    fn, used = parser.parse()
    return Expression(text, variables, fn, used)


_OPERATORS = set("+-*/^()")


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPERATORS:
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExpressionParseError(f"bad numeric literal {text[i:j]!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExpressionParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", None, n))
    return tokens


class _Parser:
    """Recursive descent over the token list; produces a closure tree."""

    def __init__(self, text, tokens, variables):
        self.text = text
        self.tokens = tokens
        self.variables = variables
        self.pos = 0
        self.used = set()

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ExpressionParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self):
        fn = self._sum()
        tok = self.peek()
        if tok[0] != "end":
            raise ExpressionParseError(f"unexpected trailing token {tok[1]!r}", tok[2])
        return fn, self.used

    def _sum(self):
        left = self._term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            right = self._term()
            if op == "+":
                left = (lambda a, b: lambda env: a(env) + b(env))(left, right)
            else:
                left = (lambda a, b: lambda env: a(env) - b(env))(left, right)
        return left

    def _term(self):
        left = self._unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            right = self._unary()
            if op == "*":
                left = (lambda a, b: lambda env: a(env) * b(env))(left, right)
            else:
                left = (lambda a, b: lambda env: a(env) / b(env))(left, right)
        return left

    def _unary(self):
        tok = self.peek()
        if tok[0] == "-":
            self.advance()
            inner = self._unary()
            return lambda env: -inner(env)
        if tok[0] == "+":
            self.advance()
            return self._unary()
        return self._power()

    def _power(self):
        base = self._atom()
        if self.peek()[0] == "^":
            self.advance()
            # right associative; exponent may itself be a signed power
            exponent = self._unary()
            return lambda env: base(env) ** exponent(env)
        return base

    def _atom(self):
        kind, value, pos = self.advance()
        if kind == "num":
            return lambda env, v=value: v
        if kind == "(":
            inner = self._sum()
            self.expect(")")
            return inner
        if kind == "name":
            if self.peek()[0] == "(":
                if value not in FUNCTIONS:
                    raise ExpressionParseError(f"unknown function {value!r}", pos)
                self.advance()
                arg = self._sum()
                self.expect(")")
                func = FUNCTIONS[value]
                return lambda env: func(arg(env))
            if value in CONSTANTS:
                return lambda env, v=CONSTANTS[value]: v
            if value in self.variables:
                self.used.add(value)
                return lambda env, name=value: env[name]
            raise ExpressionParseError(
                f"unknown identifier {value!r} (variables here: {sorted(self.variables)})", pos)
        raise ExpressionParseError(f"unexpected token {value!r}", pos)
