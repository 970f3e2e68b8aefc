from dataclasses import dataclass
from fractions import Fraction
import re
from typing import Optional

from .coefficients import FUNCTION_NAMES
from .expr import Expr, InfinitesimalConst, RealConst, Var, add, div, func, int_pow, mul, neg, sub
from .hyperreal import GeneratorRegistry


class ExprSyntaxError(Exception):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ArityError(Exception):
    pass


_TOKEN = re.compile(r"\s*(?:(?P<number>\d+(?:\.\d*)?|\.\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))")
_VARIABLE = re.compile(r"x([0-9]+)")


@dataclass(frozen=True, slots=True)
class _Token:
    kind: str
    text: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    position = 0
    while position < len(text):
        if text[position:].strip() == "":
            break
        match = _TOKEN.match(text, position)
        if match is None or match.end() == position:
            start = position + (len(text[position:]) - len(text[position:].lstrip()))
            raise ExprSyntaxError(f"Unexpected character {text[start]!r}", start, text)
        kind = match.lastgroup
        tokens.append(_Token(kind, match.group(kind), match.start(kind)))
        position = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    """Recursive descent over

        expr   := term (('+'|'-') term)*
        term   := unary (('*'|'/') unary)*
        unary  := '-' unary | factor
        factor := base ('^' power)?
        power  := INT | '-' INT | '(' '-'? INT ')'
        base   := NUMBER | generator | 'x'INT | func '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str, arity: int, registry: GeneratorRegistry):
        self.text = text
        self.arity = arity
        self.registry = registry
        self.tokens = _tokenize(text)
        self.index = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _accept(self, op: str) -> Optional[_Token]:
        if self.current.kind == "op" and self.current.text == op:
            return self._advance()
        return None

    def _expect(self, op: str) -> _Token:
        token = self._accept(op)
        if token is None:
            found = self.current.text or "end of input"
            raise ExprSyntaxError(f"Expected {op!r}, found {found!r}", self.current.position, self.text)
        return token

    def parse(self) -> Expr:
        if self.current.kind == "end":
            raise ExprSyntaxError("Empty expression", 0, self.text)
        e = self._expr()
        if self.current.kind != "end":
            raise ExprSyntaxError(f"Unexpected token {self.current.text!r}", self.current.position, self.text)
        return e

    def _expr(self) -> Expr:
        e = self._term()
        while True:
            if self._accept("+"):
                e = add(e, self._term())
            elif self._accept("-"):
                e = sub(e, self._term())
            else:
                return e

    def _term(self) -> Expr:
        e = self._unary()
        while True:
            if self._accept("*"):
                e = mul(e, self._unary())
            elif token := self._accept("/"):
                right = self._unary()
                try:
                    e = div(e, right)
                except ZeroDivisionError:
                    raise ExprSyntaxError("Division by the constant 0", token.position, self.text) from None
            else:
                return e

    def _unary(self) -> Expr:
        if self._accept("-"):
            return neg(self._unary())
        return self._factor()

    def _factor(self) -> Expr:
        base = self._base()
        if token := self._accept("^"):
            k = self._power()
            try:
                return int_pow(base, k)
            except ZeroDivisionError:
                raise ExprSyntaxError("Negative power of the constant 0", token.position, self.text) from None
        return base

    def _integer(self) -> int:
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            raise ExprSyntaxError(f"Exponent must be an integer literal, found {token.text or 'end of input'!r}", token.position, self.text)
        self._advance()
        return int(token.text)

    def _power(self) -> int:
        if self._accept("("):
            sign = -1 if self._accept("-") else 1
            k = sign * self._integer()
            self._expect(")")
            return k
        sign = -1 if self._accept("-") else 1
        return sign * self._integer()

    def _base(self) -> Expr:
        token = self.current
        if token.kind == "number":
            self._advance()
            return RealConst(Fraction(token.text))
        if token.kind == "ident":
            self._advance()
            return self._identifier(token)
        if self._accept("("):
            e = self._expr()
            self._expect(")")
            return e
        found = token.text or "end of input"
        raise ExprSyntaxError(f"Unexpected token {found!r}", token.position, self.text)

    def _identifier(self, token: _Token) -> Expr:
        name = token.text
        if name in FUNCTION_NAMES:
            self._expect("(")
            arg = self._expr()
            self._expect(")")
            return func(name, arg)
        if variable := _VARIABLE.fullmatch(name):
            index = int(variable.group(1))
            if index < 1 or index > self.arity:
                raise ArityError(f"Variable {name} at position {token.position} exceeds arity {self.arity}")
            return Var(index)
        if name in self.registry.names:
            return InfinitesimalConst(name)
        raise UnknownIdentifierError(f"Unknown identifier {name!r}", token.position, self.text)


def parse(text: str, arity: int, registry: GeneratorRegistry) -> Expr:
    """Parses an expression over variables x1..x{arity} and the registry's generators.

    Raises:
        ExprSyntaxError: malformed text, with the offending position.
        UnknownIdentifierError: identifier that is neither a function, a variable nor a generator.
        ArityError: variable index outside 1..arity.
    """
    if not isinstance(text, str):
        raise TypeError(f"text must be str. Got {type(text)}")
    if not isinstance(arity, int) or arity < 0:
        raise ValueError(f"arity must be a non-negative int. Got {arity}")
    return _Parser(text, arity, registry).parse()
