"""
Scalar coefficient expressions for material properties and boundary curves.

Grammar (recursive descent, lowest precedence first):

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := primary ('^' exponent)?
    exponent := '-' exponent | power
    primary  := number | 'x' | 'y' | func '(' expr ')' | '(' expr ')'

The exponent of '^' must not depend on x or y.
"""
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Set, Union

import numpy as np

from chebfem.common.exceptions import ExpressionEvalError, ExpressionSyntaxError

FUNCTIONS = ('exp', 'sin', 'cos', 'sqrt', 'log')
VARIABLES = ('x', 'y')


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: 'ExprAst'


@dataclass(frozen=True)
class BinOp:
    op: str
    left: 'ExprAst'
    right: 'ExprAst'


@dataclass(frozen=True)
class Call:
    func: str
    arg: 'ExprAst'


ExprAst = Union[Const, Var, Neg, BinOp, Call]

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


class _Token:
    __slots__ = ('kind', 'text', 'offset')

    def __init__(self, kind: str, text: str, offset: int):
        self.kind = kind
        self.text = text
        self.offset = offset


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode('utf-8'))


def _tokenize(text: str) -> List[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(text, _byte_offset(text, pos), 'unexpected character %r' % text[pos])
        kind = m.lastgroup
        if kind != 'ws':
            tokens.append(_Token(kind, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(_Token('end', '', _byte_offset(text, len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def current(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, reason: str, token: _Token = None):
        token = token or self.current
        raise ExpressionSyntaxError(self.text, token.offset, reason)

    def accept(self, *ops: str) -> bool:
        if self.current.kind == 'op' and self.current.text in ops:
            self.pos += 1
            return True
        return False

    def parse(self) -> ExprAst:
        node = self.expr()
        if self.current.kind != 'end':
            if self.current.text == ')':
                self.error('unbalanced closing parenthesis')
            self.error('unexpected token %r' % self.current.text)
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.current.kind == 'op' and self.current.text in '+-':
            op = self.current.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.unary()
        while self.current.kind == 'op' and self.current.text in '*/':
            op = self.current.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> ExprAst:
        if self.accept('-'):
            return Neg(self.unary())
        return self.power()

    def power(self) -> ExprAst:
        base = self.primary()
        if self.current.kind == 'op' and self.current.text == '^':
            self.pos += 1
            start = self.current
            exponent = self.exponent()
            if not is_constant(exponent):
                self.error('exponent must not depend on x or y', start)
            return BinOp('^', base, exponent)
        return base

    def exponent(self) -> ExprAst:
        if self.accept('-'):
            return Neg(self.exponent())
        return self.power()

    def primary(self) -> ExprAst:
        token = self.current
        if token.kind == 'number':
            self.pos += 1
            return Const(float(token.text))
        if token.kind == 'name':
            self.pos += 1
            if token.text in VARIABLES:
                return Var(token.text)
            if token.text in FUNCTIONS:
                if not self.accept('('):
                    self.error('expected ( after %s' % token.text)
                arg = self.expr()
                if not self.accept(')'):
                    self.error('unbalanced parenthesis, expected )')
                return Call(token.text, arg)
            self.error('unknown identifier %r' % token.text, token)
        if self.accept('('):
            node = self.expr()
            if not self.accept(')'):
                self.error('unbalanced parenthesis, expected )')
            return node
        if token.kind == 'end':
            self.error('unexpected end of expression')
        self.error('dangling operator %r' % token.text)


def parse_expr(text: str) -> ExprAst:
    if isinstance(text, bytes):
        text = text.decode('utf-8')
    return _Parser(text).parse()


def is_constant(ast: ExprAst) -> bool:
    return len(variables(ast)) == 0


def variables(ast: ExprAst) -> Set[str]:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Const):
        return set()
    if isinstance(ast, Neg):
        return variables(ast.operand)
    if isinstance(ast, Call):
        return variables(ast.arg)
    return variables(ast.left) | variables(ast.right)


def to_text(ast: ExprAst) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(ast, Const):
        return repr(float(ast.value))
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Neg):
        return '(-%s)' % to_text(ast.operand)
    if isinstance(ast, Call):
        return '%s(%s)' % (ast.func, to_text(ast.arg))
    return '(%s%s%s)' % (to_text(ast.left), ast.op, to_text(ast.right))


def _fail(reason: str, mask, x, y):
    # report the first offending sample
    shape = np.broadcast(np.asarray(x), np.asarray(y), np.asarray(mask)).shape
    first = tuple(np.argwhere(np.broadcast_to(mask, shape))[0])
    px = np.broadcast_to(np.asarray(x, dtype=np.float64), shape)[first]
    py = np.broadcast_to(np.asarray(y, dtype=np.float64), shape)[first]
    raise ExpressionEvalError(reason, (float(px), float(py)))


def _eval(ast: ExprAst, x, y):
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        return x if ast.name == 'x' else y
    if isinstance(ast, Neg):
        return -_eval(ast.operand, x, y)
    if isinstance(ast, Call):
        arg = np.asarray(_eval(ast.arg, x, y), dtype=np.float64)
        if ast.func == 'log':
            bad = arg <= 0
            if np.any(bad):
                _fail('log of non-positive value', bad, x, y)
            return np.log(arg)
        if ast.func == 'sqrt':
            bad = arg < 0
            if np.any(bad):
                _fail('sqrt of negative value', bad, x, y)
            return np.sqrt(arg)
        return _SIMPLE_FUNCTIONS[ast.func](arg)
    left = np.asarray(_eval(ast.left, x, y), dtype=np.float64)
    right = np.asarray(_eval(ast.right, x, y), dtype=np.float64)
    if ast.op == '+':
        return left + right
    if ast.op == '-':
        return left - right
    if ast.op == '*':
        return left * right
    if ast.op == '/':
        bad = right == 0
        if np.any(bad):
            _fail('division by zero', bad, x, y)
        return left / right
    return _power(left, float(right), x, y)


def _power(base: np.ndarray, exponent: float, x, y):
    if float(exponent).is_integer():
        if exponent < 0:
            bad = base == 0
            if np.any(bad):
                _fail('division by zero in negative power', bad, x, y)
            return 1.0 / np.power(base, -int(exponent))
        return np.power(base, int(exponent))
    bad = base < 0
    if np.any(bad):
        _fail('negative base with non-integer exponent', bad, x, y)
    zero = base == 0
    if exponent < 0 and np.any(zero):
        _fail('division by zero in negative power', zero, x, y)
    safe = np.where(zero, 1.0, base)
    return np.where(zero, 0.0, np.exp(exponent * np.log(safe)))


_SIMPLE_FUNCTIONS: Dict[str, Callable] = {
    'exp': np.exp,
    'sin': np.sin,
    'cos': np.cos,
}


def eval_expr(ast: ExprAst, x, y):
    """
    Evaluates the expression at (x, y). x and y may be numpy arrays, the
    result then has their broadcast shape. Domain errors raise
    ExpressionEvalError instead of producing NaN, overflow included.
    """
    with np.errstate(over='ignore', invalid='ignore'):
        value = _eval(ast, x, y)
    bad = ~np.isfinite(value)
    if np.any(bad):
        _fail('non-finite result', bad, x, y)
    if np.ndim(value) == 0 and np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(value)
    return np.broadcast_to(np.asarray(value, dtype=np.float64), np.broadcast(np.asarray(x), np.asarray(y)).shape).copy()


class CoefficientFunction:
    """A parsed expression together with its source text."""

    def __init__(self, text: str):
        self.text = text
        self.ast = parse_expr(text)

    def __call__(self, x, y):
        return eval_expr(self.ast, x, y)

    def is_constant(self) -> bool:
        return is_constant(self.ast)

    def __str__(self):
        return self.text

    def __repr__(self):
        return 'CoefficientFunction(%r)' % self.text
