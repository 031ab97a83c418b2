"""Tokenizer, rule-matching parser and predicate evaluator for the SQL subset.

Grammar (keywords case-insensitive)::

    CREATE TABLE id ( id INT|VARCHAR {, id INT|VARCHAR} )
    DROP TABLE id
    INSERT INTO id VALUES ( const {, const} )
    UPDATE id SET id = const [WHERE pred]
    SELECT * | ref {, ref} FROM id [, id] [WHERE pred]

    pred  := term {AND term}
    term  := expr (= | <> | < | >) expr
    expr  := ref | const
    ref   := id [. id]
    const := [-]digits | "printable ascii without quotes"
"""

import enum
import operator
from dataclasses import dataclass

from .catalog import FieldType
from .errors import ExecutionError, InvalidQuery

KEYWORDS = frozenset({
    "CREATE", "TABLE", "DROP", "INSERT", "INTO", "VALUES", "UPDATE", "SET",
    "WHERE", "SELECT", "FROM", "AND", "INT", "VARCHAR",
})
DELIMITERS = frozenset({"*", ",", "=", "<>", "<", ">", "(", ")", "."})
COMPARISONS = ("=", "<>", "<", ">")

INT_MIN = -(2**31)
INT_MAX = 2**31 - 1

_OPS = {"=": operator.eq, "<>": operator.ne, "<": operator.lt, ">": operator.gt}


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    IDENTIFIER = "identifier"
    CONSTANT = "constant"
    DELIMITER = "delimiter"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    value: object = None  # keyword: upper-cased text; constant: int or str
    pos: int = 0


def _is_ident_start(ch):
    return ch == "_" or ("a" <= ch <= "z") or ("A" <= ch <= "Z")


def _is_ident_char(ch):
    return _is_ident_start(ch) or ("0" <= ch <= "9")


def _is_digit(ch):
    return "0" <= ch <= "9"


def is_string_char(ch):
    return " " <= ch <= "~" and ch != '"'


def tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
        elif _is_ident_start(ch):
            j = i + 1
            while j < n and _is_ident_char(text[j]):
                j += 1
            word = text[i:j]
            upper = word.upper()
            if upper in KEYWORDS:
                tokens.append(Token(TokenKind.KEYWORD, word, upper, i))
            else:
                tokens.append(Token(TokenKind.IDENTIFIER, word, word, i))
            i = j
        elif _is_digit(ch) or (ch == "-" and i + 1 < n and _is_digit(text[i + 1])):
            j = i + 1
            while j < n and _is_digit(text[j]):
                j += 1
            if j < n and _is_ident_char(text[j]):
                raise InvalidQuery(f"identifier cannot start with a digit at position {i}")
            value = int(text[i:j])
            if not INT_MIN <= value <= INT_MAX:
                raise InvalidQuery(f"integer out of range at position {i}")
            tokens.append(Token(TokenKind.CONSTANT, text[i:j], value, i))
            i = j
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if not is_string_char(text[j]):
                    raise InvalidQuery(f"illegal character in string at position {j}")
                j += 1
            if j >= n:
                raise InvalidQuery(f"unterminated string at position {i}")
            tokens.append(Token(TokenKind.CONSTANT, text[i : j + 1], text[i + 1 : j], i))
            i = j + 1
        elif text.startswith("<>", i):
            tokens.append(Token(TokenKind.DELIMITER, "<>", "<>", i))
            i += 2
        elif ch in DELIMITERS:
            tokens.append(Token(TokenKind.DELIMITER, ch, ch, i))
            i += 1
        else:
            raise InvalidQuery(f"illegal character {ch!r} at position {i}")
    return tokens


# --- query information -----------------------------------------------------

@dataclass(frozen=True)
class FieldRef:
    name: str
    table: str = None

    def __str__(self):
        return self.name if self.table is None else f"{self.table}.{self.name}"


@dataclass(frozen=True)
class Const:
    value: object  # int or str


@dataclass(frozen=True)
class Term:
    lhs: object  # FieldRef | Const
    op: str
    rhs: object


@dataclass(frozen=True)
class Predicate:
    terms: tuple = ()

    def __bool__(self):
        return bool(self.terms)


TRUE = Predicate()


@dataclass(frozen=True)
class CreateTable:
    table: str
    fields: tuple  # ((name, FieldType), ...)


@dataclass(frozen=True)
class DropTable:
    table: str


@dataclass(frozen=True)
class Insert:
    table: str
    values: tuple


@dataclass(frozen=True)
class Update:
    table: str
    set_field: str
    set_value: object
    where: Predicate = TRUE


@dataclass(frozen=True)
class Select:
    projection: tuple  # FieldRefs; empty tuple means *
    tables: tuple
    where: Predicate = TRUE

    @property
    def is_star(self):
        return not self.projection

    @property
    def is_join(self):
        return len(self.tables) == 2


# --- rule matching ---------------------------------------------------------

class _Cursor:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def fail(self, expected):
        tok = self.peek()
        if tok is None:
            raise InvalidQuery(f"expected {expected} at end of input")
        raise InvalidQuery(f"expected {expected}, found {tok.text!r} at position {tok.pos}")

    def at_keyword(self, word):
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.KEYWORD and tok.value == word

    def at_delim(self, sym):
        tok = self.peek()
        return tok is not None and tok.kind is TokenKind.DELIMITER and tok.value == sym

    def keyword(self, *words):
        tok = self.peek()
        if tok is None or tok.kind is not TokenKind.KEYWORD or tok.value not in words:
            self.fail(" or ".join(words))
        self.i += 1
        return tok.value

    def delim(self, sym):
        if not self.at_delim(sym):
            self.fail(repr(sym))
        self.i += 1

    def identifier(self, what="identifier"):
        tok = self.peek()
        if tok is None or tok.kind is not TokenKind.IDENTIFIER:
            self.fail(what)
        self.i += 1
        return tok.value

    def constant(self):
        tok = self.peek()
        if tok is None or tok.kind is not TokenKind.CONSTANT:
            self.fail("constant")
        self.i += 1
        return tok.value

    def end(self):
        if self.peek() is not None:
            self.fail("end of statement")


def _field_ref(cur):
    first = cur.identifier("field name")
    if cur.at_delim("."):
        cur.i += 1
        return FieldRef(cur.identifier("field name"), first)
    return FieldRef(first)


def _expression(cur):
    tok = cur.peek()
    if tok is not None and tok.kind is TokenKind.CONSTANT:
        cur.i += 1
        return Const(tok.value)
    if tok is not None and tok.kind is TokenKind.IDENTIFIER:
        return _field_ref(cur)
    cur.fail("field name or constant")


def _term(cur):
    lhs = _expression(cur)
    tok = cur.peek()
    if tok is None or tok.kind is not TokenKind.DELIMITER or tok.value not in COMPARISONS:
        cur.fail("comparison operator")
    cur.i += 1
    return Term(lhs, tok.value, _expression(cur))


def _predicate(cur):
    terms = [_term(cur)]
    while cur.at_keyword("AND"):
        cur.i += 1
        terms.append(_term(cur))
    return Predicate(tuple(terms))


def _where(cur):
    if cur.at_keyword("WHERE"):
        cur.i += 1
        return _predicate(cur)
    return TRUE


def _create(cur):
    cur.keyword("TABLE")
    table = cur.identifier("table name")
    cur.delim("(")
    fields = []
    while True:
        name = cur.identifier("field name")
        ftype = FieldType(cur.keyword("INT", "VARCHAR"))
        fields.append((name, ftype))
        if not cur.at_delim(","):
            break
        cur.i += 1
    cur.delim(")")
    names = [n for n, _ in fields]
    if len(set(names)) != len(names):
        raise InvalidQuery(f"duplicate field name in table {table}")
    return CreateTable(table, tuple(fields))


def _drop(cur):
    cur.keyword("TABLE")
    return DropTable(cur.identifier("table name"))


def _insert(cur):
    cur.keyword("INTO")
    table = cur.identifier("table name")
    cur.keyword("VALUES")
    cur.delim("(")
    values = [cur.constant()]
    while cur.at_delim(","):
        cur.i += 1
        values.append(cur.constant())
    cur.delim(")")
    return Insert(table, tuple(values))


def _update(cur):
    table = cur.identifier("table name")
    cur.keyword("SET")
    field = cur.identifier("field name")
    cur.delim("=")
    value = cur.constant()
    return Update(table, field, value, _where(cur))


def _select(cur):
    projection = []
    if cur.at_delim("*"):
        cur.i += 1
    else:
        projection.append(_field_ref(cur))
        while cur.at_delim(","):
            cur.i += 1
            projection.append(_field_ref(cur))
    cur.keyword("FROM")
    tables = [cur.identifier("table name")]
    if cur.at_delim(","):
        cur.i += 1
        tables.append(cur.identifier("table name"))
    return Select(tuple(projection), tuple(tables), _where(cur))


_RULES = {
    "CREATE": _create,
    "DROP": _drop,
    "INSERT": _insert,
    "UPDATE": _update,
    "SELECT": _select,
}


def parse(text):
    cur = _Cursor(tokenize(text), text)
    head = cur.keyword(*_RULES)
    stmt = _RULES[head](cur)
    cur.end()
    return stmt


def parse_predicate(tokens):
    """Parse a token list that holds exactly one predicate."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    cur = _Cursor(list(tokens), None)
    pred = _predicate(cur)
    cur.end()
    return pred


# --- evaluation ------------------------------------------------------------

def _operand(expr, binding):
    if isinstance(expr, Const):
        return expr.value
    key = str(expr)
    try:
        return binding[key]
    except KeyError:
        raise ExecutionError(f"unknown column: {key}") from None


def compare(op, left, right):
    if type(left) is not type(right):
        raise ExecutionError(f"type mismatch: cannot compare {left!r} with {right!r}")
    return _OPS[op](left, right)


def eval_predicate(pred, binding):
    """Evaluate a conjunction against a name -> value mapping.

    Qualified references look up ``"table.field"`` keys. Every term is
    evaluated, so errors surface regardless of term order.
    """
    result = True
    for term in pred.terms:
        if not compare(term.op, _operand(term.lhs, binding), _operand(term.rhs, binding)):
            result = False
    return result


# --- canonical rendering ---------------------------------------------------

def render_constant(value):
    return str(value) if isinstance(value, int) else f'"{value}"'


def _render_expr(expr):
    return render_constant(expr.value) if isinstance(expr, Const) else str(expr)


def render_predicate(pred):
    return " AND ".join(
        f"{_render_expr(t.lhs)} {t.op} {_render_expr(t.rhs)}" for t in pred.terms
    )


def _render_where(pred):
    return f" WHERE {render_predicate(pred)}" if pred else ""


def render(stmt):
    if isinstance(stmt, CreateTable):
        cols = ", ".join(f"{name} {ftype.value}" for name, ftype in stmt.fields)
        return f"CREATE TABLE {stmt.table} ({cols})"
    if isinstance(stmt, DropTable):
        return f"DROP TABLE {stmt.table}"
    if isinstance(stmt, Insert):
        return f"INSERT INTO {stmt.table} VALUES ({', '.join(map(render_constant, stmt.values))})"
    if isinstance(stmt, Update):
        return (f"UPDATE {stmt.table} SET {stmt.set_field} = "
                f"{render_constant(stmt.set_value)}{_render_where(stmt.where)}")
    if isinstance(stmt, Select):
        proj = ", ".join(map(str, stmt.projection)) if stmt.projection else "*"
        return f"SELECT {proj} FROM {', '.join(stmt.tables)}{_render_where(stmt.where)}"
    raise TypeError(f"not a statement: {stmt!r}")
