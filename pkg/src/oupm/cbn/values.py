"""Ground variables, objects and value formatting."""

from __future__ import annotations

from typing import NamedTuple, Tuple

QUERY = "?query"


class Obj(NamedTuple):
    """An object of a user type.

    ``key`` is the symbol name for guaranteed objects and a positive index for
    generated ones.  Generated objects of a type are numbered 1..n where n is
    the value of the type's number variable.
    """
    type: str
    key: object

    def __str__(self) -> str:
        if isinstance(self.key, int):
            return f"{self.type}[{self.key}]"
        return str(self.key)

    @property
    def generated(self) -> bool:
        return isinstance(self.key, int)


class Var(NamedTuple):
    """A ground random variable: a function applied to argument values.

    Number variables use the function name ``#Type`` and no arguments.
    Query pseudo-nodes use :data:`QUERY` with the query index as argument.
    """
    func: str
    args: Tuple = ()

    def __str__(self) -> str:
        if self.func == QUERY:
            return f"query[{self.args[0]}]"
        if not self.args:
            return self.func
        return f"{self.func}({', '.join(fmt(a) for a in self.args)})"

    @property
    def is_number(self) -> bool:
        return self.func[0] == "#"

    @property
    def is_query(self) -> bool:
        return self.func == QUERY


def query_node(i: int) -> Var:
    return Var(QUERY, (i,))


def number_var(type_name: str) -> Var:
    return Var("#" + type_name, ())


def fmt(v) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
