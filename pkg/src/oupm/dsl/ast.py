"""Syntax tree for the modelling language.

Every node carries a source location that is ignored by equality, so two
trees parsed from differently formatted text compare equal when they mean
the same program.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union


@dataclass(frozen=True)
class Loc:
    line: int
    col: int


def _loc():
    return field(default=None, compare=False, repr=False)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: object  # int, float, bool or None (null)
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Name:
    id: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class Call:
    func: str
    args: Tuple["Expr", ...]
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class UnOp:
    op: str
    operand: "Expr"
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class SetOf:
    """Implicit set ``{Type var}`` of all objects of a type."""
    type: str
    var: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ListLit:
    items: Tuple["Expr", ...]
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class MapLit:
    items: Tuple[Tuple["Expr", "Expr"], ...]
    loc: Optional[Loc] = _loc()


Expr = Union[Lit, Name, Call, BinOp, UnOp, SetOf, ListLit, MapLit]


# -- dependency trees --------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    dist: str
    params: Tuple[Expr, ...]
    args: Optional[Tuple[Expr, ...]]
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class IfTree:
    cond: Expr
    then: "Tree"
    orelse: Optional["Tree"]  # None: value is null with probability one
    loc: Optional[Loc] = _loc()


Tree = Union[Leaf, IfTree]


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class TypeDecl:
    name: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class GuaranteedDecl:
    type: str
    symbols: Tuple[str, ...]
    count: Optional[int] = None  # ``Draw Draw[10]``: symbols == ("Draw",), count == 10
    loc: Optional[Loc] = _loc()

    def expand(self) -> Tuple[str, ...]:
        if self.count is None:
            return self.symbols
        return tuple(f"{self.symbols[0]}{i}" for i in range(1, self.count + 1))


@dataclass(frozen=True)
class OriginFuncDecl:
    ret_type: str
    name: str
    arg_type: str
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class RandomFuncDecl:
    ret_type: str
    name: str
    arg_types: Tuple[str, ...]
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class NumberStmt:
    type: str
    bindings: Tuple[Tuple[str, str], ...]  # (origin function, bound variable)
    tree: Tree
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class DependencyStmt:
    func: str
    params: Tuple[str, ...]
    tree: Tree
    loc: Optional[Loc] = _loc()


@dataclass(frozen=True)
class ObsStmt:
    """Either ``obs term = value`` or set evidence ``obs {Type v} = {s1, ...}``."""
    term: Optional[Expr] = None
    value: Optional[Expr] = None
    set_type: Optional[str] = None
    set_var: Optional[str] = None
    set_symbols: Tuple[str, ...] = ()
    loc: Optional[Loc] = _loc()

    @property
    def is_set(self) -> bool:
        return self.set_type is not None


@dataclass(frozen=True)
class QueryStmt:
    term: Expr
    loc: Optional[Loc] = _loc()


Decl = Union[TypeDecl, GuaranteedDecl, OriginFuncDecl, RandomFuncDecl,
             NumberStmt, DependencyStmt, ObsStmt, QueryStmt]


@dataclass(frozen=True)
class Ast:
    declarations: Tuple[Decl, ...] = ()

    def of(self, kind):
        return [d for d in self.declarations if isinstance(d, kind)]
