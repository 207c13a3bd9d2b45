"""Modelling language front end: parsing, checking and lowering."""

from __future__ import annotations

from .lower import Model, lower
from .parser import parse
from .printer import pretty
from .validate import TypedModel, validate


def load(source: str) -> Model:
    """Parse, validate and lower model source text."""
    return lower(validate(parse(source)))


def load_file(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        return load(fh.read())


__all__ = ["Model", "TypedModel", "load", "load_file", "lower", "parse", "pretty", "validate"]
