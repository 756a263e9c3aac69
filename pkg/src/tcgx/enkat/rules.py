"""String-generation rules: parse, bind and evaluate.

A rule is a whitespace-separated sequence of fragments, concatenated left to
right when evaluated::

    "const"             literal text ("\\"" and "\\\\" escapes)
    [col]               value of a table column in the selected row
    {menu:Name}         choice from an external menu
    {num:Prompt:unit}   numeric input, echoed in ``unit`` (unit optional)
    {str:Prompt}        string input
    $var                a variable saved earlier

Any fragment may be followed by ``=>$var`` to save its text.  After a rule
for column ``c`` is evaluated its whole output is also readable as ``$c``.
"""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from typing import Protocol

from ..errors import (
    ChoiceNotInMenu,
    InputExhausted,
    RuleSyntaxError,
    UnknownColumn,
    UnknownMenu,
    UnknownVariable,
    UnresolvedEmbeddedMenu,
)
from .units import UNITS


@dataclass(frozen=True)
class Const:
    text: str
    save_as: str | None = None


@dataclass(frozen=True)
class Field:
    key: str
    save_as: str | None = None


@dataclass(frozen=True)
class ExtMenu:
    name: str
    save_as: str | None = None


@dataclass(frozen=True)
class NumInput:
    prompt: str
    unit: str | None = None
    save_as: str | None = None


@dataclass(frozen=True)
class StrInput:
    prompt: str
    save_as: str | None = None


@dataclass(frozen=True)
class VarRead:
    name: str
    save_as: str | None = None


@dataclass(frozen=True)
class Rule:
    fragments: tuple = ()

    def __iter__(self):
        return iter(self.fragments)

    def __len__(self):
        return len(self.fragments)

    def to_text(self) -> str:
        return " ".join(_fragment_text(f) for f in self.fragments)


@dataclass
class RuleSet:
    """Rules keyed by TKD column, evaluated in declaration order."""

    rules: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.rules.items())

    def __len__(self):
        return len(self.rules)

    def __getitem__(self, key):
        return self.rules[key]

    def to_text(self) -> str:
        return "".join(f"{k} := {r.to_text()}\n" for k, r in self.rules.items())


# ------------------------------------------------------------------- parser

_NAME = re.compile(r"[^\W\d]\w*")


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fragment_text(f) -> str:
    if isinstance(f, Const):
        s = _quote(f.text)
    elif isinstance(f, Field):
        s = f"[{f.key}]"
    elif isinstance(f, ExtMenu):
        s = f"{{menu:{f.name}}}"
    elif isinstance(f, NumInput):
        s = f"{{num:{f.prompt}:{f.unit}}}" if f.unit else f"{{num:{f.prompt}}}"
    elif isinstance(f, StrInput):
        s = f"{{str:{f.prompt}}}"
    else:
        s = f"${f.name}"
    return s + (f"=>${f.save_as}" if f.save_as else "")


def _var_name(text, i):
    m = _NAME.match(text, i)
    if not m:
        raise RuleSyntaxError("expected variable name", i, text)
    return m.group(0), m.end()


def parse_rule(text: str) -> Rule:
    frags = []
    i, n = 0, len(text)
    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        c = text[i]
        start = i
        if c == '"':
            buf = []
            i += 1
            while True:
                if i >= n:
                    raise RuleSyntaxError("unterminated string", start, text)
                ch = text[i]
                if ch == "\\":
                    if i + 1 >= n or text[i + 1] not in '"\\':
                        raise RuleSyntaxError("bad escape", i, text)
                    buf.append(text[i + 1])
                    i += 2
                elif ch == '"':
                    i += 1
                    break
                else:
                    buf.append(ch)
                    i += 1
            frag = Const("".join(buf))
        elif c == "[":
            j = text.find("]", i)
            if j < 0:
                raise RuleSyntaxError("unclosed '['", start, text)
            key = text[i + 1:j].strip()
            if not key or "[" in key:
                raise RuleSyntaxError("bad column reference", start, text)
            frag = Field(key)
            i = j + 1
        elif c == "{":
            j = text.find("}", i)
            if j < 0:
                raise RuleSyntaxError("unclosed '{'", start, text)
            parts = text[i + 1:j].split(":")
            kind = parts[0].strip()
            if kind == "menu" and len(parts) == 2 and parts[1].strip():
                frag = ExtMenu(parts[1].strip())
            elif kind == "num" and len(parts) in (2, 3) and parts[1]:
                unit = parts[2].strip() if len(parts) == 3 else None
                if unit == "":
                    raise RuleSyntaxError("empty unit", start, text)
                frag = NumInput(parts[1], unit)
            elif kind == "str" and len(parts) == 2 and parts[1]:
                frag = StrInput(parts[1])
            else:
                raise RuleSyntaxError(f"unknown input form {text[i:j + 1]!r}", start, text)
            i = j + 1
        elif c == "$":
            name, i = _var_name(text, i + 1)
            frag = VarRead(name)
        else:
            raise RuleSyntaxError(f"unexpected character {c!r}", i, text)

        # optional save suffix
        k = i
        while k < n and text[k].isspace():
            k += 1
        if text.startswith("=>", k):
            k += 2
            while k < n and text[k].isspace():
                k += 1
            if k >= n or text[k] != "$":
                raise RuleSyntaxError("expected '$var' after '=>'", k, text)
            name, i = _var_name(text, k + 1)
            if isinstance(frag, VarRead) and frag.name == name:
                raise RuleSyntaxError(f"fragment reads and saves ${name}", start, text)
            frag = type(frag)(**{**frag.__dict__, "save_as": name})
        if i < n and not text[i].isspace():
            raise RuleSyntaxError("fragments must be separated by whitespace", i, text)
        frags.append(frag)
    return Rule(tuple(frags))


def parse_ruleset(lines, path=None) -> RuleSet:
    """Parse ``col := rule`` lines; blank lines and ``#`` comments skipped."""
    from ..errors import FormatError

    rs = RuleSet()
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if ":=" not in s:
            raise FormatError("expected 'column := rule'", path, lineno)
        key, body = s.split(":=", 1)
        key = key.strip()
        if not key or key in rs.rules:
            raise FormatError(f"bad or duplicate rule column {key!r}", path, lineno)
        try:
            rs.rules[key] = parse_rule(body)
        except RuleSyntaxError as exc:
            raise FormatError(str(exc), path, lineno) from exc
    return rs


# ------------------------------------------------------------------ binding

def bind_ruleset(rs: RuleSet, columns, menus) -> None:
    """Check every reference of ``rs`` against table columns and menus."""
    saved: set[str] = set()
    for col, rule in rs:
        for f in rule:
            if isinstance(f, Field) and f.key not in columns:
                raise UnknownColumn(f"rule {col!r} references unknown column [{f.key}]")
            if isinstance(f, ExtMenu) and f.name not in menus:
                raise UnknownMenu(f"rule {col!r} references unknown menu {f.name!r}")
            if isinstance(f, NumInput) and f.unit is not None:
                UNITS.get(f.unit)
            if isinstance(f, VarRead) and f.name not in saved:
                raise UnknownVariable(f"rule {col!r} reads ${f.name} before it is saved")
            if f.save_as:
                if f.save_as in rs.rules:
                    raise UnknownVariable(f"variable ${f.save_as} shadows a rule column")
                saved.add(f.save_as)
        saved.add(col)


# --------------------------------------------------------------- evaluation

class InputProvider(Protocol):
    def choose(self, menu: str, options: list[str]) -> str: ...

    def number(self, prompt: str, unit: str | None) -> str: ...

    def text(self, prompt: str) -> str: ...


class ScriptedInput:
    """Answers taken in order from a fixed list."""

    def __init__(self, answers):
        self.answers = [str(a) for a in answers]
        self.pos = 0

    def _next(self, what):
        if self.pos >= len(self.answers):
            raise InputExhausted(f"no scripted answer left for {what}")
        a = self.answers[self.pos]
        self.pos += 1
        return a

    def choose(self, menu, options):
        return self._next(f"menu {menu!r}")

    def number(self, prompt, unit):
        return self._next(f"number {prompt!r}")

    def text(self, prompt):
        return self._next(f"text {prompt!r}")


class ConsoleInput:
    def __init__(self, stdin=None, stderr=None):
        self.stdin = stdin or sys.stdin
        self.stderr = stderr or sys.stderr

    def _ask(self, prompt):
        self.stderr.write(prompt)
        self.stderr.flush()
        line = self.stdin.readline()
        if not line:
            raise InputExhausted("end of input")
        return line.rstrip("\n")

    def choose(self, menu, options):
        return self._ask(f"{menu} [{' | '.join(options)}]: ")

    def number(self, prompt, unit):
        return self._ask(f"{prompt}{', ' + unit if unit else ''}: ")

    def text(self, prompt):
        return self._ask(f"{prompt}: ")


def format_number(v: float) -> str:
    s = format(float(v), ".12g")
    return "0" if s == "-0" else s


def parse_number_answer(answer: str, unit: str | None) -> float:
    """``"3.5"`` or ``"0.35 cm"``; a trailing unit is converted to ``unit``."""
    s = answer.strip().replace(",", ".")
    m = re.fullmatch(r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*)", s)
    if not m:
        raise ValueError(f"not a number: {answer!r}")
    v = float(m.group(1))
    given = m.group(2).strip()
    if given:
        if unit is None:
            raise ValueError(f"unexpected unit {given!r} in {answer!r}")
        v = UNITS.convert(v, given, unit)
    return v


class Menu(tuple):
    """Embedded menu cell: the admissible options of one table cell."""

    def __repr__(self):
        return "Menu(" + "|".join(self) + ")"


def eval_rule(rule: Rule, row: dict, menus: dict, provider, variables: dict) -> str:
    out = []
    for f in rule:
        if isinstance(f, Const):
            s = f.text
        elif isinstance(f, Field):
            if f.key not in row:
                raise UnknownColumn(f"unknown column [{f.key}]")
            v = row[f.key]
            if isinstance(v, Menu):
                raise UnresolvedEmbeddedMenu(f"cell [{f.key}] is an unresolved menu {v!r}")
            s = "" if v is None else (format_number(v) if isinstance(v, float) else str(v))
        elif isinstance(f, ExtMenu):
            if f.name not in menus:
                raise UnknownMenu(f"unknown menu {f.name!r}")
            options = list(menus[f.name])
            s = provider.choose(f.name, options)
            if s not in options:
                raise ChoiceNotInMenu(f"{s!r} is not an option of menu {f.name!r}")
        elif isinstance(f, NumInput):
            s = format_number(parse_number_answer(provider.number(f.prompt, f.unit), f.unit))
        elif isinstance(f, StrInput):
            s = provider.text(f.prompt)
        else:
            if f.name not in variables:
                raise UnknownVariable(f"${f.name} read before it is saved")
            s = variables[f.name]
        if f.save_as:
            variables[f.save_as] = s
        out.append(s)
    return "".join(out)


def eval_rules(rs: RuleSet, row: dict, menus: dict, provider) -> tuple[dict, dict]:
    variables: dict[str, str] = {}
    out = {}
    for col, rule in rs:
        out[col] = eval_rule(rule, row, menus, provider, variables)
        variables[col] = out[col]
    return out, variables
