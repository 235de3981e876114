# corrpus/update_dsl.py
"""
The restricted code dialect of update programs.

Programs are read line by line. Each line is parsed with :mod:`ast` and the
resulting tree is checked against the handful of forms the dialect allows;
nothing is ever compiled or executed. Problems that only affect one line are
recorded as faults on the program (or on the evaluation) and the offending
statement is skipped.
"""
import ast
import enum
import json
import keyword
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .choices import PromptStyle
from .exceptions import CorrpusError
from .world_model import (
    BABI_TASK2,
    RE3_CHARACTER,
    AttributeKind,
    KindMismatch,
    UnknownAttribute,
    UnknownEntity,
    Unanswerable,
    WorldError,
)

logger = logging.getLogger(__name__)

METHOD_INDENT = ' ' * 4
BODY_INDENT = ' ' * 8
QUESTION_MARKER = 'Question:'
ANSWER_FUNCTION = 'answer'
STORY_FUNCTION = 'story'

DEF_LINE = re.compile(r'def\s+([A-Za-z0-9_]+)\s*\(\s*self\s*\)\s*:\s*(?:#.*)?$')
CALL_THROUGH = re.compile(r'self\.([A-Za-z0-9_]+)\(\s*\)\s*(?:#.*)?$')
STRUCTURE = re.compile(
    r'(class|def|import|from|if|elif|else|for|while|with|return|try|except|finally'
    r'|lambda|global|nonlocal|async|await|yield|raise|del|assert)\b'
)


class ProgramSyntaxError(CorrpusError):
    """Unrecoverable structure, such as a string literal that never ends."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message)


class CallError(CorrpusError):
    pass


class UnknownFunction(CallError):
    pass


class ArityError(CallError):
    pass


class FaultKind(str, enum.Enum):
    SYNTAX = 'syntax'
    UNSUPPORTED = 'unsupported-statement'
    UNEXPECTED_STRUCTURE = 'unexpected-structure'
    UNKNOWN_ENTITY = 'unknown-entity'
    UNKNOWN_ATTRIBUTE = 'unknown-attribute'
    KIND_MISMATCH = 'kind-mismatch'
    UNKNOWN_FUNCTION = 'unknown-function'
    ARITY = 'arity'
    STATE_ERROR = 'state-error'
    AUTO_DECLARED = 'auto-declared'
    UNCALLED_FUNCTION = 'uncalled-function'
    UNSET_VALUE = 'unset-value'


@dataclass(frozen=True)
class Fault:
    kind: FaultKind
    message: str
    line: int | None = None
    # False for notes about statements that still took effect.
    skipped: bool = True

    def __str__(self):
        where = f"L{self.line} " if self.line is not None else ''
        return f"{where}{self.kind.value}: {self.message}"


# -- values -----------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: str | None

    def render(self, bare=False):
        if self.value is None:
            return 'None'
        if bare and self.value.isidentifier() and not keyword.iskeyword(self.value):
            return self.value
        return json.dumps(self.value, ensure_ascii=False)


@dataclass(frozen=True)
class PathRef:
    entity: str
    attribute: str | None = None

    def render(self, bare=False):
        if self.attribute is None:
            return f"self.{self.entity}"
        return f"self.{self.entity}.{self.attribute}"


# -- statements -------------------------------------------------------------

@dataclass(frozen=True)
class ScalarAssign:
    path: PathRef
    value: Literal | PathRef
    line: int = field(default=0, compare=False)

    def render(self):
        return f"{self.path.render()} = {self.value.render()}"


@dataclass(frozen=True)
class ListAppend:
    path: PathRef
    value: Literal | PathRef
    line: int = field(default=0, compare=False)

    def render(self):
        return f"{self.path.render()}.append({self.value.render()})"


@dataclass(frozen=True)
class ListRemove:
    path: PathRef
    value: Literal | PathRef
    line: int = field(default=0, compare=False)

    def render(self):
        return f"{self.path.render()}.remove({self.value.render()})"


@dataclass(frozen=True)
class MapAssign:
    path: PathRef
    key: str
    value: Literal | PathRef
    line: int = field(default=0, compare=False)

    def render(self):
        key = json.dumps(self.key, ensure_ascii=False)
        return f"{self.path.render()}[{key}] = {self.value.render()}"


@dataclass(frozen=True)
class AbstractCall:
    function: str
    args: tuple = ()
    kwargs: tuple = ()
    method: bool = False
    line: int = field(default=0, compare=False)

    def render(self):
        parts = [value.render() for value in self.args]
        parts += [f"{name}={value.render(bare=True)}" for name, value in self.kwargs]
        prefix = 'self.' if self.method else ''
        return f"{prefix}{self.function}({', '.join(parts)})"


@dataclass(frozen=True)
class Print:
    expr: Literal | PathRef
    line: int = field(default=0, compare=False)

    def render(self):
        return f"print({self.expr.render()})"


@dataclass(frozen=True)
class Pass:
    line: int = field(default=0, compare=False)

    def render(self):
        return 'pass'


@dataclass
class Group:
    label: str
    statements: list = field(default_factory=list)


@dataclass
class UpdateProgram:
    groups: list = field(default_factory=list)
    trailing: list = field(default_factory=list)
    trailing_label: str | None = None
    faults: list = field(default_factory=list, compare=False)

    @property
    def accepted(self):
        return not self.faults

    def statements(self):
        for group in self.groups:
            yield from group.statements
        yield from self.trailing


def trailing_label_for(style, query):
    """The marker that opens the trailing section of a program answering ``query``."""
    if not query:
        return None
    if PromptStyle(style) is PromptStyle.SPECIFIC_FUNCTIONS:
        return ANSWER_FUNCTION
    return f"{QUESTION_MARKER} {query}"


# -- parsing ----------------------------------------------------------------

class _Reject(Exception):
    def __init__(self, kind, message):
        self.kind = kind
        super().__init__(message)


def _is_unterminated(exc):
    message = (exc.msg or '').lower()
    return 'unterminated' in message or 'while scanning' in message


class _ProgramParser:
    def __init__(self, style, preset):
        self.style = style
        self.preset = preset
        self.program = UpdateProgram()
        self.current = None
        self.calls = []
        self.definitions = []

    def fault(self, kind, message, line):
        self.program.faults.append(Fault(kind, message, line))

    def feed(self, number, raw):
        text = raw.strip()
        if not text:
            return
        if self.style is PromptStyle.SPECIFIC_FUNCTIONS:
            if self._feed_function_block(number, text):
                return
        elif text.startswith('##'):
            self._open_section(text[2:].strip())
            return
        if text.startswith('#'):
            return
        if STRUCTURE.match(text):
            self.fault(FaultKind.UNEXPECTED_STRUCTURE, f"not part of an update program: {text}", number)
            return
        for statement in self._statements(number, text):
            if self.current is None:
                if self.style is PromptStyle.SPECIFIC_FUNCTIONS:
                    self.fault(FaultKind.UNEXPECTED_STRUCTURE, 'statement outside a function block', number)
                    continue
                group = Group('')
                self.program.groups.append(group)
                self.current = group.statements
            self.current.append(statement)

    def _open_section(self, label):
        if label.startswith(QUESTION_MARKER):
            self.program.trailing_label = label
            self.current = self.program.trailing
        else:
            group = Group(label)
            self.program.groups.append(group)
            self.current = group.statements

    def _feed_function_block(self, number, text):
        match = DEF_LINE.match(text)
        if match:
            name = match[1]
            if name == STORY_FUNCTION:
                self.current = None
            elif name == ANSWER_FUNCTION:
                self.program.trailing_label = ANSWER_FUNCTION
                self.current = self.program.trailing
            else:
                group = Group(name)
                self.program.groups.append(group)
                self.definitions.append((group, number))
                self.current = group.statements
            return True
        call = CALL_THROUGH.match(text) if self.current is None else None
        if call:
            self.calls.append(call[1])
        return call is not None

    def finish(self):
        if self.style is PromptStyle.SPECIFIC_FUNCTIONS and self.calls:
            self._order_by_calls()
        return self.program

    def _order_by_calls(self):
        # Sentence functions run in the order story() calls them.
        order = {}
        for name in self.calls:
            order.setdefault(name, len(order))
        called = []
        for group, line in self.definitions:
            if group.label in order:
                called.append(group)
            else:
                self.fault(FaultKind.UNCALLED_FUNCTION, f"story() never calls {group.label}()", line)
        called.sort(key=lambda group: order[group.label])
        self.program.groups = called

    def _statements(self, number, text):
        try:
            module = ast.parse(text, mode='exec')
        except SyntaxError as exc:
            if _is_unterminated(exc):
                raise ProgramSyntaxError(f"line {number}: {exc.msg}", line=number) from exc
            self.fault(FaultKind.SYNTAX, f"{exc.msg}: {text}", number)
            return []
        statements = []
        for node in module.body:
            try:
                statements.append(self._statement(node, number))
            except _Reject as reject:
                self.fault(reject.kind, str(reject), number)
        return statements

    def _statement(self, node, line):
        if isinstance(node, ast.Pass):
            return Pass(line=line)
        if isinstance(node, ast.Assign):
            if len(node.targets) != 1:
                raise _Reject(FaultKind.UNSUPPORTED, 'chained assignment')
            target = node.targets[0]
            if isinstance(target, ast.Subscript):
                path = self._attribute_path(target.value)
                self._check_attribute(path, AttributeKind.MAP)
                key = target.slice
                if not (isinstance(key, ast.Constant) and isinstance(key.value, str)):
                    raise _Reject(FaultKind.UNSUPPORTED, 'map keys must be string literals')
                value = self._value(node.value)
                if value == Literal(None):
                    raise _Reject(FaultKind.KIND_MISMATCH, 'map values must be text')
                return MapAssign(path, key.value, value, line=line)
            path = self._attribute_path(target)
            self._check_attribute(path, AttributeKind.SCALAR)
            return ScalarAssign(path, self._value(node.value), line=line)
        if isinstance(node, ast.Expr) and isinstance(node.value, ast.Call):
            return self._call(node.value, line)
        raise _Reject(FaultKind.UNSUPPORTED, f"unsupported statement {type(node).__name__}")

    def _call(self, call, line):
        func = call.func
        if isinstance(func, ast.Name) and func.id == 'print':
            if len(call.args) != 1 or call.keywords:
                raise _Reject(FaultKind.UNSUPPORTED, 'print takes exactly one argument')
            return Print(self._value(call.args[0]), line=line)
        if isinstance(func, ast.Attribute) and func.attr in ('append', 'remove') and _depth(func.value) == 2:
            path = self._attribute_path(func.value)
            self._check_attribute(path, AttributeKind.LIST)
            if len(call.args) != 1 or call.keywords:
                raise _Reject(FaultKind.UNSUPPORTED, f"{func.attr} takes exactly one argument")
            value = self._value(call.args[0])
            if value == Literal(None):
                raise _Reject(FaultKind.KIND_MISMATCH, 'list values must be text')
            statement = ListAppend if func.attr == 'append' else ListRemove
            return statement(path, value, line=line)
        if self.style is not PromptStyle.ABSTRACT_FUNCTIONS:
            raise _Reject(FaultKind.UNSUPPORTED, f"function calls are not part of the {self.style} dialect")
        args = tuple(self._value(arg) for arg in call.args)
        kwargs = []
        for item in call.keywords:
            if item.arg is None:
                raise _Reject(FaultKind.UNSUPPORTED, '**kwargs are not part of the dialect')
            kwargs.append((item.arg, self._value(item.value)))
        if isinstance(func, ast.Name):
            return AbstractCall(func.id, args, tuple(kwargs), method=False, line=line)
        if isinstance(func, ast.Attribute) and isinstance(func.value, ast.Name) and func.value.id == 'self':
            return AbstractCall(func.attr, args, tuple(kwargs), method=True, line=line)
        raise _Reject(FaultKind.UNSUPPORTED, 'unsupported call')

    def _attribute_path(self, node):
        path = _path(node)
        if path is None or path.attribute is None:
            raise _Reject(FaultKind.UNSUPPORTED, 'targets must be self.<entity>.<attribute>')
        return path

    def _check_attribute(self, path, expected):
        kinds = self.preset.attribute_kinds(path.attribute)
        if not kinds:
            raise _Reject(FaultKind.UNKNOWN_ATTRIBUTE, f"no schema declares {path.attribute!r}")
        if expected not in kinds:
            found = ', '.join(sorted(kind.value for kind in kinds))
            raise _Reject(FaultKind.KIND_MISMATCH, f"{path.attribute!r} is {found}, not {expected.value}")

    def _value(self, node):
        if isinstance(node, ast.Constant):
            value = node.value
            if value is None or isinstance(value, str):
                return Literal(value)
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return Literal(str(value))
            raise _Reject(FaultKind.UNSUPPORTED, f"unsupported literal {value!r}")
        if isinstance(node, ast.Name):
            # Bare identifiers (destination=bedroom) read as text.
            return Literal(node.id)
        path = _path(node)
        if path is not None:
            return path
        raise _Reject(FaultKind.UNSUPPORTED, 'values are literals, identifiers or self paths')


def _depth(node):
    depth = 0
    while isinstance(node, ast.Attribute):
        depth += 1
        node = node.value
    return depth if isinstance(node, ast.Name) and node.id == 'self' else -1


def _path(node):
    names = []
    while isinstance(node, ast.Attribute):
        names.append(node.attr)
        node = node.value
    if not (isinstance(node, ast.Name) and node.id == 'self') or not 1 <= len(names) <= 2:
        return None
    names.reverse()
    return PathRef(*names)


def _parse_answer(source):
    program = UpdateProgram()
    for number, raw in enumerate(source.split('\n'), start=1):
        answer = raw.strip()
        if answer:
            program.trailing.append(Print(Literal(answer), line=number))
            break
    return program


def parse_program(source, style, preset):
    """Parse ``source`` written in ``style`` into a validated UpdateProgram."""
    style = PromptStyle(style)
    if style is PromptStyle.NATURAL_LANGUAGE:
        return _parse_answer(source)
    parser = _ProgramParser(style, preset)
    for number, raw in enumerate(source.split('\n'), start=1):
        parser.feed(number, raw)
    program = parser.finish()
    if program.faults:
        logger.debug('parsed program with %d fault(s)', len(program.faults))
    return program


def pretty_print(program, style):
    """Canonical text of ``program``; parsing it gives the program back."""
    style = PromptStyle(style)
    if style is PromptStyle.NATURAL_LANGUAGE:
        return ''.join(
            f"{statement.expr.value}\n" for statement in program.trailing
            if isinstance(statement, Print) and isinstance(statement.expr, Literal)
        )
    lines = []
    if style is PromptStyle.SPECIFIC_FUNCTIONS:
        blocks = [(group.label, group.statements) for group in program.groups]
        if program.trailing:
            blocks.append((ANSWER_FUNCTION, program.trailing))
        lines.extend(f"{BODY_INDENT}self.{label}()" for label, _ in blocks)
        for label, statements in blocks:
            lines.append('')
            lines.append(f"{METHOD_INDENT}def {label}(self):")
            lines.extend(BODY_INDENT + statement.render() for statement in statements)
    else:
        for group in program.groups:
            lines.append(f"{BODY_INDENT}## {group.label}".rstrip())
            lines.extend(BODY_INDENT + statement.render() for statement in group.statements)
        if program.trailing:
            lines.append(f"{BODY_INDENT}## {program.trailing_label or QUESTION_MARKER}")
            lines.extend(BODY_INDENT + statement.render() for statement in program.trailing)
    return '\n'.join(lines) + '\n' if lines else ''


def dump_ast(program):
    """Line-oriented rendering of a parsed program, stable across runs."""
    lines = []
    for index, group in enumerate(program.groups, start=1):
        lines.append(f"group {index} {json.dumps(group.label, ensure_ascii=False)}")
        lines.extend(_dump_statement(statement) for statement in group.statements)
    if program.trailing or program.trailing_label:
        lines.append(f"trailing {json.dumps(program.trailing_label, ensure_ascii=False)}")
        lines.extend(_dump_statement(statement) for statement in program.trailing)
    lines.extend(f"fault {fault}" for fault in program.faults)
    return '\n'.join(lines) + '\n' if lines else ''


def _dump_statement(statement):
    return f"  L{statement.line} {type(statement).__name__} {statement.render()}"


# -- abstract functions -----------------------------------------------------

@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple
    recipe: Callable
    source: str

    @property
    def arity(self):
        return len(self.params)

    def bind(self, args, kwargs):
        if len(args) > self.arity:
            raise ArityError(f"{self.name}() takes {self.arity} arguments, got {len(args)}")
        bound = dict(zip(self.params, args))
        for name, value in kwargs:
            if name not in self.params:
                raise ArityError(f"{self.name}() has no parameter {name!r}")
            if name in bound:
                raise ArityError(f"{self.name}() got {name!r} twice")
            bound[name] = value
        missing = [name for name in self.params if name not in bound]
        if missing:
            raise ArityError(f"{self.name}() is missing {', '.join(missing)}")
        return bound


@dataclass(frozen=True)
class AbstractFunctionTable:
    functions: tuple

    def get(self, name):
        for spec in self.functions:
            if spec.name == name:
                return spec
        raise UnknownFunction(f"unknown function {name!r}")

    def __iter__(self):
        return iter(self.functions)


def _entity_arg(value):
    if isinstance(value, PathRef) and value.attribute is None:
        return value.entity
    if isinstance(value, Literal) and value.value:
        return value.value.strip().replace(' ', '_')
    raise CallError(f"expected an entity, got {value.render()}")


def _text_arg(value):
    if isinstance(value, Literal) and value.value is not None:
        return value.value
    raise CallError(f"expected text, got {value.render()}")


def _carried(world, name):
    holder = world.entities.get(name)
    if holder is None:
        return []
    return [
        item for item in holder.lists.get('inventory', ())
        if item in world.entities and 'carrier' in world.entities[item].scalars
    ]


def _location_of(world, name):
    holder = world.entities.get(name)
    return holder.scalars.get('location') if holder is not None else None


def _go(world, bound):
    character = _entity_arg(bound['character'])
    destination = bound['destination']
    statements = [ScalarAssign(PathRef(character, 'location'), destination)]
    statements += [ScalarAssign(PathRef(item, 'location'), destination) for item in _carried(world, character)]
    return statements


def _grab(world, bound):
    character = _entity_arg(bound['character'])
    item = _entity_arg(bound['object'])
    statements = [ListAppend(PathRef(character, 'inventory'), Literal(item))]
    location = _location_of(world, character)
    if location is not None:
        statements.append(ScalarAssign(PathRef(item, 'location'), Literal(location)))
    return statements


def _drop(world, bound):
    character = _entity_arg(bound['character'])
    item = _entity_arg(bound['object'])
    statements = []
    if item in _carried(world, character):
        statements.append(ListRemove(PathRef(character, 'inventory'), Literal(item)))
    location = _location_of(world, character)
    if location is not None:
        statements.append(ScalarAssign(PathRef(item, 'location'), Literal(location)))
    return statements


def _setter(attribute):
    def recipe(world, bound):
        return [ListAppend(PathRef(_entity_arg(bound['character']), attribute), bound[attribute])]
    return recipe


def _set_relation(world, bound):
    character = _entity_arg(bound['character'])
    other = _entity_arg(bound['other_character'])
    return [MapAssign(PathRef(character, 'relations'), _text_arg(bound['relation']), Literal(other))]


BABI_TABLE = AbstractFunctionTable((
    FunctionSpec('go', ('character', 'destination'), _go, (
        '    def go(self, character, destination):\n'
        '        character.location = destination\n'
        '        for item in character.inventory:\n'
        '            item.location = destination\n'
    )),
    FunctionSpec('grab', ('character', 'object'), _grab, (
        '    def grab(self, character, object):\n'
        '        character.inventory.append(object)\n'
        '        object.carrier = character\n'
        '        object.location = character.location\n'
    )),
    FunctionSpec('drop', ('character', 'object'), _drop, (
        '    def drop(self, character, object):\n'
        '        character.inventory.remove(object)\n'
        '        object.carrier = None\n'
        '        object.location = character.location\n'
    )),
))

RE3_TABLE = AbstractFunctionTable(tuple(
    FunctionSpec(f"set_{attribute}", ('character', attribute), _setter(attribute), (
        f"    def set_{attribute}(self, character, {attribute}):\n"
        f"        character.{attribute}.append({attribute})\n"
    ))
    for attribute in ('appearance', 'occupation', 'gender', 'age')
) + (
    FunctionSpec('set_relation', ('character', 'relation', 'other_character'), _set_relation, (
        '    def set_relation(self, character, relation, other_character):\n'
        '        character.relations[relation] = other_character.name\n'
    )),
))

TABLES = {
    BABI_TASK2.identifier: BABI_TABLE,
    RE3_CHARACTER.identifier: RE3_TABLE,
}


def table_for(preset):
    return TABLES[preset.identifier]


def expand_call(call, world, table):
    """The direct statements ``call`` stands for in ``world``."""
    spec = table.get(call.function)
    bound = spec.bind(call.args, call.kwargs)
    return [
        _with_line(statement, call.line) for statement in spec.recipe(world, bound)
    ]


def _with_line(statement, line):
    return type(statement)(**{**statement.__dict__, 'line': line})


# -- evaluation -------------------------------------------------------------

class Evaluation(NamedTuple):
    world: object
    printed: list
    faults: list


_FAULT_KINDS = (
    (UnknownEntity, FaultKind.UNKNOWN_ENTITY),
    (UnknownAttribute, FaultKind.UNKNOWN_ATTRIBUTE),
    (KindMismatch, FaultKind.KIND_MISMATCH),
    (UnknownFunction, FaultKind.UNKNOWN_FUNCTION),
    (ArityError, FaultKind.ARITY),
)


def _fault_kind(exc):
    for error, kind in _FAULT_KINDS:
        if isinstance(exc, error):
            return kind
    return FaultKind.STATE_ERROR


def _auto_kind(preset, attribute):
    kinds = preset.kinds_declaring(attribute)
    if len(kinds) == 1 and preset.default_kind not in kinds:
        return kinds[0]
    return preset.default_kind


class _Evaluator:
    def __init__(self, world, table):
        self.world = world
        self.table = table
        self.faults = []
        self.prints = []

    def run(self, statement):
        if isinstance(statement, Print):
            self.prints.append(statement)
            return
        if isinstance(statement, Pass):
            return
        trial = self.world.copy()
        notes = []
        try:
            self._apply(trial, statement, notes)
        except (WorldError, CallError) as exc:
            fault = Fault(_fault_kind(exc), str(exc), statement.line)
            logger.debug('skipped statement: %s', fault)
            self.faults.append(fault)
            return
        self.world = trial
        self.faults.extend(notes)

    def _declare(self, world, name, attribute, notes, line):
        kind = _auto_kind(world.preset, attribute)
        world.declare(kind, name)
        notes.append(Fault(FaultKind.AUTO_DECLARED, f"{name} declared as {kind}", line, skipped=False))

    def _ensure(self, world, path, notes, line):
        if path.entity not in world:
            self._declare(world, path.entity, path.attribute, notes, line)
        return path.entity

    def _resolve(self, world, value):
        if isinstance(value, Literal):
            return value.value
        if value.attribute is None:
            return value.entity
        resolved = world.entity(value.entity).get(value.attribute)
        if resolved is not None and not isinstance(resolved, str):
            raise KindMismatch(f"{value.render()} is not a scalar value")
        return resolved

    def _apply(self, world, statement, notes):
        line = statement.line
        if isinstance(statement, AbstractCall):
            for expanded in expand_call(statement, world, self.table):
                self._apply(world, expanded, notes)
            return
        entity = self._ensure(world, statement.path, notes, line)
        attribute = statement.path.attribute
        value = self._resolve(world, statement.value)
        tracked = world.preset.tracks_carriers
        if isinstance(statement, ScalarAssign):
            if tracked and attribute == 'carrier' and value is not None and value not in world:
                self._declare(world, value, 'inventory', notes, line)
            world.set_scalar(entity, attribute, value)
        elif isinstance(statement, ListAppend):
            if value is None:
                raise KindMismatch('list values must be text')
            if tracked and attribute == 'inventory' and value.isidentifier() and value not in world:
                self._declare(world, value, 'carrier', notes, line)
            world.append_list(entity, attribute, value)
        elif isinstance(statement, ListRemove):
            world.remove_list(entity, attribute, value)
        elif isinstance(statement, MapAssign):
            if value is None:
                raise KindMismatch('map values must be text')
            world.put_map(entity, attribute, statement.key, value)
        else:
            raise CallError(f"cannot evaluate {type(statement).__name__}")

    def printed(self):
        texts = []
        for statement in self.prints:
            try:
                text = self._print_text(statement.expr)
            except WorldError as exc:
                self.faults.append(Fault(_fault_kind(exc), str(exc), statement.line))
                continue
            if text is None:
                self.faults.append(Fault(FaultKind.UNSET_VALUE, f"{statement.expr.render()} has no value yet", statement.line))
                continue
            texts.append(text)
        return texts

    def _print_text(self, expr):
        if isinstance(expr, Literal):
            return str(expr.value)
        if expr.attribute is None:
            return self.world.entity(expr.entity).name
        value = self.world.entity(expr.entity).get(expr.attribute)
        return None if value is None else str(value)


def evaluate(program, world, table):
    """
    Apply each sentence group of ``program`` as one update, advancing the
    step index after every group, then run the trailing statements. Prints
    are resolved against the final state. The world passed in is left as it
    was; the returned one is new.
    """
    evaluator = _Evaluator(world.copy(), table)
    for group in program.groups:
        for statement in group.statements:
            evaluator.run(statement)
        evaluator.world.advance()
    for statement in program.trailing:
        evaluator.run(statement)
    printed = evaluator.printed()
    return Evaluation(evaluator.world, printed, evaluator.faults)


def extract_answer(evaluation, query=None):
    """The last printed text, else the queried object's location."""
    if evaluation.printed:
        return evaluation.printed[-1]
    if query is None:
        raise Unanswerable('nothing was printed and there is no query object')
    try:
        return evaluation.world.query_object_location(query)
    except WorldError as exc:
        raise Unanswerable(str(exc)) from exc
