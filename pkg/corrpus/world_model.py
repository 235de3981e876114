# corrpus/world_model.py
"""
Symbolic story world: entity schemas, schema presets and the deterministic
state operations every update program is interpreted against.
"""
import enum
import json
import re
from dataclasses import dataclass, field

from .exceptions import CorrpusError

IDENTIFIER = re.compile(r'[A-Za-z_][A-Za-z0-9_]*')


class WorldError(CorrpusError):
    pass


class UnknownEntity(WorldError):
    pass


class UnknownAttribute(WorldError):
    pass


class KindMismatch(WorldError):
    pass


class DuplicateEntity(WorldError):
    pass


class UnknownKind(WorldError):
    pass


class Unanswerable(WorldError):
    """The world does not determine an answer to the query."""


class AttributeKind(enum.Enum):
    SCALAR = 'scalar'
    LIST = 'list'
    MAP = 'map'


@dataclass(frozen=True)
class EntitySchema:
    kind: str
    attributes: tuple

    def __post_init__(self):
        names = [name for name, _ in self.attributes]
        if len(set(names)) != len(names):
            raise WorldError(f"schema {self.kind!r} declares an attribute twice")
        if dict(self.attributes).get('name') is not AttributeKind.SCALAR:
            raise WorldError(f"schema {self.kind!r} must declare 'name' as a scalar")

    def kind_of(self, attribute):
        return dict(self.attributes).get(attribute)

    @property
    def fields(self):
        """Every attribute except ``name``, in declaration order."""
        return tuple((name, kind) for name, kind in self.attributes if name != 'name')


@dataclass(frozen=True)
class SchemaPreset:
    identifier: str
    schemas: tuple
    default_kind: str
    tracks_carriers: bool = False

    def schema(self, kind):
        for schema in self.schemas:
            if schema.kind == kind:
                return schema
        raise UnknownKind(f"preset {self.identifier!r} has no kind {kind!r}")

    def kinds_declaring(self, attribute):
        return [schema.kind for schema in self.schemas if schema.kind_of(attribute) is not None]

    def attribute_kinds(self, attribute):
        return {schema.kind_of(attribute) for schema in self.schemas} - {None}


BABI_TASK2 = SchemaPreset(
    identifier='babi-task2',
    schemas=(
        EntitySchema('character', (
            ('name', AttributeKind.SCALAR),
            ('location', AttributeKind.SCALAR),
            ('inventory', AttributeKind.LIST),
        )),
        EntitySchema('object', (
            ('name', AttributeKind.SCALAR),
            ('location', AttributeKind.SCALAR),
            ('carrier', AttributeKind.SCALAR),
        )),
    ),
    default_kind='object',
    tracks_carriers=True,
)

RE3_CHARACTER = SchemaPreset(
    identifier='re3-character',
    schemas=(
        EntitySchema('character', (
            ('name', AttributeKind.SCALAR),
            ('appearance', AttributeKind.LIST),
            ('occupation', AttributeKind.LIST),
            ('gender', AttributeKind.LIST),
            ('age', AttributeKind.LIST),
            ('relations', AttributeKind.MAP),
        )),
    ),
    default_kind='character',
)


def display_name(identifier):
    return identifier.replace('_', ' ')


@dataclass
class Entity:
    name: str
    schema: EntitySchema
    scalars: dict = field(default_factory=dict)
    lists: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)

    @classmethod
    def blank(cls, schema, name):
        entity = cls(name=name, schema=schema)
        for attribute, kind in schema.attributes:
            if kind is AttributeKind.SCALAR:
                entity.scalars[attribute] = None
            elif kind is AttributeKind.LIST:
                entity.lists[attribute] = []
            else:
                entity.maps[attribute] = {}
        entity.scalars['name'] = display_name(name)
        return entity

    @property
    def kind(self):
        return self.schema.kind

    def get(self, attribute):
        kind = self.schema.kind_of(attribute)
        if kind is None:
            raise UnknownAttribute(f"{self.kind} {self.name!r} has no attribute {attribute!r}")
        if kind is AttributeKind.SCALAR:
            return self.scalars[attribute]
        if kind is AttributeKind.LIST:
            return self.lists[attribute]
        return self.maps[attribute]

    def copy(self):
        return Entity(
            name=self.name,
            schema=self.schema,
            scalars=dict(self.scalars),
            lists={key: list(values) for key, values in self.lists.items()},
            maps={key: dict(values) for key, values in self.maps.items()},
        )


class WorldState:
    """
    The world W_i of a story after ``step_index`` sentence-level updates.

    Mutating operations return the world itself so calls can be chained.
    A world belongs to one thread at a time.
    """

    def __init__(self, preset, entities=None, step_index=0):
        self.preset = preset
        self.entities = entities if entities is not None else {}
        self.step_index = step_index

    def __contains__(self, name):
        return name in self.entities

    def __eq__(self, other):
        return isinstance(other, WorldState) and self.snapshot() == other.snapshot()

    def __repr__(self):
        return f"<WorldState {self.preset.identifier} step={self.step_index} entities={len(self.entities)}>"

    def entity(self, name):
        try:
            return self.entities[name]
        except KeyError:
            raise UnknownEntity(f"unknown entity {name!r}") from None

    def declare(self, kind, name):
        if not IDENTIFIER.fullmatch(name or ''):
            raise WorldError(f"entity name {name!r} is not an identifier")
        if name in self.entities:
            raise DuplicateEntity(f"entity {name!r} is already declared")
        self.entities[name] = Entity.blank(self.preset.schema(kind), name)
        return self

    def copy(self):
        return WorldState(
            self.preset,
            {name: entity.copy() for name, entity in self.entities.items()},
            self.step_index,
        )

    def advance(self):
        self.step_index += 1
        return self

    # -- state operations ---------------------------------------------------

    def _attribute(self, name, attribute, expected):
        entity = self.entity(name)
        kind = entity.schema.kind_of(attribute)
        if kind is None:
            raise UnknownAttribute(f"{entity.kind} {name!r} has no attribute {attribute!r}")
        if kind is not expected:
            raise KindMismatch(
                f"{name}.{attribute} is a {kind.value} attribute, not a {expected.value}"
            )
        return entity

    def _tracked_object(self, holder, attribute, value):
        """The object entity ``value`` names when appending to a tracked inventory."""
        if not (self.preset.tracks_carriers and attribute == 'inventory'):
            return None
        item = self.entities.get(value)
        if item is None or 'carrier' not in item.scalars or item is holder:
            return None
        return item

    def _move_carrier(self, item, carrier):
        holder = None
        if carrier is not None:
            holder = self.entity(carrier)
            if 'inventory' not in holder.lists:
                raise KindMismatch(f"{carrier!r} is a {holder.kind} and cannot carry objects")
        previous = item.scalars['carrier']
        if previous is not None and previous in self.entities:
            inventory = self.entities[previous].lists.get('inventory')
            if inventory is not None and item.name in inventory:
                inventory.remove(item.name)
        item.scalars['carrier'] = carrier
        if holder is not None and item.name not in holder.lists['inventory']:
            holder.lists['inventory'].append(item.name)

    def set_scalar(self, entity, attribute, value):
        target = self._attribute(entity, attribute, AttributeKind.SCALAR)
        if value is not None and not isinstance(value, str):
            raise KindMismatch(f"scalar values are text, got {type(value).__name__}")
        if self.preset.tracks_carriers and attribute == 'carrier':
            self._move_carrier(target, value)
        else:
            target.scalars[attribute] = value
        return self

    def append_list(self, entity, attribute, value):
        holder = self._attribute(entity, attribute, AttributeKind.LIST)
        if not isinstance(value, str):
            raise KindMismatch(f"list values are text, got {type(value).__name__}")
        item = self._tracked_object(holder, attribute, value)
        if item is not None:
            self._move_carrier(item, entity)
        else:
            holder.lists[attribute].append(value)
        return self

    def remove_list(self, entity, attribute, value):
        holder = self._attribute(entity, attribute, AttributeKind.LIST)
        values = holder.lists[attribute]
        if value not in values:
            raise WorldError(f"{value!r} is not in {entity}.{attribute}")
        item = self._tracked_object(holder, attribute, value)
        if item is not None and item.scalars['carrier'] == entity:
            self._move_carrier(item, None)
        else:
            values.remove(value)
        return self

    def put_map(self, entity, attribute, key, value):
        holder = self._attribute(entity, attribute, AttributeKind.MAP)
        if not isinstance(key, str) or not isinstance(value, str):
            raise KindMismatch('map keys and values are text')
        holder.maps[attribute][key] = value
        return self

    # -- queries ------------------------------------------------------------

    def query_object_location(self, name):
        item = self.entity(name)
        if 'carrier' not in item.scalars:
            raise KindMismatch(f"{name!r} is a {item.kind}, not a carried object")
        carrier = item.scalars['carrier']
        if carrier is not None:
            location = self.entity(carrier).scalars.get('location')
        else:
            location = item.scalars.get('location')
        if location is None:
            raise Unanswerable(f"the location of {name!r} is not determined")
        return location

    def check_duality(self):
        """Every violation of the carrier/inventory duality, as messages."""
        if not self.preset.tracks_carriers:
            return []
        problems = []
        for entity in self.entities.values():
            carrier = entity.scalars.get('carrier')
            if carrier is not None:
                holder = self.entities.get(carrier)
                if holder is None or entity.name not in holder.lists.get('inventory', ()):
                    problems.append(f"{entity.name} names {carrier} as carrier but is not in its inventory")
            for carried in entity.lists.get('inventory', ()):
                item = self.entities.get(carried)
                if item is not None and 'carrier' in item.scalars and item.scalars['carrier'] != entity.name:
                    problems.append(f"{carried} is in {entity.name}'s inventory but its carrier is {item.scalars['carrier']}")
        return problems

    def snapshot(self):
        lines = [f"preset {self.preset.identifier}", f"step {self.step_index}"]
        for entity in self.entities.values():
            lines.append(f"{entity.kind} {entity.name}")
            for attribute, kind in entity.schema.attributes:
                value = entity.get(attribute)
                if kind is AttributeKind.MAP:
                    value = dict(sorted(value.items()))
                lines.append(f"  {attribute}: {json.dumps(value, ensure_ascii=False)}")
        return '\n'.join(lines) + '\n'


def init_world(preset, declarations):
    """W_0: every declared entity with empty attributes, step index 0."""
    world = WorldState(preset)
    for kind, name in declarations:
        world.declare(kind, name)
    return world
