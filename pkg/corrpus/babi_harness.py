# corrpus/babi_harness.py
"""
bAbI Task 2: dataset parsing, the symbolic oracle, synthetic stories and
the accuracy harness.
"""
import dataclasses
import logging
import random
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

from django.conf import settings

from .choices import PromptStyle
from .exceptions import CorrpusError
from .llm_gateway import AuthenticationMissing, CacheMiss, GatewayError, ScriptedCompleter, make_request
from .prompt_forge import (
    EmptyCompletion,
    PromptError,
    StoryCase,
    completion_slice,
    function_names,
    render,
    render_completion,
)
from .update_dsl import (
    BABI_TABLE,
    AbstractCall,
    Group,
    ListAppend,
    ListRemove,
    Literal,
    Pass,
    PathRef,
    Print,
    ProgramSyntaxError,
    ScalarAssign,
    UpdateProgram,
    evaluate,
    extract_answer,
    parse_program,
    trailing_label_for,
)
from .world_model import BABI_TASK2, Unanswerable, init_world

logger = logging.getLogger(__name__)

LINE = re.compile(r'^(\d+) (.*)$')
QUESTION = re.compile(r'^Where is the (\w+)\?$')

CHARACTERS = ('Mary', 'John', 'Daniel', 'Sandra')
OBJECTS = ('football', 'apple', 'milk')
LOCATIONS = ('bathroom', 'bedroom', 'garden', 'hallway', 'kitchen', 'office')
SYNTHETIC_ATTEMPTS = 100


class BabiFormatError(CorrpusError):
    pass


class UnmatchedSentence(CorrpusError):
    pass


class UnknownObject(CorrpusError):
    pass


@dataclass(frozen=True)
class BabiSample:
    index: int
    story: tuple
    question: str
    answer: str
    supporting: tuple = ()

    @property
    def sentences(self):
        return tuple(text for _, text in self.story)


def parse_babi_lines(lines, source='<lines>'):
    """
    One sample per question line. The story of a sample is every statement
    of the current story up to that question; a story ends when ids reset to 1.
    """
    samples = []
    story = []
    previous = 0
    for number, raw in enumerate(lines, start=1):
        raw = raw.rstrip('\r\n')
        if not raw.strip():
            continue
        match = LINE.match(raw.strip())
        if not match:
            raise BabiFormatError(f"{source}:{number}: expected '<id> <text>'")
        line_id, text = int(match[1]), match[2]
        if line_id == 1:
            story = []
        elif line_id <= previous:
            raise BabiFormatError(f"{source}:{number}: id {line_id} does not follow {previous}")
        previous = line_id
        if '\t' not in text:
            story.append((line_id, text.strip()))
            continue
        parts = text.split('\t')
        try:
            supporting = tuple(int(item) for item in parts[2].split()) if len(parts) > 2 else ()
        except ValueError:
            raise BabiFormatError(f"{source}:{number}: supporting ids must be integers") from None
        question, answer = parts[0].strip(), parts[1].strip()
        if not question or not answer:
            raise BabiFormatError(f"{source}:{number}: question lines need a question and an answer")
        samples.append(BabiSample(len(samples), tuple(story), question, answer, supporting))
    return samples


def parse_babi_file(path):
    path = Path(path)
    try:
        with path.open(encoding='utf-8') as stream:
            return parse_babi_lines(stream, source=str(path))
    except OSError as exc:
        raise BabiFormatError(f"cannot read {path}: {exc}") from exc


class Action(NamedTuple):
    kind: str
    actor: str
    target: str


@dataclass(frozen=True)
class ActionLexicon:
    movement: tuple = ('moved', 'went', 'journeyed', 'travelled')
    take: tuple = ('took', 'got', 'grabbed', 'picked up')
    drop: tuple = ('dropped', 'discarded', 'left', 'put down')

    def __post_init__(self):
        verbs = [*self.movement, *self.take, *self.drop]
        if len(set(verbs)) != len(verbs):
            raise ValueError('movement, take and drop verbs must be disjoint')

    @staticmethod
    def _alternatives(verbs):
        return '|'.join(re.escape(verb) for verb in verbs)

    @cached_property
    def patterns(self):
        return (
            ('move', re.compile(rf'^(\w+) (?:{self._alternatives(self.movement)})(?: back)? to the (\w+)\.$')),
            ('take', re.compile(rf'^(\w+) (?:{self._alternatives(self.take)}) the (\w+)(?: there)?\.$')),
            ('drop', re.compile(rf'^(\w+) (?:{self._alternatives(self.drop)}) the (\w+)(?: there)?\.$')),
        )

    def match(self, sentence):
        for kind, pattern in self.patterns:
            found = pattern.match(sentence.strip())
            if found:
                return Action(kind, found[1], found[2])
        raise UnmatchedSentence(f"no action matches {sentence!r}")

    def query_object(self, question):
        found = QUESTION.match(question.strip())
        if not found:
            raise UnmatchedSentence(f"unsupported question {question!r}")
        return found[1]


DEFAULT_LEXICON = ActionLexicon()


def declare_entities(sample, lexicon=DEFAULT_LEXICON):
    """Characters, then objects, each in order of first mention."""
    characters, objects = [], []
    for sentence in sample.sentences:
        action = lexicon.match(sentence)
        if action.actor not in characters:
            characters.append(action.actor)
        if action.kind != 'move' and action.target not in objects:
            objects.append(action.target)
    query = lexicon.query_object(sample.question)
    if query not in objects:
        objects.append(query)
    return [('character', name) for name in characters] + [('object', name) for name in objects]


def story_case(sample, lexicon=DEFAULT_LEXICON):
    return StoryCase(
        sentences=sample.sentences,
        entities=tuple(declare_entities(sample, lexicon)),
        query=sample.question,
        answer=sample.answer,
    )


class OracleSolution(NamedTuple):
    answer: str
    program: UpdateProgram
    world: object


def _carried(world, actor):
    return [item for item in world.entity(actor).lists['inventory'] if world.entity(item).kind == 'object']


def _simulate(world, action):
    """Apply ``action`` to ``world`` and return the direct statements that do the same."""
    actor, target = action.actor, action.target
    location = world.entity(actor).scalars['location']
    statements = []
    if action.kind == 'move':
        world.set_scalar(actor, 'location', target)
        statements.append(ScalarAssign(PathRef(actor, 'location'), Literal(target)))
        for item in _carried(world, actor):
            world.set_scalar(item, 'location', target)
            statements.append(ScalarAssign(PathRef(item, 'location'), Literal(target)))
        return statements
    if action.kind == 'take':
        world.append_list(actor, 'inventory', target)
        statements.append(ListAppend(PathRef(actor, 'inventory'), Literal(target)))
    elif world.entity(target).scalars['carrier'] == actor:
        world.remove_list(actor, 'inventory', target)
        statements.append(ListRemove(PathRef(actor, 'inventory'), Literal(target)))
    if location is not None:
        world.set_scalar(target, 'location', location)
        statements.append(ScalarAssign(PathRef(target, 'location'), Literal(location)))
    return statements


ABSTRACT_CALLS = {
    'move': ('go', 'character', 'destination'),
    'take': ('grab', 'character', 'object'),
    'drop': ('drop', 'character', 'object'),
}


def _abstract_call(action):
    function, actor_param, target_param = ABSTRACT_CALLS[action.kind]
    return AbstractCall(function, kwargs=(
        (actor_param, Literal(action.actor)),
        (target_param, Literal(action.target)),
    ))


def oracle_solve(sample, lexicon=DEFAULT_LEXICON, style=PromptStyle.COMMENT_ONLY):
    """
    Simulate the story symbolically. Returns the answer, the program a
    perfect model would write in ``style`` and the final world.
    """
    style = PromptStyle(style)
    entities = declare_entities(sample, lexicon)
    query = lexicon.query_object(sample.question)
    world = init_world(BABI_TASK2, entities)
    labels = function_names(sample.sentences) if style is PromptStyle.SPECIFIC_FUNCTIONS else sample.sentences
    program = UpdateProgram()
    for sentence, label in zip(sample.sentences, labels):
        action = lexicon.match(sentence)
        if action.kind != 'move' and action.target not in world:
            raise UnknownObject(f"{action.target!r} is not an object")
        statements = _simulate(world, action)
        if style is PromptStyle.ABSTRACT_FUNCTIONS:
            statements = [_abstract_call(action)]
        elif style is PromptStyle.SPECIFIC_FUNCTIONS and not statements:
            statements = [Pass()]
        if style is not PromptStyle.NATURAL_LANGUAGE:
            program.groups.append(Group(label, statements))
        world.advance()
    answer = world.query_object_location(query)
    if style is PromptStyle.NATURAL_LANGUAGE:
        program.trailing.append(Print(Literal(answer)))
    else:
        program.trailing.append(Print(PathRef(query, 'location')))
        program.trailing_label = trailing_label_for(style, sample.question)
    return OracleSolution(answer, program, world)


def _synthetic_story(rng, length, characters, objects, locations, lexicon):
    where = {}
    holder = {}
    item_place = {}
    sentences = []
    for _ in range(length):
        actor = rng.choice(characters)
        here = where.get(actor)
        takeable = [item for item in objects if item not in holder and here is not None
                    and item_place.get(item, here) == here]
        carried = [item for item in objects if holder.get(item) == actor]
        kinds = ['move'] + ['take'] * bool(takeable) + ['drop'] * bool(carried)
        kind = rng.choice(kinds)
        if kind == 'move':
            place = rng.choice([place for place in locations if place != here])
            back = ' back' if rng.random() < 0.3 else ''
            sentences.append(f"{actor} {rng.choice(lexicon.movement)}{back} to the {place}.")
            where[actor] = place
            for item in carried:
                item_place[item] = place
        elif kind == 'take':
            item = rng.choice(takeable)
            there = ' there' if rng.random() < 0.5 else ''
            sentences.append(f"{actor} {rng.choice(lexicon.take)} the {item}{there}.")
            holder[item] = actor
            item_place[item] = here
        else:
            item = rng.choice(carried)
            there = ' there' if rng.random() < 0.5 else ''
            sentences.append(f"{actor} {rng.choice(lexicon.drop)} the {item}{there}.")
            del holder[item]
    if not item_place:
        return None
    return sentences, rng.choice(sorted(item_place))


def generate_synthetic(seed, length=8, characters=4, objects=3, locations=6, lexicon=DEFAULT_LEXICON):
    """
    A consistent random Task-2 story with its oracle answer; same seed, same
    sample.

    ``length`` must be at least 2. A lone movement mentions no object to ask
    about, and a lone pick-up leaves the carrier with no known location, so
    no one-sentence story has an answer.
    """
    if length < 2:
        raise ValueError('synthetic stories need at least two sentences')
    rng = random.Random(seed)
    cast = CHARACTERS[:max(1, characters)]
    things = OBJECTS[:max(1, objects)]
    places = LOCATIONS[:max(2, locations)]
    for _ in range(SYNTHETIC_ATTEMPTS):
        drawn = _synthetic_story(rng, length, cast, things, places, lexicon)
        if drawn is None:
            continue
        sentences, query = drawn
        sample = BabiSample(
            index=seed,
            story=tuple(enumerate(sentences, start=1)),
            question=f"Where is the {query}?",
            answer='',
        )
        try:
            answer = oracle_solve(sample, lexicon).answer
        except Unanswerable:
            continue
        return dataclasses.replace(sample, answer=answer)
    raise CorrpusError(f"no answerable story of length {length} after {SYNTHETIC_ATTEMPTS} attempts")


def oracle_completer(samples, style, exemplar, lexicon=DEFAULT_LEXICON):
    """A completer that answers every sample's prompt with the oracle program."""
    mapping = {}
    for sample in samples:
        try:
            bundle = render(story_case(sample, lexicon), style, BABI_TASK2, exemplar)
            solution = oracle_solve(sample, lexicon, style)
        except (CorrpusError, Unanswerable) as exc:
            logger.warning('no oracle completion for sample %d: %s', sample.index, exc)
            continue
        mapping[bundle.request_text] = render_completion(bundle, solution.program)
    return ScriptedCompleter(mapping, backend_id='oracle')


# -- accuracy harness -------------------------------------------------------

@dataclass(frozen=True)
class BabiConfig:
    style: str
    backend: str
    limit: int | None = None
    max_in_flight: int = 4


@dataclass(frozen=True)
class BabiVerdict:
    index: int
    question: str
    gold: str
    predicted: str | None
    correct: bool
    unanswerable: bool = False
    faults: tuple = ()


@dataclass
class BabiReport:
    style: str
    verdicts: list = field(default_factory=list)

    @property
    def n(self):
        return len(self.verdicts)

    @property
    def correct(self):
        return sum(verdict.correct for verdict in self.verdicts)

    @property
    def accuracy(self):
        return self.correct / self.n if self.n else 0.0

    @property
    def unanswerable(self):
        return sum(verdict.unanswerable for verdict in self.verdicts)

    @property
    def faults(self):
        return Counter(kind for verdict in self.verdicts for kind in verdict.faults)

    def as_dict(self):
        return {
            'task': 'babi',
            'style': str(self.style),
            'accuracy': self.accuracy,
            'n': self.n,
            'correct': self.correct,
            'unanswerable': self.unanswerable,
            'faults': dict(sorted(self.faults.items())),
            'verdicts': [dataclasses.asdict(verdict) for verdict in self.verdicts],
        }

    def as_text(self):
        lines = [
            f"bAbI Task 2 ({self.style})",
            f"  accuracy      {self.accuracy:.4f}",
            f"  samples       {self.n}",
            f"  correct       {self.correct}",
            f"  unanswerable  {self.unanswerable}",
        ]
        for kind, count in sorted(self.faults.items()):
            lines.append(f"  fault {kind:<24} {count}")
        return '\n'.join(lines) + '\n'


def answers_match(predicted, gold):
    return predicted is not None and predicted.strip().lower() == gold.strip().lower()


def _gateway_fault(exc):
    if isinstance(exc, CacheMiss):
        return 'cache-miss'
    if isinstance(exc, AuthenticationMissing):
        return 'authentication'
    return 'transport'


def solve_sample(sample, style, completer, exemplar, lexicon=DEFAULT_LEXICON, config=None):
    """Render, complete, slice, parse, evaluate and extract one sample's answer."""
    def verdict(predicted=None, faults=(), unanswerable=False):
        return BabiVerdict(
            index=sample.index,
            question=sample.question,
            gold=sample.answer,
            predicted=predicted,
            correct=answers_match(predicted, sample.answer),
            unanswerable=unanswerable,
            faults=tuple(faults),
        )

    try:
        case = story_case(sample, lexicon)
        bundle = render(case, style, BABI_TASK2, exemplar)
        query = lexicon.query_object(sample.question)
    except UnmatchedSentence:
        return verdict(faults=['unmatched-sentence'])
    except PromptError:
        return verdict(faults=['prompt-error'])
    request = make_request(bundle.request_text, temperature=0.0, sample_count=1, config=config)
    try:
        raw = completer.complete(request)[0]
    except GatewayError as exc:
        logger.warning('sample %d: %s', sample.index, exc)
        return verdict(faults=[_gateway_fault(exc)])
    try:
        program = parse_program(completion_slice(bundle, raw), style, BABI_TASK2)
    except EmptyCompletion:
        return verdict(faults=['empty-completion'])
    except ProgramSyntaxError:
        return verdict(faults=['fatal-syntax'])
    faults = [fault.kind.value for fault in program.faults]
    evaluation = evaluate(program, init_world(BABI_TASK2, case.entities), BABI_TABLE)
    faults += [fault.kind.value for fault in evaluation.faults]
    try:
        predicted = extract_answer(evaluation, query)
    except Unanswerable:
        return verdict(faults=faults + ['unanswerable'], unanswerable=True)
    return verdict(predicted=predicted, faults=faults)


def run_babi(samples, config, completer, exemplar, lexicon=DEFAULT_LEXICON, request_config=None):
    """Accuracy of ``completer`` over ``samples``; always completes."""
    style = PromptStyle(config.style)
    if config.limit is not None:
        samples = samples[:config.limit]
    logger.info('bAbI run: %d samples, style %s, backend %s', len(samples), style, config.backend)
    with ThreadPoolExecutor(max_workers=max(1, config.max_in_flight)) as pool:
        verdicts = list(pool.map(
            lambda sample: solve_sample(sample, style, completer, exemplar, lexicon, request_config),
            samples,
        ))
    report = BabiReport(style=style, verdicts=sorted(verdicts, key=lambda verdict: verdict.index))
    logger.info('bAbI accuracy %.4f over %d samples', report.accuracy, report.n)
    return report


def default_data_path():
    return Path(settings.CORRPUS['BABI_DATA'])
