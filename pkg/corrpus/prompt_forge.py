# corrpus/prompt_forge.py
"""
Prompt rendering for the three code styles and the plain-text baseline.

Every prompt is one worked exemplar followed by the prefix of the target
story; the model is expected to continue the target prefix with the same
kind of program the exemplar shows.
"""
import json
import re
from dataclasses import dataclass
from pathlib import Path

from django.conf import settings
from django.template.loader import render_to_string

from .choices import PromptStyle
from .exceptions import CorrpusError
from .update_dsl import (
    ANSWER_FUNCTION,
    BODY_INDENT,
    METHOD_INDENT,
    STORY_FUNCTION,
    pretty_print,
    table_for,
)
from .world_model import AttributeKind, display_name

SENTENCE_BREAK = re.compile(r'(?<=[.!?])\s+(?=[A-Z])')
NON_ALPHANUMERIC = re.compile(r'[^a-z0-9]+')
RESERVED_NAMES = frozenset({ANSWER_FUNCTION, STORY_FUNCTION})

INSTRUCTIONS = {
    'babi-task2': "Create a world model state to track each character's location and inventory "
                  "and each object's location and carrier.",
    're3-character': "Create a world model state to track each character's appearance, personality, "
                     "and relations with other characters.",
}

INITIAL_VALUES = {
    AttributeKind.SCALAR: 'None',
    AttributeKind.LIST: '[]',
    AttributeKind.MAP: '{}',
}


class PromptError(CorrpusError):
    pass


class SlugError(PromptError):
    pass


class EmptyCompletion(PromptError):
    pass


@dataclass(frozen=True)
class StoryCase:
    sentences: tuple
    entities: tuple = ()
    query: str | None = None
    answer: str | None = None


@dataclass(frozen=True)
class Exemplar:
    case: StoryCase
    style: str
    completion: str


@dataclass(frozen=True)
class PromptBundle:
    exemplar: str
    target_prefix: str
    style: str
    # The tail of target_prefix that is already part of the program.
    program_head: str = ''

    @property
    def request_text(self):
        return self.exemplar + self.target_prefix


def slugify(sentence):
    slug = NON_ALPHANUMERIC.sub('_', sentence.lower()).strip('_')
    if not slug:
        raise SlugError(f"no letters or digits to name a function after: {sentence!r}")
    return slug


def function_names(sentences):
    """One unique function name per sentence, in order."""
    used = set(RESERVED_NAMES)
    names = []
    for sentence in sentences:
        base = slugify(sentence)
        name, suffix = base, 2
        while name in used:
            name = f"{base}_{suffix}"
            suffix += 1
        used.add(name)
        names.append(name)
    return names


def split_sentences(text):
    sentences = []
    for line in text.splitlines():
        for piece in SENTENCE_BREAK.split(line.strip()):
            piece = piece.strip()
            if any(char.isalnum() for char in piece):
                sentences.append(piece)
    return sentences


def _story_head(case, style):
    if PromptStyle(style) is not PromptStyle.SPECIFIC_FUNCTIONS:
        return ''
    names = function_names(case.sentences)
    calls = names + [ANSWER_FUNCTION] if case.query else names
    lines = [f"{BODY_INDENT}self.{name}()" for name in calls]
    lines += ['', f"{METHOD_INDENT}def {names[0]}(self):"]
    return '\n'.join(lines) + '\n'


def _code_prefix(case, style, preset):
    header = list(case.sentences)
    if case.query:
        header.append(f"Question: {case.query}")
    header.append(INSTRUCTIONS[preset.identifier])
    functions = []
    if PromptStyle(style) is PromptStyle.ABSTRACT_FUNCTIONS:
        functions = [spec.source for spec in table_for(preset)]
    story_head = _story_head(case, style)
    context = {
        'header': header,
        'schemas': [
            {
                'kind': schema.kind,
                'fields': [{'name': name, 'initial': INITIAL_VALUES[kind]} for name, kind in schema.fields],
            }
            for schema in preset.schemas
        ],
        'entities': [
            {'ident': ident, 'kind': kind, 'literal': repr(display_name(ident))}
            for kind, ident in case.entities
        ],
        'functions': functions,
        'story_head': story_head,
    }
    return render_to_string('corrpus/prompts/code_prefix.txt', context), story_head


def _prefix(case, style, preset):
    if not case.sentences:
        raise PromptError('a story needs at least one sentence to be rendered')
    if not PromptStyle(style).is_code:
        text = render_to_string('corrpus/prompts/natural_prefix.txt', {
            'sentences': case.sentences,
            'query': case.query,
        })
        return text, ''
    return _code_prefix(case, style, preset)


def render(case, style, preset, exemplar):
    style = PromptStyle(style)
    if PromptStyle(exemplar.style) is not style:
        raise PromptError(f"exemplar is written for {exemplar.style}, not {style}")
    exemplar_prefix, _ = _prefix(exemplar.case, style, preset)
    target_prefix, head = _prefix(case, style, preset)
    return PromptBundle(
        exemplar=exemplar_prefix + exemplar.completion + '\n',
        target_prefix=target_prefix,
        style=style,
        program_head=head,
    )


def completion_slice(bundle, raw):
    """The program text in ``raw``, ready for parse_program."""
    if not raw.strip():
        raise EmptyCompletion('the completion is empty')
    for echo in (bundle.request_text, bundle.target_prefix, bundle.program_head):
        if echo and raw.startswith(echo):
            raw = raw[len(echo):]
            break
    style = PromptStyle(bundle.style)
    if style is PromptStyle.NATURAL_LANGUAGE:
        for line in raw.split('\n'):
            answer = line.strip()
            if answer:
                return answer.rstrip('.').strip() + '\n'
        raise EmptyCompletion('the completion holds no answer')
    # Anything less indented than a statement body ends the program.
    floor = len(METHOD_INDENT) if style is PromptStyle.SPECIFIC_FUNCTIONS else len(BODY_INDENT)
    kept = []
    for line in raw.split('\n'):
        if line.strip() and len(line) - len(line.lstrip()) < floor:
            break
        kept.append(line.rstrip())
    while kept and not kept[-1]:
        kept.pop()
    if not any(kept):
        raise EmptyCompletion('the completion holds no program')
    return bundle.program_head + '\n'.join(kept) + '\n'


def render_completion(bundle, program):
    """What a perfect model would write after ``bundle.target_prefix``."""
    text = pretty_print(program, bundle.style)
    if PromptStyle(bundle.style) is PromptStyle.NATURAL_LANGUAGE:
        if not text:
            raise PromptError('the program has no answer to write')
        return ' ' + text
    if not text.startswith(bundle.program_head):
        raise PromptError('the program does not continue the prompt it was rendered for')
    return text[len(bundle.program_head):]


def load_exemplar(task, style, assets_dir=None):
    """
    The one-shot exemplar for ``task`` in ``style``. A style directory may
    carry its own exemplar.json when its story is segmented differently.
    """
    root = Path(assets_dir or settings.CORRPUS['ASSETS_DIR']) / 'prompts' / task
    story = root / style / 'exemplar.json'
    if not story.exists():
        story = root / 'exemplar.json'
    try:
        data = json.loads(story.read_text(encoding='utf-8'))
        completion = (root / style / 'exemplar.txt').read_text(encoding='utf-8')
    except FileNotFoundError as exc:
        raise PromptError(f"no {style} exemplar for {task}: {exc.filename}") from exc
    case = StoryCase(
        sentences=tuple(data['sentences']),
        entities=tuple((kind, ident) for kind, ident in data['entities']),
        query=data.get('query'),
        answer=data.get('answer'),
    )
    return Exemplar(case=case, style=PromptStyle(style), completion=completion)
