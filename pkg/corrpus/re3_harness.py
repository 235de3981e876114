# corrpus/re3_harness.py
"""
Re3 inconsistency detection: extract character attributes from premises
and stories, vote across sampled generations, compare shared attributes
with an entailment scorer and rank pairs by their worst contradiction.
"""
import dataclasses
import logging
import re
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from django.conf import settings
from pydantic import BaseModel, ConfigDict, TypeAdapter, ValidationError, field_validator
from scipy.stats import rankdata

from .choices import PromptStyle
from .exceptions import CorrpusError
from .llm_gateway import AuthenticationMissing, CacheMiss, GatewayError, make_request
from .prompt_forge import EmptyCompletion, PromptError, StoryCase, completion_slice, render, split_sentences
from .update_dsl import RE3_TABLE, ProgramSyntaxError, evaluate, parse_program
from .world_model import RE3_CHARACTER, AttributeKind, display_name, init_world

logger = logging.getLogger(__name__)

RELATION_PREFIX = 'relations:'
LIST_KEYS = tuple(
    name for name, kind in RE3_CHARACTER.schema('character').fields if kind is AttributeKind.LIST
)
HEADER_NAME = re.compile(r"^([A-Z][\w'-]*(?: [A-Z][\w'-]*)*) (?:is|was|has|had) ")
FULL_NAME = re.compile(r"\b([A-Z][a-z]+(?: [A-Z][a-z]+)+)\b")
NOT_NAMES = frozenset({
    'A', 'An', 'The', 'This', 'That', 'These', 'Those', 'There', 'It', 'He', 'She',
    'They', 'We', 'I', 'You', 'His', 'Her', 'Their', 'Its', 'When', 'But', 'And',
})


class Re3DatasetError(CorrpusError):
    pass


class AttributeKeyError(CorrpusError):
    pass


class MetricError(CorrpusError):
    pass


class Re3Tuple(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str | int
    premise: str
    alt_premise: str
    story: str
    alt_story: str

    @field_validator('premise', 'alt_premise', 'story', 'alt_story')
    @classmethod
    def not_blank(cls, value):
        if not value.strip():
            raise ValueError('must not be empty')
        return value

    @property
    def tuple_id(self):
        return str(self.id)


def load_re3_dataset(path):
    path = Path(path)
    try:
        tuples = TypeAdapter(list[Re3Tuple]).validate_json(path.read_bytes())
    except OSError as exc:
        raise Re3DatasetError(f"cannot read {path}: {exc}") from exc
    except ValidationError as exc:
        raise Re3DatasetError(f"{path}: {exc.error_count()} invalid field(s)\n{exc}") from exc
    ids = [item.tuple_id for item in tuples]
    duplicates = sorted(ident for ident, count in Counter(ids).items() if count > 1)
    if duplicates:
        raise Re3DatasetError(f"{path}: duplicate tuple ids {', '.join(duplicates)}")
    return tuples


def character_roster(text, premise=None):
    """
    Identifiers of the characters a text is about: names that open a
    ``<Name> is ...`` sentence of the premise, then capitalised multi-word
    names used at least twice in the text.
    """
    roster = []

    def add(name):
        ident = name.replace(' ', '_')
        if ident not in roster:
            roster.append(ident)

    for sentence in split_sentences(premise or ''):
        found = HEADER_NAME.match(sentence)
        if found and found[1].split()[0] not in NOT_NAMES:
            add(found[1])
    counts = Counter(
        name for name in FULL_NAME.findall(text) if name.split()[0] not in NOT_NAMES
    )
    for name in FULL_NAME.findall(text):
        if counts[name] >= 2:
            add(name)
    return roster


def normalize_value(value):
    return ' '.join(str(value).lower().split())


@dataclass(frozen=True)
class AttributeExtraction:
    # character -> attribute key -> frozenset of normalised values
    values: dict = field(default_factory=dict)
    # (character, key, value) -> indices of the generations asserting it
    provenance: dict = field(default_factory=dict, compare=False)
    faults: tuple = field(default=(), compare=False)

    def triples(self):
        for character in sorted(self.values):
            for key in sorted(self.values[character]):
                for value in sorted(self.values[character][key]):
                    yield character, key, value


def _from_triples(triples, provenance=None, faults=()):
    values = defaultdict(lambda: defaultdict(set))
    for character, key, value in triples:
        values[character][key].add(value)
    return AttributeExtraction(
        values={
            character: {key: frozenset(found) for key, found in keys.items()}
            for character, keys in values.items()
        },
        provenance=dict(provenance or {}),
        faults=tuple(faults),
    )


def extraction_from_world(world, generation=0):
    triples = []
    for name, entity in world.entities.items():
        for key in LIST_KEYS:
            triples += [(name, key, normalize_value(value)) for value in entity.lists.get(key, ())]
        for relation, other in entity.maps.get('relations', {}).items():
            triples.append((name, RELATION_PREFIX + normalize_value(relation), normalize_value(other)))
    triples = [triple for triple in triples if triple[2] and triple[1] != RELATION_PREFIX]
    return _from_triples(triples, {triple: (generation,) for triple in triples})


def majority_vote(extractions):
    """Triples asserted by a strict majority of the generations."""
    if not extractions:
        return AttributeExtraction()
    support = defaultdict(set)
    for index, extraction in enumerate(extractions):
        for triple in extraction.triples():
            support[triple].add(index)
    kept = {
        triple: tuple(sorted(indices)) for triple, indices in support.items()
        if 2 * len(indices) > len(extractions)
    }
    faults = [fault for extraction in extractions for fault in extraction.faults]
    return _from_triples(kept, kept, faults)


def attribute_sentence(character, key, value):
    if not value or not str(value).strip():
        raise AttributeKeyError(f"no value to describe for {character}'s {key}")
    name = display_name(character)
    if key.startswith(RELATION_PREFIX):
        relation = key[len(RELATION_PREFIX):]
        if not relation:
            raise AttributeKeyError('relation keys need a relation name')
        return f"{name}'s {display_name(relation)} is {display_name(value)}."
    if key not in LIST_KEYS:
        raise AttributeKeyError(f"unknown attribute key {key!r}")
    return f"{name}'s {key} is {value}."


def _gateway_fault(exc):
    if isinstance(exc, CacheMiss):
        return 'cache-miss'
    if isinstance(exc, AuthenticationMissing):
        return 'authentication'
    return 'transport'


def story_case(text, premise=None):
    """A prompt case for ``text``; characters come from ``premise``, or ``text`` itself."""
    roster = character_roster(text, premise if premise is not None else text)
    return StoryCase(tuple(split_sentences(text)), tuple(('character', name) for name in roster))


def extract_attributes(text, style, completer, exemplar, premise=None, samples=3, temperature=0.7, config=None):
    """Attributes of the characters in ``text``, voted over ``samples`` generations."""
    style = PromptStyle(style)
    if style is PromptStyle.NATURAL_LANGUAGE:
        raise PromptError('attribute extraction needs a code prompt style')
    case = story_case(text, premise)
    if not case.sentences:
        return AttributeExtraction()
    bundle = render(case, style, RE3_CHARACTER, exemplar)
    request = make_request(bundle.request_text, temperature=temperature, sample_count=samples, config=config)
    try:
        raws = completer.complete(request)
    except GatewayError as exc:
        logger.warning('extraction request failed: %s', exc)
        return AttributeExtraction(faults=(_gateway_fault(exc),))
    generations, faults = [], []
    for index, raw in enumerate(raws):
        try:
            program = parse_program(completion_slice(bundle, raw), style, RE3_CHARACTER)
        except EmptyCompletion:
            faults.append('empty-completion')
            continue
        except ProgramSyntaxError:
            faults.append('fatal-syntax')
            continue
        evaluation = evaluate(program, init_world(RE3_CHARACTER, case.entities), RE3_TABLE)
        faults += [fault.kind.value for fault in [*program.faults, *evaluation.faults]]
        generations.append(extraction_from_world(evaluation.world, generation=index))
    if not generations:
        return AttributeExtraction(faults=tuple(faults + ['no-parseable-sample']))
    # Unparseable samples still count toward the majority threshold.
    generations += [AttributeExtraction()] * (len(raws) - len(generations))
    voted = majority_vote(generations)
    return dataclasses.replace(voted, faults=tuple(faults))


class Evidence(NamedTuple):
    character: str
    key: str
    premise_value: str
    story_value: str
    contradiction: float


@dataclass(frozen=True)
class DetectionVerdict:
    pair_id: str
    score: float | None
    evidence: tuple = ()
    label: int | None = None
    faults: tuple = ()

    @property
    def excluded(self):
        return self.score is None


def detect(premise_extraction, story_extraction, scorer, pair_id='', label=None):
    """The strongest contradiction between attributes the two extractions share."""
    evidence = []
    faults = tuple(premise_extraction.faults) + tuple(story_extraction.faults)
    shared = sorted(set(premise_extraction.values) & set(story_extraction.values))
    try:
        for character in shared:
            premise_keys = premise_extraction.values[character]
            story_keys = story_extraction.values[character]
            for key in sorted(set(premise_keys) & set(story_keys)):
                for premise_value in sorted(premise_keys[key]):
                    for story_value in sorted(story_keys[key]):
                        score = scorer.score_entailment(
                            attribute_sentence(character, key, premise_value),
                            attribute_sentence(character, key, story_value),
                        )
                        evidence.append(Evidence(character, key, premise_value, story_value, score.contradiction))
    except GatewayError as exc:
        logger.warning('pair %s excluded, scorer failed: %s', pair_id, exc)
        return DetectionVerdict(pair_id, None, tuple(evidence), label, faults + ('scorer',))
    score = max((row.contradiction for row in evidence), default=0.0)
    return DetectionVerdict(pair_id, score, tuple(evidence), label, faults)


def roc_auc(scored):
    """Rank-based area under the ROC curve of (score, label) pairs; label 1 is positive."""
    scores = np.asarray([score for score, _ in scored], dtype=float)
    labels = np.asarray([bool(label) for _, label in scored], dtype=bool)
    positives = int(labels.sum())
    negatives = len(labels) - positives
    if positives == 0 or negatives == 0:
        raise MetricError('ROC-AUC needs both positive and negative pairs')
    ranks = rankdata(scores, method='average')
    concordant = ranks[labels].sum() - positives * (positives + 1) / 2
    return float(concordant / (positives * negatives))


@dataclass(frozen=True)
class Re3Config:
    style: str
    backend: str
    samples: int = 3
    temperature: float = 0.7
    limit: int | None = None
    max_in_flight: int = 4


@dataclass
class Re3Report:
    style: str
    verdicts: list = field(default_factory=list)

    @property
    def n_pairs(self):
        return len(self.verdicts)

    @property
    def excluded(self):
        return sum(verdict.excluded for verdict in self.verdicts)

    @property
    def faults(self):
        return Counter(kind for verdict in self.verdicts for kind in verdict.faults)

    @property
    def auc(self):
        scored = [(verdict.score, verdict.label) for verdict in self.verdicts if not verdict.excluded]
        try:
            return roc_auc(scored)
        except MetricError:
            return None

    def as_dict(self):
        return {
            'task': 're3',
            'style': str(self.style),
            'auc': self.auc,
            'n_pairs': self.n_pairs,
            'excluded': self.excluded,
            'faults': dict(sorted(self.faults.items())),
            'verdicts': [
                {
                    'pair_id': verdict.pair_id,
                    'label': verdict.label,
                    'score': verdict.score,
                    'faults': list(verdict.faults),
                    'evidence': [row._asdict() for row in verdict.evidence],
                }
                for verdict in self.verdicts
            ],
        }

    def as_text(self):
        auc = 'n/a' if self.auc is None else f"{self.auc:.4f}"
        lines = [
            f"Re3 detection ({self.style})",
            f"  roc-auc       {auc}",
            f"  pairs         {self.n_pairs}",
            f"  excluded      {self.excluded}",
        ]
        for kind, count in sorted(self.faults.items()):
            lines.append(f"  fault {kind:<24} {count}")
        return '\n'.join(lines) + '\n'


def labeled_pairs(item):
    """(pair id, premise is the alternative, story is the alternative, label) per pair."""
    return [
        (f"{item.tuple_id}:P-S", False, False, 0),
        (f"{item.tuple_id}:P'-S'", True, True, 0),
        (f"{item.tuple_id}:P-S'", False, True, 1),
        (f"{item.tuple_id}:P'-S", True, False, 1),
    ]


def run_re3(tuples, config, completer, scorer, exemplar, request_config=None):
    """Four labelled pairs per tuple; consistent pairs are negatives."""
    style = PromptStyle(config.style)
    if config.limit is not None:
        tuples = tuples[:config.limit]
    logger.info('Re3 run: %d tuples, style %s, backend %s', len(tuples), style, config.backend)

    # Each story is read with the roster of the premise it was written from.
    jobs = {}
    for item in tuples:
        jobs[(item.tuple_id, 'P')] = (item.premise, item.premise)
        jobs[(item.tuple_id, "P'")] = (item.alt_premise, item.alt_premise)
        jobs[(item.tuple_id, 'S')] = (item.story, item.premise)
        jobs[(item.tuple_id, "S'")] = (item.alt_story, item.alt_premise)

    def extract(key):
        text, premise = jobs[key]
        return key, extract_attributes(
            text, style, completer, exemplar, premise=premise,
            samples=config.samples, temperature=config.temperature, config=request_config,
        )

    workers = max(1, config.max_in_flight)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        extractions = dict(pool.map(extract, list(jobs)))

    def judge(job):
        ident, pair_id, premise_alt, story_alt, label = job
        premise = extractions[(ident, "P'" if premise_alt else 'P')]
        story = extractions[(ident, "S'" if story_alt else 'S')]
        return detect(premise, story, scorer, pair_id=pair_id, label=label)

    pairs = [(item.tuple_id, *pair) for item in tuples for pair in labeled_pairs(item)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        verdicts = list(pool.map(judge, pairs))

    report = Re3Report(style=style, verdicts=verdicts)
    if report.excluded:
        logger.warning('%d pair(s) excluded from ROC-AUC', report.excluded)
    if report.auc is None:
        logger.warning('ROC-AUC undefined: the remaining pairs hold a single class')
    else:
        logger.info('Re3 ROC-AUC %.4f over %d pairs', report.auc, report.n_pairs - report.excluded)
    return report


def default_data_path():
    return Path(settings.CORRPUS['RE3_DATA'])
