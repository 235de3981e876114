# corrpus/llm_gateway.py
"""
Completion backends and entailment scorers.

Live completions go over HTTP to an OpenAI-style ``/completions`` endpoint
and are recorded to a JSON-lines cassette; cache mode answers from the
cassette alone. Mocks answer deterministically for tests and oracle runs.
"""
import hashlib
import json
import logging
import os
import random
import threading
import time
from datetime import datetime
from pathlib import Path

import httpx
from django.conf import settings
from django.utils import timezone
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .choices import Backend
from .exceptions import CorrpusError

logger = logging.getLogger(__name__)

DEFAULT_STOP = ('\n\nclass ',)
BACKOFF_SECONDS = (1, 2, 4)
REDACTED = '***'


class GatewayError(CorrpusError):
    def __init__(self, message, status_code=None):
        self.status_code = status_code
        super().__init__(message)


class AuthenticationMissing(GatewayError):
    pass


class TransportError(GatewayError):
    pass


class CacheMiss(GatewayError):
    pass


class MalformedScorerResponse(GatewayError):
    pass


class CompletionRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    model: str
    prompt: str
    temperature: float = Field(0.0, ge=0)
    top_p: float = Field(0.95, gt=0, le=1)
    sample_count: int = Field(1, ge=1)
    max_output_tokens: int = Field(1024, ge=1)
    stop: tuple[str, ...] = DEFAULT_STOP

    def fingerprint(self, sample_index):
        payload = self.model_dump(mode='json')
        payload['sample_index'] = sample_index
        encoded = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode('utf-8')
        return hashlib.sha256(encoded).hexdigest()


def make_request(prompt, temperature=0.0, sample_count=1, config=None):
    """A request carrying the configured model and sampling limits."""
    config = config or settings.CORRPUS
    return CompletionRequest(
        model=config['MODEL'],
        prompt=prompt,
        temperature=temperature,
        top_p=config['TOP_P'],
        sample_count=sample_count,
        max_output_tokens=config['MAX_OUTPUT_TOKENS'],
    )


class CompletionRecord(BaseModel):
    fingerprint: str
    sample_index: int = Field(ge=0)
    completion: str
    backend_id: str
    timestamp: datetime


class Cassette:
    """Append-only JSON-lines store of completion records."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records = None

    def _load(self):
        records = {}
        if self.path.exists():
            with self.path.open(encoding='utf-8') as stream:
                for number, line in enumerate(stream, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = CompletionRecord.model_validate_json(line)
                    except ValidationError as exc:
                        raise GatewayError(f"{self.path}:{number}: not a completion record") from exc
                    records.setdefault(record.fingerprint, record)
        return records

    def _ensure_loaded(self):
        if self._records is None:
            self._records = self._load()
        return self._records

    def get(self, fingerprint):
        with self._lock:
            return self._ensure_loaded().get(fingerprint)

    def append(self, record):
        with self._lock:
            records = self._ensure_loaded()
            if record.fingerprint in records:
                return False
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open('a', encoding='utf-8') as stream:
                stream.write(record.model_dump_json() + '\n')
                stream.flush()
                os.fsync(stream.fileno())
            records[record.fingerprint] = record
            return True

    def __len__(self):
        with self._lock:
            return len(self._ensure_loaded())


class Completer:
    backend_id = 'base'

    def complete(self, request):
        """``request.sample_count`` completion texts, in sample order."""
        return [self._sample(request, index) for index in range(request.sample_count)]

    def _sample(self, request, index):
        raise NotImplementedError


class CassetteCompleter(Completer):
    backend_id = 'cache'

    def __init__(self, cassette):
        self.cassette = cassette

    def _sample(self, request, index):
        record = self.cassette.get(request.fingerprint(index))
        if record is None:
            raise CacheMiss(f"no recorded completion for sample {index} of this request")
        return record.completion


class ScriptedCompleter(Completer):
    """Answers from a prompt mapping or a ``responder(request, index)`` callable."""

    backend_id = 'scripted'

    def __init__(self, mapping=None, responder=None, default='', backend_id=None):
        self.mapping = dict(mapping or {})
        self.responder = responder
        self.default = default
        if backend_id:
            self.backend_id = backend_id

    def _sample(self, request, index):
        if self.responder is not None:
            return self.responder(request, index)
        return self.mapping.get(request.prompt, self.default)


def _redact(headers):
    return {
        name: REDACTED if name.lower() in ('authorization', 'x-api-key') else value
        for name, value in headers.items()
    }


def _post_with_retry(client, url, payload, headers, max_retries, backoff):
    """
    POST ``payload`` as JSON, retrying 429, 5xx and transport errors with
    jittered exponential backoff. Other 4xx answers are final.
    """
    last_error = None
    attempts = max(1, max_retries)
    for attempt in range(attempts):
        logger.debug('POST %s headers=%s body=%s', url, _redact(headers), json.dumps(payload)[:2000])
        try:
            response = client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            logger.warning('transport error on attempt %d/%d: %s', attempt + 1, attempts, exc)
            last_error = TransportError(f"transport error: {exc}")
        else:
            logger.debug('response %d body=%s', response.status_code, response.text[:2000])
            if response.status_code in (401, 403):
                raise AuthenticationMissing(
                    f"{url} rejected the credentials ({response.status_code})",
                    status_code=response.status_code,
                )
            if response.status_code == 429 or response.status_code >= 500:
                logger.warning(
                    'HTTP %d on attempt %d/%d', response.status_code, attempt + 1, attempts,
                )
                last_error = TransportError(
                    f"HTTP {response.status_code}: {response.text[:200]}",
                    status_code=response.status_code,
                )
            elif response.status_code >= 400:
                raise TransportError(
                    f"HTTP {response.status_code}: {response.text[:500]}",
                    status_code=response.status_code,
                )
            else:
                return response
        if attempt < attempts - 1 and backoff:
            base = backoff[min(attempt, len(backoff) - 1)]
            time.sleep(base * (1 + random.random() * 0.5))
    raise last_error


class LiveCompleter(Completer):
    backend_id = 'live'

    def __init__(self, base_url, api_key, timeout=60.0, max_retries=3, client=None, backoff=BACKOFF_SECONDS):
        self.base_url = base_url.rstrip('/')
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=httpx.Timeout(timeout, connect=10.0))

    def complete(self, request):
        if not self.api_key:
            raise AuthenticationMissing('no completion API key is configured')
        payload = {
            'model': request.model,
            'prompt': request.prompt,
            'temperature': request.temperature,
            'top_p': request.top_p,
            'n': request.sample_count,
            'max_tokens': request.max_output_tokens,
            'stop': list(request.stop),
        }
        headers = {'Authorization': f"Bearer {self.api_key}"}
        response = _post_with_retry(
            self.client, f"{self.base_url}/completions", payload, headers, self.max_retries, self.backoff,
        )
        try:
            choices = sorted(response.json()['choices'], key=lambda choice: choice.get('index', 0))
            texts = [choice['text'] for choice in choices]
        except (ValueError, KeyError, TypeError) as exc:
            raise TransportError(f"unreadable completion response: {exc}") from exc
        if len(texts) != request.sample_count:
            raise TransportError(f"asked for {request.sample_count} samples, got {len(texts)}")
        return texts


class Recorder(Completer):
    """Serves recorded samples and records whatever ``inner`` produces."""

    def __init__(self, inner, cassette):
        self.inner = inner
        self.cassette = cassette
        self.backend_id = inner.backend_id

    def complete(self, request):
        recorded = [self.cassette.get(request.fingerprint(index)) for index in range(request.sample_count)]
        if all(recorded):
            return [record.completion for record in recorded]
        texts = self.inner.complete(request)
        for index, text in enumerate(texts):
            self.cassette.append(CompletionRecord(
                fingerprint=request.fingerprint(index),
                sample_index=index,
                completion=text,
                backend_id=self.inner.backend_id,
                timestamp=timezone.now(),
            ))
        return texts


# -- entailment -------------------------------------------------------------

class EntailmentScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    entailment: float = Field(ge=0, le=1)
    neutral: float = Field(ge=0, le=1)
    contradiction: float = Field(ge=0, le=1)

    @model_validator(mode='before')
    @classmethod
    def normalize(cls, data):
        if isinstance(data, dict):
            try:
                values = [float(data[key]) for key in ('entailment', 'neutral', 'contradiction')]
            except (KeyError, TypeError, ValueError):
                return data
            total = sum(values)
            if total <= 0 or any(value < 0 for value in values):
                raise ValueError('scores must be non-negative with a positive sum')
            data = {**data, **dict(zip(('entailment', 'neutral', 'contradiction'), (v / total for v in values)))}
        return data

    @property
    def label(self):
        return max(('entailment', 'neutral', 'contradiction'), key=lambda name: getattr(self, name))


NEUTRAL = EntailmentScore(entailment=0.0, neutral=1.0, contradiction=0.0)
CONTRADICTION = EntailmentScore(entailment=0.0, neutral=0.0, contradiction=1.0)


class Scorer:
    """Scores are cached per sentence pair; one scorer may serve many threads."""

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    def score_entailment(self, premise, hypothesis):
        key = hashlib.sha256(json.dumps([premise, hypothesis], ensure_ascii=False).encode('utf-8')).hexdigest()
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        score = self._score(premise, hypothesis)
        with self._lock:
            self._cache.setdefault(key, score)
        return score

    def _score(self, premise, hypothesis):
        raise NotImplementedError


class LookupScorer(Scorer):
    def __init__(self, table=None, default=NEUTRAL, responder=None):
        super().__init__()
        self.table = dict(table or {})
        self.default = default
        self.responder = responder

    def _score(self, premise, hypothesis):
        if (premise, hypothesis) in self.table:
            return self.table[(premise, hypothesis)]
        if self.responder is not None:
            return self.responder(premise, hypothesis)
        return self.default


class RemoteScorer(Scorer):
    """
    POSTs ``{"premise": ..., "hypothesis": ...}`` and expects the three
    probabilities back, at the top level or under ``scores``.
    """

    def __init__(self, url, api_key=None, timeout=60.0, max_retries=3, client=None, backoff=BACKOFF_SECONDS):
        super().__init__()
        self.url = url
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=httpx.Timeout(timeout, connect=10.0))

    def _score(self, premise, hypothesis):
        headers = {'Authorization': f"Bearer {self.api_key}"} if self.api_key else {}
        response = _post_with_retry(
            self.client, self.url, {'premise': premise, 'hypothesis': hypothesis},
            headers, self.max_retries, self.backoff,
        )
        try:
            body = response.json()
            if isinstance(body, dict) and isinstance(body.get('scores'), dict):
                body = body['scores']
            return EntailmentScore.model_validate(body)
        except (ValueError, ValidationError) as exc:
            raise MalformedScorerResponse(f"unusable scorer response: {response.text[:200]}") from exc


# -- factories --------------------------------------------------------------

def build_completer(backend, config=None, cassette_path=None, oracle=None):
    config = config or settings.CORRPUS
    backend = Backend(backend)
    if backend is Backend.ORACLE:
        if oracle is None:
            raise GatewayError('the oracle backend needs an oracle completer')
        return oracle
    cassette = Cassette(cassette_path or config['CASSETTE_PATH'])
    if backend is Backend.CACHE:
        return CassetteCompleter(cassette)
    if not config.get('COMPLETION_API_KEY'):
        raise AuthenticationMissing('set CORRPUS_COMPLETION_API_KEY to use the live backend')
    live = LiveCompleter(
        config['COMPLETION_BASE_URL'],
        config['COMPLETION_API_KEY'],
        timeout=config['REQUEST_TIMEOUT'],
        max_retries=config['MAX_RETRIES'],
    )
    return Recorder(live, cassette)


def build_scorer(spec=None, config=None):
    """``mock`` for the lookup mock, otherwise a scorer URL (default from settings)."""
    config = config or settings.CORRPUS
    if spec == 'mock':
        return LookupScorer()
    url = spec or config.get('SCORER_URL')
    if not url:
        raise GatewayError('no entailment scorer URL is configured')
    return RemoteScorer(
        url,
        api_key=config.get('SCORER_API_KEY'),
        timeout=config['REQUEST_TIMEOUT'],
        max_retries=config['MAX_RETRIES'],
    )
