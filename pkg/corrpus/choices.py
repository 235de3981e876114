# corrpus/choices.py
from django.db import models


class Task(models.TextChoices):
    BABI = 'babi', 'bAbI Task 2'
    RE3 = 're3', 'Re3 inconsistency detection'


class PromptStyle(models.TextChoices):
    COMMENT_ONLY = 'comment-only', 'Comment Only'
    SPECIFIC_FUNCTIONS = 'specific-functions', 'Specific Functions'
    ABSTRACT_FUNCTIONS = 'abstract-functions', 'Abstract Functions'
    NATURAL_LANGUAGE = 'natural-language', 'Natural Language'

    @property
    def is_code(self):
        return self is not PromptStyle.NATURAL_LANGUAGE


class Backend(models.TextChoices):
    LIVE = 'live', 'Live HTTP (records a cassette)'
    CACHE = 'cache', 'Cassette replay'
    ORACLE = 'oracle', 'Oracle mock (bAbI only)'


# Short spellings accepted on the command line.
STYLE_FLAGS = {
    'comment': PromptStyle.COMMENT_ONLY,
    'specific': PromptStyle.SPECIFIC_FUNCTIONS,
    'abstract': PromptStyle.ABSTRACT_FUNCTIONS,
    'natural': PromptStyle.NATURAL_LANGUAGE,
}
