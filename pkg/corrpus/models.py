# corrpus/models.py
import uuid

from django.db import models

from .choices import Backend, PromptStyle, Task
from .exceptions import CorrpusError


class ImmutableManifest(CorrpusError):
    pass


class RunManifest(models.Model):
    run_id = models.UUIDField(default=uuid.uuid4, unique=True, editable=False)
    task = models.CharField(max_length=8, choices=Task.choices)
    style = models.CharField(max_length=32, choices=PromptStyle.choices)
    backend = models.CharField(max_length=8, choices=Backend.choices)
    model_name = models.CharField(max_length=200)
    temperature = models.FloatField()
    top_p = models.FloatField()
    sample_count = models.PositiveIntegerField(default=1)
    dataset_path = models.CharField(max_length=500)
    cassette_path = models.CharField(max_length=500, blank=True)
    assets_version = models.CharField(max_length=100, help_text="git describe of the prompt assets, or a content digest")
    config = models.JSONField(default=dict, help_text="Resolved settings and flags, without secrets")
    report_path = models.CharField(max_length=500, blank=True)
    started_at = models.DateTimeField()
    finished_at = models.DateTimeField()

    class Meta:
        ordering = ['-started_at']

    def save(self, *args, **kwargs):
        """
        Manifests are written once. Saving a row that already exists raises
        instead of updating it.
        """
        if self.pk is not None or RunManifest.objects.filter(run_id=self.run_id).exists():
            raise ImmutableManifest(f"run {self.run_id} is already recorded")
        kwargs['force_insert'] = True
        super().save(*args, **kwargs)

    def as_dict(self):
        return {
            'run_id': str(self.run_id),
            'task': self.task,
            'style': self.style,
            'backend': self.backend,
            'model_name': self.model_name,
            'temperature': self.temperature,
            'top_p': self.top_p,
            'sample_count': self.sample_count,
            'dataset_path': self.dataset_path,
            'cassette_path': self.cassette_path,
            'assets_version': self.assets_version,
            'config': self.config,
            'report_path': self.report_path,
            'started_at': self.started_at.isoformat(),
            'finished_at': self.finished_at.isoformat(),
        }

    def __str__(self):
        return f"{self.task} {self.style} via {self.backend} ({self.run_id})"
