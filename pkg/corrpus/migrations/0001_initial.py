# Generated by Django 5.2.7 on 2026-10-19 10:02

import uuid

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run_id', models.UUIDField(default=uuid.uuid4, editable=False, unique=True)),
                ('task', models.CharField(choices=[('babi', 'bAbI Task 2'), ('re3', 'Re3 inconsistency detection')], max_length=8)),
                ('style', models.CharField(choices=[('comment-only', 'Comment Only'), ('specific-functions', 'Specific Functions'), ('abstract-functions', 'Abstract Functions'), ('natural-language', 'Natural Language')], max_length=32)),
                ('backend', models.CharField(choices=[('live', 'Live HTTP (records a cassette)'), ('cache', 'Cassette replay'), ('oracle', 'Oracle mock (bAbI only)')], max_length=8)),
                ('model_name', models.CharField(max_length=200)),
                ('temperature', models.FloatField()),
                ('top_p', models.FloatField()),
                ('sample_count', models.PositiveIntegerField(default=1)),
                ('dataset_path', models.CharField(max_length=500)),
                ('cassette_path', models.CharField(blank=True, max_length=500)),
                ('assets_version', models.CharField(help_text='git describe of the prompt assets, or a content digest', max_length=100)),
                ('config', models.JSONField(default=dict, help_text='Resolved settings and flags, without secrets')),
                ('report_path', models.CharField(blank=True, max_length=500)),
                ('started_at', models.DateTimeField()),
                ('finished_at', models.DateTimeField()),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
    ]
