# corrpus/runs.py
"""Run persistence: the manifest row plus manifest/report files in the output directory."""
import hashlib
import json
import logging
import subprocess
from pathlib import Path

from .models import RunManifest

logger = logging.getLogger(__name__)

SECRET_MARKERS = ('KEY', 'SECRET', 'TOKEN', 'PASSWORD')


def assets_version(assets_dir):
    assets_dir = Path(assets_dir)
    try:
        described = subprocess.run(
            ['git', 'describe', '--always', '--dirty'],
            cwd=assets_dir, capture_output=True, text=True, check=True, timeout=10,
        )
        return described.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    digest = hashlib.sha256()
    for path in sorted(assets_dir.rglob('*')):
        if path.is_file():
            digest.update(path.relative_to(assets_dir).as_posix().encode('utf-8'))
            digest.update(path.read_bytes())
    return f"sha256:{digest.hexdigest()[:16]}"


def public_config(config):
    """``config`` with secrets dropped and paths as text."""
    public = {}
    for key, value in config.items():
        if any(marker in key.upper() for marker in SECRET_MARKERS):
            continue
        public[key] = str(value) if isinstance(value, Path) else value
    return public


def write_run(out_dir, report, **manifest_fields):
    """
    Record the manifest, then write manifest.json, report.json and
    report.txt. report.json holds no timestamps so cached reruns compare
    equal byte for byte.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / 'report.json'
    manifest = RunManifest(report_path=str(report_path), **manifest_fields)
    manifest.save()
    (out_dir / 'manifest.json').write_text(
        json.dumps(manifest.as_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8',
    )
    payload = {**report.as_dict(), 'manifest': 'manifest.json'}
    report_path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + '\n', encoding='utf-8',
    )
    (out_dir / 'report.txt').write_text(report.as_text(), encoding='utf-8')
    logger.info('run %s written to %s', manifest.run_id, out_dir)
    return manifest
