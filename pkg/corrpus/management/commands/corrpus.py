# corrpus/management/commands/corrpus.py
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.utils import timezone

from corrpus import babi_harness, re3_harness
from corrpus.choices import Backend, PromptStyle, Task
from corrpus.forms import BabiRunForm, OracleSolveForm, PromptDumpForm, Re3RunForm
from corrpus.llm_gateway import GatewayError, build_completer, build_scorer
from corrpus.prompt_forge import PromptError, load_exemplar, render
from corrpus.runs import assets_version, public_config, write_run
from corrpus.update_dsl import ProgramSyntaxError, dump_ast, parse_program
from corrpus.world_model import BABI_TASK2, RE3_CHARACTER, Unanswerable

logger = logging.getLogger(__name__)

CONFIG_ERROR = 2
DATASET_ERROR = 3

PRESETS = {Task.BABI: BABI_TASK2, Task.RE3: RE3_CHARACTER}


class Command(BaseCommand):
    help = "Run the bAbI and Re3 benchmarks, solve bAbI with the oracle, or dump prompts."

    def add_arguments(self, parser):
        groups = parser.add_subparsers(dest='group', required=True)

        babi = groups.add_parser('babi', help='bAbI Task 2 accuracy').add_subparsers(dest='action', required=True)
        self._add_run_flags(babi.add_parser('run', help='Score a prompt style on bAbI Task 2'))

        re3 = groups.add_parser('re3', help='Re3 inconsistency detection').add_subparsers(dest='action', required=True)
        re3_run = re3.add_parser('run', help='Score a prompt style on Re3 pairs by ROC-AUC')
        self._add_run_flags(re3_run)
        re3_run.add_argument('--scorer', help="'mock' or the URL of an entailment service")
        re3_run.add_argument('--samples', help='Generations voted per text (default 3)')

        oracle = groups.add_parser('oracle', help='Symbolic bAbI solver').add_subparsers(dest='action', required=True)
        solve = oracle.add_parser('solve', help='Print oracle answers next to the gold answers')
        solve.add_argument('--data')
        solve.add_argument('--limit')

        prompt = groups.add_parser('prompt', help='Prompt inspection').add_subparsers(dest='action', required=True)
        dump = prompt.add_parser('dump', help='Print a rendered prompt or the AST of a program file')
        dump.add_argument('--task', default=Task.BABI.value)
        dump.add_argument('--style', default='comment')
        dump.add_argument('--data')
        dump.add_argument('--index', help='Sample (bAbI) or tuple (Re3) to render, default 0')
        dump.add_argument('--part', help='Re3 text to render: premise, alt_premise, story or alt_story')
        dump.add_argument('--exemplar', action='store_true', help='Print the exemplar rendering')
        dump.add_argument('--dump-ast', action='store_true', help='Print the parsed AST of --program')
        dump.add_argument('--program', help='Program file for --dump-ast')
        dump.add_argument('--exemplar-dir')

    @staticmethod
    def _add_run_flags(parser):
        parser.add_argument('--style', help='comment, specific, abstract or natural')
        parser.add_argument('--backend', help='live, cache or oracle')
        parser.add_argument('--data')
        parser.add_argument('--limit')
        parser.add_argument('--out')
        parser.add_argument('--cassette')
        parser.add_argument('--model')
        parser.add_argument('--exemplar-dir')
        parser.add_argument('--max-in-flight')

    def handle(self, *args, **options):
        handler = getattr(self, f"handle_{options['group']}_{options['action']}")
        handler(options)

    # -- helpers -------------------------------------------------------------

    @staticmethod
    def _validated(form_class, options):
        data = {
            name: value for name, value in options.items()
            if name in form_class.base_fields and value is not None
        }
        form = form_class(data=data)
        if not form.is_valid():
            problems = '; '.join(
                f"--{name.replace('_', '-')}: {' '.join(errors)}" if name != '__all__' else ' '.join(errors)
                for name, errors in form.errors.items()
            )
            raise CommandError(problems, returncode=CONFIG_ERROR)
        return form.cleaned_data

    @staticmethod
    def _resolve_config(cleaned):
        """settings.CORRPUS with the command-line overrides applied."""
        config = dict(settings.CORRPUS)
        if cleaned.get('model'):
            config['MODEL'] = cleaned['model']
        if cleaned.get('max_in_flight'):
            config['MAX_IN_FLIGHT'] = cleaned['max_in_flight']
        if cleaned.get('cassette'):
            config['CASSETTE_PATH'] = cleaned['cassette']
        if cleaned.get('exemplar_dir'):
            config['ASSETS_DIR'] = cleaned['exemplar_dir']
        return config

    @staticmethod
    def _exemplar(task, style, config):
        try:
            return load_exemplar(task, style, config['ASSETS_DIR'])
        except PromptError as exc:
            raise CommandError(str(exc), returncode=CONFIG_ERROR) from exc

    @staticmethod
    def _babi_samples(path):
        if not path.exists():
            raise CommandError(f"bAbI data not found: {path}", returncode=DATASET_ERROR)
        try:
            samples = babi_harness.parse_babi_file(path)
        except babi_harness.BabiFormatError as exc:
            raise CommandError(str(exc), returncode=DATASET_ERROR) from exc
        if not samples:
            raise CommandError(f"{path} holds no questions", returncode=DATASET_ERROR)
        return samples

    @staticmethod
    def _re3_tuples(path):
        if not path.exists():
            raise CommandError(f"Re3 data not found: {path}", returncode=DATASET_ERROR)
        try:
            tuples = re3_harness.load_re3_dataset(path)
        except re3_harness.Re3DatasetError as exc:
            raise CommandError(str(exc), returncode=DATASET_ERROR) from exc
        if not tuples:
            raise CommandError(f"{path} holds no tuples", returncode=DATASET_ERROR)
        return tuples

    @staticmethod
    def _completer(backend, config, oracle=None):
        try:
            return build_completer(backend, config, config['CASSETTE_PATH'], oracle=oracle)
        except GatewayError as exc:
            raise CommandError(str(exc), returncode=CONFIG_ERROR) from exc

    def _finish(self, task, cleaned, config, report, dataset, started, temperature, sample_count):
        backend = cleaned['backend']
        out = cleaned['out'] or Path(config['OUTPUT_DIR']) / task / cleaned['style']
        write_run(
            out, report,
            task=task,
            style=cleaned['style'],
            backend=backend,
            model_name=config['MODEL'] if backend is not Backend.ORACLE else 'oracle',
            temperature=temperature,
            top_p=config['TOP_P'],
            sample_count=sample_count,
            dataset_path=str(dataset),
            cassette_path='' if backend is Backend.ORACLE else str(config['CASSETTE_PATH']),
            assets_version=assets_version(config['ASSETS_DIR']),
            config=public_config(config),
            started_at=started,
            finished_at=timezone.now(),
        )
        self.stdout.write(report.as_text(), ending='')
        self.stdout.write(f"report written to {out}")

    # -- sub-commands --------------------------------------------------------

    def handle_babi_run(self, options):
        cleaned = self._validated(BabiRunForm, options)
        config = self._resolve_config(cleaned)
        style, backend = cleaned['style'], cleaned['backend']
        dataset = cleaned['data'] or babi_harness.default_data_path()
        samples = self._babi_samples(dataset)
        exemplar = self._exemplar(Task.BABI, style, config)

        oracle = None
        if backend is Backend.ORACLE:
            oracle = babi_harness.oracle_completer(samples[:cleaned['limit']], style, exemplar)
        completer = self._completer(backend, config, oracle)

        started = timezone.now()
        run_config = babi_harness.BabiConfig(
            style=style, backend=backend, limit=cleaned['limit'], max_in_flight=config['MAX_IN_FLIGHT'],
        )
        report = babi_harness.run_babi(samples, run_config, completer, exemplar, request_config=config)
        self._finish(Task.BABI, cleaned, config, report, dataset, started, temperature=0.0, sample_count=1)

    def handle_re3_run(self, options):
        cleaned = self._validated(Re3RunForm, options)
        config = self._resolve_config(cleaned)
        style, backend = cleaned['style'], cleaned['backend']
        dataset = cleaned['data'] or re3_harness.default_data_path()
        tuples = self._re3_tuples(dataset)
        exemplar = self._exemplar(Task.RE3, style, config)
        completer = self._completer(backend, config)
        try:
            scorer = build_scorer(cleaned['scorer'] or None, config)
        except GatewayError as exc:
            raise CommandError(str(exc), returncode=CONFIG_ERROR) from exc

        started = timezone.now()
        run_config = re3_harness.Re3Config(
            style=style,
            backend=backend,
            samples=cleaned['samples'] or 3,
            limit=cleaned['limit'],
            max_in_flight=config['MAX_IN_FLIGHT'],
        )
        report = re3_harness.run_re3(tuples, run_config, completer, scorer, exemplar, request_config=config)
        self._finish(
            Task.RE3, cleaned, config, report, dataset, started,
            temperature=run_config.temperature, sample_count=run_config.samples,
        )

    def handle_oracle_solve(self, options):
        cleaned = self._validated(OracleSolveForm, options)
        dataset = cleaned['data'] or babi_harness.default_data_path()
        samples = self._babi_samples(dataset)[:cleaned['limit']]
        matched = failed = 0
        for sample in samples:
            try:
                answer = babi_harness.oracle_solve(sample).answer
            except (babi_harness.UnmatchedSentence, babi_harness.UnknownObject, Unanswerable) as exc:
                failed += 1
                self.stderr.write(f"sample {sample.index}: {exc}")
                continue
            match = babi_harness.answers_match(answer, sample.answer)
            matched += match
            self.stdout.write(f"{sample.index}\t{sample.question}\t{answer}\t{sample.answer}\t{'ok' if match else 'MISMATCH'}")
        self.stdout.write(f"{len(samples)} samples, {matched} match gold, {failed} unsolved")

    def handle_prompt_dump(self, options):
        cleaned = self._validated(PromptDumpForm, options)
        task, style = Task(cleaned['task']), cleaned['style']
        preset = PRESETS[task]
        config = self._resolve_config(cleaned)

        if cleaned['dump_ast']:
            path = Path(cleaned['program'])
            try:
                source = path.read_text(encoding='utf-8')
            except OSError as exc:
                raise CommandError(f"cannot read {path}: {exc}", returncode=DATASET_ERROR) from exc
            try:
                program = parse_program(source, style, preset)
            except ProgramSyntaxError as exc:
                raise CommandError(f"{path}:{exc.line}: {exc}", returncode=DATASET_ERROR) from exc
            self.stdout.write(dump_ast(program), ending='')
            return

        exemplar = self._exemplar(task, style, config)
        if cleaned['exemplar']:
            bundle = render(exemplar.case, style, preset, exemplar)
            self.stdout.write(bundle.exemplar, ending='')
            return

        index = cleaned['index'] or 0
        if task is Task.BABI:
            samples = self._babi_samples(cleaned['data'] or babi_harness.default_data_path())
            if index >= len(samples):
                raise CommandError(f"no sample {index}; the file holds {len(samples)}", returncode=DATASET_ERROR)
            try:
                case = babi_harness.story_case(samples[index])
            except babi_harness.UnmatchedSentence as exc:
                raise CommandError(str(exc), returncode=DATASET_ERROR) from exc
        else:
            tuples = self._re3_tuples(cleaned['data'] or re3_harness.default_data_path())
            if index >= len(tuples):
                raise CommandError(f"no tuple {index}; the file holds {len(tuples)}", returncode=DATASET_ERROR)
            item = tuples[index]
            part = cleaned['part'] or 'premise'
            premise = item.alt_premise if part.startswith('alt_') else item.premise
            case = re3_harness.story_case(getattr(item, part), premise)
        try:
            bundle = render(case, style, preset, exemplar)
        except PromptError as exc:
            raise CommandError(str(exc), returncode=DATASET_ERROR) from exc
        self.stdout.write(bundle.request_text, ending='')
