from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase

from corrpus.babi_harness import BabiSample, oracle_solve
from corrpus.choices import PromptStyle
from corrpus.prompt_forge import (
    EmptyCompletion,
    PromptError,
    SlugError,
    StoryCase,
    completion_slice,
    function_names,
    load_exemplar,
    render,
    render_completion,
    slugify,
    split_sentences,
)
from corrpus.update_dsl import parse_program
from corrpus.world_model import BABI_TASK2, RE3_CHARACTER

PROMPTS = Path(settings.CORRPUS['ASSETS_DIR']) / 'prompts'
PRESETS = {'babi': BABI_TASK2, 're3': RE3_CHARACTER}
ASSET_SETS = [
    ('babi', PromptStyle.COMMENT_ONLY),
    ('babi', PromptStyle.SPECIFIC_FUNCTIONS),
    ('babi', PromptStyle.ABSTRACT_FUNCTIONS),
    ('babi', PromptStyle.NATURAL_LANGUAGE),
    ('re3', PromptStyle.COMMENT_ONLY),
    ('re3', PromptStyle.SPECIFIC_FUNCTIONS),
    ('re3', PromptStyle.ABSTRACT_FUNCTIONS),
]

TARGET = StoryCase(
    sentences=('Daniel went to the office.', 'Daniel picked up the milk there.'),
    entities=(('character', 'Daniel'), ('object', 'milk')),
    query='Where is the milk?',
    answer='office',
)


def bundle_for(style, case=TARGET):
    return render(case, style, BABI_TASK2, load_exemplar('babi', style))


class GoldenPromptTests(SimpleTestCase):
    def test_exemplar_renderings_match_golden_files(self):
        for task, style in ASSET_SETS:
            with self.subTest(task=task, style=style):
                exemplar = load_exemplar(task, style)
                bundle = render(exemplar.case, style, PRESETS[task], exemplar)
                golden = (PROMPTS / task / style / 'golden.txt').read_text(encoding='utf-8')
                self.assertEqual(bundle.exemplar, golden)

    def test_re3_goldens_keep_the_published_listings(self):
        goldens = {
            style: (PROMPTS / 're3' / style / 'golden.txt').read_text(encoding='utf-8')
            for style in (PromptStyle.COMMENT_ONLY, PromptStyle.SPECIFIC_FUNCTIONS, PromptStyle.ABSTRACT_FUNCTIONS)
        }
        self.assertIn(
            "        self.Jason_Westfall.relations['sister_in_laws'] = 'Joan_Westfall'\n",
            goldens[PromptStyle.COMMENT_ONLY],
        )
        self.assertIn(
            "        self.Jason_Westfall.relations['sister_in_laws'] = 'Joan_Westfall'\n",
            goldens[PromptStyle.SPECIFIC_FUNCTIONS],
        )
        abstract = goldens[PromptStyle.ABSTRACT_FUNCTIONS]
        self.assertIn("        self.set_relation(self.Jason_Westfall, 'sister_in_laws', self.Joan_Westfall)\n", abstract)
        self.assertIn("        self.set_relation(self.Joan_Westfall, 'brother_in_laws', self.Jason_Westfall)\n", abstract)
        self.assertIn('        self.set_gender(self.Joan_Westfall, "female")\n', abstract)
        self.assertFalse(any(line != line.rstrip() for golden in goldens.values() for line in golden.split('\n')))

    def test_specific_style_has_its_own_segmentation(self):
        shared = load_exemplar('re3', PromptStyle.COMMENT_ONLY).case
        specific = load_exemplar('re3', PromptStyle.SPECIFIC_FUNCTIONS).case
        self.assertEqual(len(shared.sentences), 10)
        self.assertEqual(len(specific.sentences), 12)
        self.assertEqual(' '.join(shared.sentences), ' '.join(specific.sentences))
        self.assertEqual(shared.entities, specific.entities)

    def test_request_is_exemplar_then_target(self):
        for style in PromptStyle:
            with self.subTest(style=style):
                bundle = bundle_for(style)
                self.assertTrue(bundle.request_text.startswith(bundle.exemplar))
                self.assertTrue(bundle.request_text.endswith(bundle.target_prefix))
                self.assertIn('Daniel picked up the milk there.', bundle.target_prefix)

    def test_code_prefix_shape(self):
        bundle = bundle_for(PromptStyle.COMMENT_ONLY)
        self.assertTrue(bundle.target_prefix.startswith(
            '## Daniel went to the office.\n'
            '## Daniel picked up the milk there.\n'
            '## Question: Where is the milk?\n'
            "## Create a world model state to track each character's location and inventory "
            "and each object's location and carrier.\n"
        ))
        self.assertIn("        self.Daniel = character('Daniel')\n", bundle.target_prefix)
        self.assertIn("        self.milk = object('milk')\n", bundle.target_prefix)
        self.assertTrue(bundle.target_prefix.endswith('    def story(self):\n'))
        self.assertEqual(bundle.program_head, '')

    def test_abstract_prefix_lists_the_functions(self):
        bundle = bundle_for(PromptStyle.ABSTRACT_FUNCTIONS)
        self.assertIn('    def go(self, character, destination):\n', bundle.target_prefix)
        self.assertIn('    def drop(self, character, object):\n', bundle.target_prefix)

    def test_specific_prefix_opens_the_first_block(self):
        bundle = bundle_for(PromptStyle.SPECIFIC_FUNCTIONS)
        self.assertEqual(bundle.program_head, (
            '        self.daniel_went_to_the_office()\n'
            '        self.daniel_picked_up_the_milk_there()\n'
            '        self.answer()\n'
            '\n'
            '    def daniel_went_to_the_office(self):\n'
        ))
        self.assertTrue(bundle.target_prefix.endswith(bundle.program_head))

    def test_natural_prefix(self):
        bundle = bundle_for(PromptStyle.NATURAL_LANGUAGE)
        self.assertEqual(bundle.target_prefix, (
            'Daniel went to the office.\n'
            'Daniel picked up the milk there.\n'
            'Question: Where is the milk?\n'
            'Answer:'
        ))

    def test_only_the_natural_style_is_plain_text(self):
        for style in PromptStyle:
            with self.subTest(style=style):
                bundle = bundle_for(style)
                self.assertEqual(style.is_code, 'class World:' in bundle.target_prefix)
        self.assertEqual([style for style in PromptStyle if not style.is_code], [PromptStyle.NATURAL_LANGUAGE])

    def test_re3_prefix_has_no_question(self):
        case = StoryCase(('Ann Lee is tall.',), (('character', 'Ann_Lee'),))
        exemplar = load_exemplar('re3', PromptStyle.COMMENT_ONLY)
        bundle = render(case, PromptStyle.COMMENT_ONLY, RE3_CHARACTER, exemplar)
        self.assertNotIn('Question:', bundle.target_prefix)
        self.assertIn("        self.Ann_Lee = character('Ann Lee')\n", bundle.target_prefix)
        self.assertIn('        self.relations = {}\n', bundle.target_prefix)

    def test_render_errors(self):
        exemplar = load_exemplar('babi', PromptStyle.COMMENT_ONLY)
        with self.assertRaises(PromptError):
            render(TARGET, PromptStyle.ABSTRACT_FUNCTIONS, BABI_TASK2, exemplar)
        with self.assertRaises(PromptError):
            render(StoryCase(()), PromptStyle.COMMENT_ONLY, BABI_TASK2, exemplar)
        with self.assertRaises(PromptError):
            load_exemplar('re3', PromptStyle.NATURAL_LANGUAGE)


class ExemplarConsistencyTests(SimpleTestCase):
    def test_babi_exemplars_are_oracle_programs(self):
        for style in PromptStyle:
            with self.subTest(style=style):
                exemplar = load_exemplar('babi', style)
                case = exemplar.case
                sample = BabiSample(0, tuple(enumerate(case.sentences, start=1)), case.query, case.answer)
                solution = oracle_solve(sample, style=style)
                self.assertEqual(solution.answer, case.answer)
                bundle = render(case, style, BABI_TASK2, exemplar)
                self.assertEqual(render_completion(bundle, solution.program), exemplar.completion)

    def test_exemplar_programs_parse_cleanly(self):
        for task, style in ASSET_SETS:
            with self.subTest(task=task, style=style):
                exemplar = load_exemplar(task, style)
                bundle = render(exemplar.case, style, PRESETS[task], exemplar)
                program = parse_program(completion_slice(bundle, exemplar.completion), style, PRESETS[task])
                self.assertEqual(program.faults, [])


class SlugTests(SimpleTestCase):
    def test_slugify(self):
        self.assertEqual(slugify('Mary moved to the bathroom.'), 'mary_moved_to_the_bathroom')
        self.assertEqual(slugify("Brent Westfall is Joan's husband."), 'brent_westfall_is_joan_s_husband')
        self.assertEqual(
            slugify('His gaze is unfocused. his dark blue eyes brimming with tears.'),
            'his_gaze_is_unfocused_his_dark_blue_eyes_brimming_with_tears',
        )
        with self.assertRaises(SlugError):
            slugify('...')

    def test_function_names_match_the_exemplars(self):
        self.assertEqual(function_names(load_exemplar('babi', PromptStyle.SPECIFIC_FUNCTIONS).case.sentences), [
            'mary_moved_to_the_bathroom',
            'sandra_journeyed_to_the_bedroom',
            'mary_got_the_football_there',
            'john_went_to_the_kitchen',
            'mary_went_back_to_the_kitchen',
            'mary_went_back_to_the_garden',
        ])
        exemplar = load_exemplar('re3', PromptStyle.SPECIFIC_FUNCTIONS)
        golden = (PROMPTS / 're3' / PromptStyle.SPECIFIC_FUNCTIONS / 'golden.txt').read_text(encoding='utf-8')
        for name in function_names(exemplar.case.sentences):
            self.assertIn(f"    def {name}(self):\n", golden)

    def test_collisions_and_reserved_names(self):
        self.assertEqual(
            function_names(['Mary left.', 'Mary left!', 'Answer.', 'Story']),
            ['mary_left', 'mary_left_2', 'answer_2', 'story_2'],
        )

    def test_split_sentences(self):
        self.assertEqual(
            split_sentences('Joan is here. She left.\nHe cried\n--\nHis gaze is unfocused. his eyes are wet.'),
            ['Joan is here.', 'She left.', 'He cried', 'His gaze is unfocused. his eyes are wet.'],
        )


class CompletionSliceTests(SimpleTestCase):
    def test_comment_program_stops_at_a_dedent(self):
        bundle = bundle_for(PromptStyle.COMMENT_ONLY)
        raw = (
            '        ## Daniel went to the office.\n'
            '        self.Daniel.location = "office"\n'
            '\n'
            'class Next:\n'
            '        self.Daniel.location = "nowhere"\n'
        )
        self.assertEqual(completion_slice(bundle, raw), (
            '        ## Daniel went to the office.\n'
            '        self.Daniel.location = "office"\n'
        ))

    def test_echoed_prompt_is_dropped(self):
        bundle = bundle_for(PromptStyle.COMMENT_ONLY)
        program = '        self.Daniel.location = "office"\n'
        self.assertEqual(completion_slice(bundle, bundle.request_text + program), program)
        self.assertEqual(completion_slice(bundle, bundle.target_prefix + program), program)

    def test_specific_program_gets_its_head_back(self):
        bundle = bundle_for(PromptStyle.SPECIFIC_FUNCTIONS)
        raw = (
            '        self.Daniel.location = "office"\n'
            '\n'
            '    def answer(self):\n'
            '        print(self.milk.location)\n'
            '\n'
            'Mary went to the garden.\n'
        )
        sliced = completion_slice(bundle, raw)
        self.assertTrue(sliced.startswith(bundle.program_head))
        self.assertTrue(sliced.endswith('        print(self.milk.location)\n'))
        program = parse_program(sliced, PromptStyle.SPECIFIC_FUNCTIONS, BABI_TASK2)
        self.assertEqual([group.label for group in program.groups], ['daniel_went_to_the_office'])

    def test_natural_answer(self):
        bundle = bundle_for(PromptStyle.NATURAL_LANGUAGE)
        self.assertEqual(completion_slice(bundle, ' office.\nQuestion: Where is Mary?'), 'office\n')

    def test_empty_completions(self):
        for style in PromptStyle:
            with self.subTest(style=style):
                with self.assertRaises(EmptyCompletion):
                    completion_slice(bundle_for(style), '  \n ')
        with self.assertRaises(EmptyCompletion):
            completion_slice(bundle_for(PromptStyle.COMMENT_ONLY), 'class Next:\n    pass\n')

    def test_oracle_completion_round_trip(self):
        sample = BabiSample(0, tuple(enumerate(TARGET.sentences, start=1)), TARGET.query, TARGET.answer)
        for style in PromptStyle:
            with self.subTest(style=style):
                bundle = bundle_for(style)
                program = oracle_solve(sample, style=style).program
                sliced = completion_slice(bundle, render_completion(bundle, program))
                self.assertEqual(parse_program(sliced, style, BABI_TASK2), program)
