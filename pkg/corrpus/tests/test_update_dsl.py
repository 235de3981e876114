import random

from django.test import SimpleTestCase

from corrpus.babi_harness import declare_entities, generate_synthetic, oracle_solve
from corrpus.choices import PromptStyle
from corrpus.update_dsl import (
    BABI_TABLE,
    RE3_TABLE,
    AbstractCall,
    ArityError,
    FaultKind,
    ListAppend,
    ListRemove,
    Literal,
    MapAssign,
    Pass,
    PathRef,
    Print,
    ProgramSyntaxError,
    ScalarAssign,
    UnknownFunction,
    dump_ast,
    evaluate,
    expand_call,
    extract_answer,
    parse_program,
    pretty_print,
)
from corrpus.world_model import BABI_TASK2, RE3_CHARACTER, Unanswerable, init_world

COMMENT = PromptStyle.COMMENT_ONLY
SPECIFIC = PromptStyle.SPECIFIC_FUNCTIONS
ABSTRACT = PromptStyle.ABSTRACT_FUNCTIONS

ENTITIES = [('character', 'Mary'), ('character', 'Sandra'), ('object', 'football')]


def babi_world():
    return init_world(BABI_TASK2, ENTITIES)


def lines(*rows):
    return '\n'.join(rows) + '\n'


class ParseTests(SimpleTestCase):
    def test_single_assignment(self):
        program = parse_program('        self.Sandra.location = "bedroom"\n', COMMENT, BABI_TASK2)
        self.assertEqual(len(program.groups), 1)
        self.assertEqual(program.groups[0].label, '')
        self.assertEqual(
            program.groups[0].statements,
            [ScalarAssign(PathRef('Sandra', 'location'), Literal('bedroom'))],
        )
        self.assertTrue(program.accepted)

    def test_comment_groups_and_question(self):
        program = parse_program(lines(
            '        ## Mary moved to the bathroom.',
            '        self.Mary.location = "bathroom"',
            '        ## Mary got the football there.',
            '        self.Mary.inventory.append("football")',
            '        self.football.location = self.Mary.location',
            '        ## Question: Where is the football?',
            '        print(self.football.location)',
        ), COMMENT, BABI_TASK2)
        self.assertEqual([group.label for group in program.groups], [
            'Mary moved to the bathroom.', 'Mary got the football there.',
        ])
        self.assertEqual(program.groups[1].statements[1].value, PathRef('Mary', 'location'))
        self.assertEqual(program.trailing_label, 'Question: Where is the football?')
        self.assertEqual(program.trailing, [Print(PathRef('football', 'location'))])

    def test_specific_functions(self):
        program = parse_program(lines(
            '        self.mary_moved_to_the_bathroom()',
            '        self.answer()',
            '',
            '    def mary_moved_to_the_bathroom(self):',
            '        self.Mary.location = "bathroom"',
            '',
            '    def answer(self):',
            '        print(self.Mary.location)',
        ), SPECIFIC, BABI_TASK2)
        self.assertEqual([group.label for group in program.groups], ['mary_moved_to_the_bathroom'])
        self.assertEqual(program.trailing_label, 'answer')
        self.assertEqual(program.trailing, [Print(PathRef('Mary', 'location'))])
        self.assertTrue(program.accepted)

    def test_story_calls_set_the_order(self):
        program = parse_program(lines(
            '        self.sandra_went_to_the_garden()',
            '        self.sandra_journeyed_to_the_office()',
            '',
            '    def sandra_journeyed_to_the_office(self):',
            '        self.Sandra.location = "office"',
            '',
            '    def sandra_went_to_the_garden(self):',
            '        self.Sandra.location = "garden"',
        ), SPECIFIC, BABI_TASK2)
        self.assertEqual([group.label for group in program.groups], [
            'sandra_went_to_the_garden', 'sandra_journeyed_to_the_office',
        ])
        self.assertEqual(program.faults, [])
        evaluation = evaluate(program, babi_world(), BABI_TABLE)
        self.assertEqual(evaluation.world.entity('Sandra').get('location'), 'office')

    def test_uncalled_function_is_dropped(self):
        program = parse_program(lines(
            '        self.sandra_went_to_the_garden()',
            '',
            '    def sandra_went_to_the_garden(self):',
            '        self.Sandra.location = "garden"',
            '',
            '    def sandra_went_to_the_kitchen(self):',
            '        self.Sandra.location = "kitchen"',
        ), SPECIFIC, BABI_TASK2)
        self.assertEqual([group.label for group in program.groups], ['sandra_went_to_the_garden'])
        self.assertEqual([(fault.kind, fault.line) for fault in program.faults], [
            (FaultKind.UNCALLED_FUNCTION, 6),
        ])
        evaluation = evaluate(program, babi_world(), BABI_TABLE)
        self.assertEqual(evaluation.world.entity('Sandra').get('location'), 'garden')

    def test_calls_only_belong_to_the_abstract_dialect(self):
        program = parse_program(lines(
            '        ## Sandra went to the bedroom.',
            '        go(character=Sandra, destination=bedroom)',
        ), COMMENT, BABI_TASK2)
        self.assertEqual([(fault.kind, fault.line) for fault in program.faults], [(FaultKind.UNSUPPORTED, 2)])
        self.assertEqual(program.groups[0].statements, [])
        evaluation = evaluate(program, babi_world(), BABI_TABLE)
        self.assertIsNone(evaluation.world.entity('Sandra').get('location'))

    def test_abstract_calls(self):
        program = parse_program(lines(
            '        ## Mary moved to the bathroom.',
            '        go(character=Mary, destination=bathroom)',
            '        self.grab("Mary", "football")',
        ), ABSTRACT, BABI_TASK2)
        first, second = program.groups[0].statements
        self.assertEqual(first, AbstractCall('go', kwargs=(
            ('character', Literal('Mary')), ('destination', Literal('bathroom')),
        )))
        self.assertEqual(second, AbstractCall('grab', args=(Literal('Mary'), Literal('football')), method=True))

    def test_values(self):
        program = parse_program(lines(
            '        self.Joan.age.append(42)',
            '        self.Joan.relations["son"] = self.Jason',
            '        self.Joan.name = None',
        ), COMMENT, RE3_CHARACTER)
        age, relation, name = program.groups[0].statements
        self.assertEqual(age, ListAppend(PathRef('Joan', 'age'), Literal('42')))
        self.assertEqual(relation, MapAssign(PathRef('Joan', 'relations'), 'son', PathRef('Jason')))
        self.assertEqual(name, ScalarAssign(PathRef('Joan', 'name'), Literal(None)))

    def test_line_faults_are_isolated(self):
        program = parse_program(lines(
            '        ## Mary moved to the bathroom.',
            '        self.Mary.location = ',
            '        import os',
            '        self.Mary.mood = "happy"',
            '        self.Mary.location.append("x")',
            '        x = 1',
            '        self.Mary.location = "bathroom"',
        ), COMMENT, BABI_TASK2)
        self.assertEqual([fault.kind for fault in program.faults], [
            FaultKind.SYNTAX,
            FaultKind.UNEXPECTED_STRUCTURE,
            FaultKind.UNKNOWN_ATTRIBUTE,
            FaultKind.KIND_MISMATCH,
            FaultKind.UNSUPPORTED,
        ])
        self.assertEqual([fault.line for fault in program.faults], [2, 3, 4, 5, 6])
        self.assertEqual(program.groups[0].statements, [
            ScalarAssign(PathRef('Mary', 'location'), Literal('bathroom')),
        ])
        self.assertFalse(program.accepted)

    def test_statement_outside_a_function_block(self):
        program = parse_program('        self.Mary.location = "x"\n', SPECIFIC, BABI_TASK2)
        self.assertEqual(program.groups, [])
        self.assertEqual(program.faults[0].kind, FaultKind.UNEXPECTED_STRUCTURE)

    def test_unterminated_string_is_fatal(self):
        with self.assertRaises(ProgramSyntaxError) as caught:
            parse_program(lines(
                '        ## Mary moved.',
                '        self.Mary.location = "bath',
            ), COMMENT, BABI_TASK2)
        self.assertEqual(caught.exception.line, 2)

    def test_natural_language_answer(self):
        program = parse_program('garden\n', PromptStyle.NATURAL_LANGUAGE, BABI_TASK2)
        self.assertEqual(program.trailing, [Print(Literal('garden'))])
        self.assertEqual(pretty_print(program, PromptStyle.NATURAL_LANGUAGE), 'garden\n')

    def test_dump_ast(self):
        program = parse_program(lines(
            '        ## Sandra journeyed to the bedroom.',
            '        self.Sandra.location = "bedroom"',
            '        self.Sandra.mood = "calm"',
            '        ## Question: Where is Sandra?',
            '        print(self.Sandra.location)',
        ), COMMENT, BABI_TASK2)
        self.assertEqual(dump_ast(program), lines(
            'group 1 "Sandra journeyed to the bedroom."',
            '  L2 ScalarAssign self.Sandra.location = "bedroom"',
            'trailing "Question: Where is Sandra?"',
            '  L5 Print print(self.Sandra.location)',
            "fault L3 unknown-attribute: no schema declares 'mood'",
        ))


class RoundTripTests(SimpleTestCase):
    def test_pretty_print_is_a_fixed_point(self):
        for seed in range(200):
            sample = generate_synthetic(seed)
            for style in (COMMENT, SPECIFIC, ABSTRACT):
                with self.subTest(seed=seed, style=style):
                    program = oracle_solve(sample, style=style).program
                    text = pretty_print(program, style)
                    reparsed = parse_program(text, style, BABI_TASK2)
                    self.assertEqual(reparsed, program)
                    self.assertEqual(pretty_print(reparsed, style), text)

    def test_specific_style_empty_blocks_use_pass(self):
        program = parse_program(lines(
            '    def nothing_happens(self):',
            '        pass',
        ), SPECIFIC, BABI_TASK2)
        self.assertEqual(program.groups[0].statements, [Pass()])
        self.assertIn('        pass\n', pretty_print(program, SPECIFIC))


class EvaluateTests(SimpleTestCase):
    def run_program(self, source, style=COMMENT, world=None, table=BABI_TABLE):
        program = parse_program(source, style, BABI_TASK2)
        return evaluate(program, world or babi_world(), table)

    def test_groups_advance_the_world(self):
        evaluation = self.run_program(lines(
            '        ## one',
            '        self.Mary.location = "bathroom"',
            '        ## two',
            '        pass',
        ))
        self.assertEqual(evaluation.world.step_index, 2)
        self.assertEqual(evaluation.world.entity('Mary').get('location'), 'bathroom')

    def test_input_world_is_untouched(self):
        world = babi_world()
        self.run_program('        self.Mary.location = "bathroom"\n', world=world)
        self.assertIsNone(world.entity('Mary').get('location'))

    def test_prints_read_the_final_state(self):
        evaluation = self.run_program(lines(
            '        self.Mary.location = "bathroom"',
            '        ## Question: Where is Mary?',
            '        print(self.Mary.location)',
            '        print("done")',
        ))
        self.assertEqual(evaluation.printed, ['bathroom', 'done'])
        self.assertEqual(extract_answer(evaluation), 'done')

    def test_path_values_resolve_when_run(self):
        evaluation = self.run_program(lines(
            '        self.Mary.location = "bathroom"',
            '        self.football.location = self.Mary.location',
            '        self.football.carrier = self.Sandra',
        ))
        football = evaluation.world.entity('football')
        self.assertEqual(football.get('location'), 'bathroom')
        self.assertEqual(football.get('carrier'), 'Sandra')
        self.assertEqual(evaluation.world.entity('Sandra').get('inventory'), ['football'])

    def test_failed_statement_has_no_effect(self):
        evaluation = self.run_program(lines(
            '        ## Mary drops what she does not hold.',
            '        self.Mary.inventory.remove("football")',
            '        self.Mary.location = "bathroom"',
        ))
        self.assertEqual([fault.kind for fault in evaluation.faults], [FaultKind.STATE_ERROR])
        self.assertEqual(evaluation.faults[0].line, 2)
        self.assertEqual(evaluation.world.entity('Mary').get('location'), 'bathroom')

    def test_unknown_entities_are_declared(self):
        evaluation = self.run_program(lines(
            '        self.Bob.inventory.append("apple")',
            '        self.Bob.location = "office"',
        ))
        world = evaluation.world
        self.assertEqual(world.entity('Bob').kind, 'character')
        self.assertEqual(world.entity('apple').kind, 'object')
        self.assertEqual(world.entity('apple').get('carrier'), 'Bob')
        self.assertEqual(
            [fault.kind for fault in evaluation.faults],
            [FaultKind.AUTO_DECLARED, FaultKind.AUTO_DECLARED],
        )
        self.assertFalse(any(fault.skipped for fault in evaluation.faults))

    def test_auto_declared_default_kind(self):
        evaluation = self.run_program('        self.ball.location = "office"\n')
        self.assertEqual(evaluation.world.entity('ball').kind, 'object')

    def test_extract_answer_falls_back_to_the_query(self):
        evaluation = self.run_program(lines(
            '        self.Mary.location = "garden"',
            '        self.Mary.inventory.append("football")',
        ))
        self.assertEqual(extract_answer(evaluation, 'football'), 'garden')
        with self.assertRaises(Unanswerable):
            extract_answer(evaluation)
        with self.assertRaises(Unanswerable):
            extract_answer(self.run_program('        pass\n'), 'football')

    def test_printing_an_unset_value_is_a_fault(self):
        evaluation = self.run_program(lines(
            '        self.Mary.location = "garden"',
            '        self.Mary.inventory.append("football")',
            '        ## Question: Where is Sandra?',
            '        print(self.Sandra.location)',
        ))
        self.assertEqual(evaluation.printed, [])
        self.assertEqual([(fault.kind, fault.line) for fault in evaluation.faults], [(FaultKind.UNSET_VALUE, 4)])
        self.assertEqual(extract_answer(evaluation, 'football'), 'garden')
        with self.assertRaises(Unanswerable):
            extract_answer(evaluation)


class AbstractFunctionTests(SimpleTestCase):
    def test_go_moves_carried_objects(self):
        world = babi_world().append_list('Mary', 'inventory', 'football')
        call = AbstractCall('go', kwargs=(('character', Literal('Mary')), ('destination', Literal('garden'))))
        self.assertEqual(expand_call(call, world, BABI_TABLE), [
            ScalarAssign(PathRef('Mary', 'location'), Literal('garden')),
            ScalarAssign(PathRef('football', 'location'), Literal('garden')),
        ])

    def test_drop_only_removes_carried_objects(self):
        world = babi_world().set_scalar('Mary', 'location', 'office')
        call = AbstractCall('drop', args=(Literal('Mary'), Literal('football')))
        self.assertEqual(expand_call(call, world, BABI_TABLE), [
            ScalarAssign(PathRef('football', 'location'), Literal('office')),
        ])
        world.append_list('Mary', 'inventory', 'football')
        self.assertEqual(
            expand_call(call, world, BABI_TABLE)[0],
            ListRemove(PathRef('Mary', 'inventory'), Literal('football')),
        )

    def test_call_errors(self):
        world = babi_world()
        with self.assertRaises(UnknownFunction):
            expand_call(AbstractCall('fly', args=(Literal('Mary'),)), world, BABI_TABLE)
        with self.assertRaises(ArityError):
            expand_call(AbstractCall('go', args=(Literal('Mary'),)), world, BABI_TABLE)
        with self.assertRaises(ArityError):
            expand_call(AbstractCall('go', args=(Literal('Mary'), Literal('x'), Literal('y'))), world, BABI_TABLE)

    def test_call_faults_do_not_stop_evaluation(self):
        program = parse_program(lines(
            '        ## Mary flies.',
            '        fly(character=Mary)',
            '        go(character=Mary)',
            '        go(character=Mary, destination=garden)',
        ), ABSTRACT, BABI_TASK2)
        evaluation = evaluate(program, babi_world(), BABI_TABLE)
        self.assertEqual([fault.kind for fault in evaluation.faults], [FaultKind.UNKNOWN_FUNCTION, FaultKind.ARITY])
        self.assertEqual(evaluation.world.entity('Mary').get('location'), 'garden')

    def test_re3_setters(self):
        program = parse_program(lines(
            '        ## Brent Westfall is Joan\'s husband.',
            '        set_relation(character=Joan_Westfall, relation="husband", other_character=Brent_Westfall)',
            '        set_age(character=Joan_Westfall, age="young")',
        ), ABSTRACT, RE3_CHARACTER)
        world = init_world(RE3_CHARACTER, [('character', 'Joan_Westfall'), ('character', 'Brent_Westfall')])
        evaluation = evaluate(program, world, RE3_TABLE)
        joan = evaluation.world.entity('Joan_Westfall')
        self.assertEqual(joan.get('relations'), {'husband': 'Brent_Westfall'})
        self.assertEqual(joan.get('age'), ['young'])
        self.assertEqual(evaluation.faults, [])


class OracleEquivalenceTests(SimpleTestCase):
    def check(self, sample, style):
        solution = oracle_solve(sample, style=style)
        world = init_world(BABI_TASK2, declare_entities(sample))
        evaluation = evaluate(solution.program, world, BABI_TABLE)
        self.assertEqual(evaluation.faults, [])
        self.assertEqual(extract_answer(evaluation), solution.answer)
        return evaluation

    def test_direct_programs_match_the_oracle(self):
        for seed in range(10_000):
            sample = generate_synthetic(seed)
            evaluation = self.check(sample, COMMENT)
            self.assertEqual(evaluation.world.check_duality(), [], seed)

    def test_abstract_programs_match_the_oracle(self):
        rng = random.Random(7)
        for seed in rng.sample(range(10_000), 1000):
            self.check(generate_synthetic(seed, length=rng.randint(2, 20)), ABSTRACT)
