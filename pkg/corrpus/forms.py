# corrpus/forms.py
from pathlib import Path

from django import forms

from .choices import STYLE_FLAGS, Backend, PromptStyle, Task


# Which text of a Re3 tuple to render.
RE3_PARTS = [
    ('premise', 'Premise'),
    ('alt_premise', 'Alternative premise'),
    ('story', 'Story'),
    ('alt_story', 'Alternative story'),
]


def _style_choices():
    return [(flag, style.label) for flag, style in STYLE_FLAGS.items()]


class RunForm(forms.Form):
    """
    Flags shared by the benchmark runs. Blank optional fields fall back to
    settings.CORRPUS.
    """
    style = forms.ChoiceField(choices=_style_choices)
    backend = forms.ChoiceField(choices=Backend.choices)
    data = forms.CharField(required=False)
    limit = forms.IntegerField(min_value=1, required=False)
    out = forms.CharField(required=False)
    cassette = forms.CharField(required=False)
    model = forms.CharField(required=False, max_length=200)
    exemplar_dir = forms.CharField(required=False)
    max_in_flight = forms.IntegerField(min_value=1, required=False)

    def clean_style(self):
        return STYLE_FLAGS[self.cleaned_data['style']]

    def clean_backend(self):
        return Backend(self.cleaned_data['backend'])

    def _optional_path(self, name):
        value = self.cleaned_data.get(name)
        return Path(value) if value else None

    def clean_data(self):
        return self._optional_path('data')

    def clean_out(self):
        return self._optional_path('out')

    def clean_cassette(self):
        return self._optional_path('cassette')

    def clean_exemplar_dir(self):
        return self._optional_path('exemplar_dir')


class BabiRunForm(RunForm):
    pass


class Re3RunForm(RunForm):
    scorer = forms.CharField(required=False, help_text="'mock' or the URL of an entailment service")
    samples = forms.IntegerField(min_value=1, required=False)

    def clean(self):
        cleaned_data = super().clean()
        if cleaned_data.get('style') and not cleaned_data['style'].is_code:
            self.add_error('style', 'Re3 extraction needs one of the code styles.')
        if cleaned_data.get('backend') is Backend.ORACLE:
            self.add_error('backend', 'The oracle backend only knows bAbI stories.')
        return cleaned_data


class OracleSolveForm(forms.Form):
    data = forms.CharField(required=False)
    limit = forms.IntegerField(min_value=1, required=False)

    def clean_data(self):
        value = self.cleaned_data.get('data')
        return Path(value) if value else None


class PromptDumpForm(forms.Form):
    task = forms.ChoiceField(choices=Task.choices)
    style = forms.ChoiceField(choices=_style_choices)
    data = forms.CharField(required=False)
    index = forms.IntegerField(min_value=0, required=False)
    part = forms.ChoiceField(choices=RE3_PARTS, required=False)
    exemplar = forms.BooleanField(required=False)
    dump_ast = forms.BooleanField(required=False)
    program = forms.CharField(required=False)
    exemplar_dir = forms.CharField(required=False)

    def clean_style(self):
        return STYLE_FLAGS[self.cleaned_data['style']]

    def clean_data(self):
        value = self.cleaned_data.get('data')
        return Path(value) if value else None

    def clean(self):
        cleaned_data = super().clean()
        if cleaned_data.get('dump_ast') and not cleaned_data.get('program'):
            self.add_error('program', '--dump-ast needs --program FILE.')
        if cleaned_data.get('task') == Task.RE3 and cleaned_data.get('style') is PromptStyle.NATURAL_LANGUAGE:
            self.add_error('style', 'There is no natural-language prompt for Re3.')
        return cleaned_data
