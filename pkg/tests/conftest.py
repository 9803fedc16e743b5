import pytest

from accent.backends import HashEmbedder, ScriptedGenerator
from accent.core import Dialogue, Relation, Utterance, default_relation_specs
from accent.extraction import ExtractionConfig, build_extraction_input, render_extraction_output


def make_dialogue(did="d1", history=("I had an accident.",), response="That's what I like to call the most beautiful thing.",
                  system=None):
    speakers = "AB"
    turns = list(history) + [response]
    utts = [Utterance(speakers[(i - len(turns) + 1) % 2], t) for i, t in enumerate(turns)]
    return Dialogue(did, tuple(utts[:-1]), utts[-1], system=system)


def extractor_script(dialogue, answers, config=None):
    """Script an extractor: ``answers`` maps Relation -> raw output; others answer 'None'."""
    config = config or ExtractionConfig()
    script = {}
    for spec in config.relation_specs:
        script[build_extraction_input(dialogue, spec, config)] = [answers.get(spec.relation, "None")]
    return script


@pytest.fixture
def dialogue():
    return make_dialogue()


@pytest.fixture
def embedder():
    return HashEmbedder()


@pytest.fixture
def specs():
    return default_relation_specs()


__all__ = ["make_dialogue", "extractor_script", "render_extraction_output", "Relation", "ScriptedGenerator"]
