import pytest
from conftest import extractor_script, make_dialogue
from hypothesis import given, strategies as st

from accent.backends import ScriptedGenerator
from accent.core import Dialogue, EventRelationTuple, Locality, Relation, Utterance, default_relation_specs
from accent.errors import BackendError, ContractViolation
from accent.extraction import (
    ExtractionConfig,
    FormatError,
    LocalityFilter,
    build_extraction_input,
    classify_locality,
    dump_training_examples,
    extract_tuples,
    parse_extraction_output,
    prepare_training_examples,
    render_extraction_output,
    serialize_dialogue,
)

SPECS = {s.relation: s for s in default_relation_specs()}
CONFIG = ExtractionConfig()


def test_build_input_starts_with_prompt(dialogue):
    text = build_extraction_input(dialogue, SPECS[Relation.xIntent], CONFIG)
    assert text.startswith(
        "Extract event1 and event2 from the text where event2 shows PersonX's intent for event1.")
    assert text == (
        "Extract event1 and event2 from the text where event2 shows PersonX's intent for event1. "
        "A: I had an accident.\nB: That's what I like to call the most beautiful thing.")


def test_build_input_truncates_history():
    d = make_dialogue(history=[f"turn number {i}." for i in range(6)], response="final answer here.")
    text = build_extraction_input(d, SPECS[Relation.xNeed], CONFIG)
    assert "turn number 0." not in text and "turn number 1." not in text
    for i in range(2, 6):
        assert f"turn number {i}." in text
    assert text.count("\n") == 4
    assert text.endswith("B: final answer here.")
    assert build_extraction_input(d, SPECS[Relation.xNeed], CONFIG) == text


def test_serialize_keeps_own_speakers_when_unlabeled():
    d = Dialogue("x", (Utterance("system", "hi"),), Utterance("user", "hello  there"))
    cfg = ExtractionConfig(speaker_labels=None)
    assert serialize_dialogue(d, cfg) == "system: hi\nuser: hello there"


def test_config_requires_all_relations():
    with pytest.raises(ContractViolation):
        ExtractionConfig(relation_specs=default_relation_specs()[:11])
    with pytest.raises(ContractViolation):
        ExtractionConfig(max_history=0)


@pytest.mark.parametrize("raw, expected", [
    ("event1: PersonX likes to paint; event2: PersonX gets a paint brush",
     ("PersonX likes to paint", "PersonX gets a paint brush")),
    ("  EVENT1 :PersonX runs ;Event2:  PersonX sweats  ", ("PersonX runs", "PersonX sweats")),
    ("None", None),
    (" none \n", None),
])
def test_parse_examples(raw, expected):
    assert parse_extraction_output(raw) == expected


MALFORMED = [
    "event1: PersonX runs",
    "event2: PersonX sweats",
    "",
    "   ",
    "event1: ; event2: PersonX sweats",
    "event1: PersonX runs; event2: ",
    "event1: PersonX runs; event2:",
    "event2: a; event1: b",
    "event1 PersonX runs; event2 PersonX sweats",
    "PersonX runs; PersonX sweats",
    "None.",
    "Nothing",
    "event1: a; b; event2: c",
    "event1: a\nevent2: b",
    "event1: a; event2: b\nevent1: c; event2: d",
    "head: a; tail: b",
    "event1 - a; event2 - b",
    "event1: a, event2: b",
    "event3: a; event2: b",
    "event1: a;; event2: b",
]


@pytest.mark.parametrize("raw", MALFORMED)
def test_parse_malformed(raw):
    out = parse_extraction_output(raw)
    assert isinstance(out, FormatError)
    assert out.raw == raw


event_text = st.text(
    alphabet=st.characters(blacklist_characters=";\n\r", blacklist_categories=("Cs", "Cc", "Zl", "Zp")),
    min_size=1, max_size=40,
).map(str.strip).filter(lambda s: s and "event1:" not in s.lower() and "event2:" not in s.lower())


@given(event_text, event_text)
def test_render_parse_round_trip(head, tail):
    assert parse_extraction_output(render_extraction_output(head, tail)) == (head, tail)


def test_extract_all_none(dialogue):
    gen = ScriptedGenerator(extractor_script(dialogue, {}))
    assert extract_tuples(dialogue, gen, CONFIG) == []
    assert len(gen.calls) == 12


def test_extract_single_relation(dialogue):
    script = extractor_script(dialogue, {
        Relation.xEffect: "event1: PersonX had an accident; event2: PersonX calls it beautiful"})
    gen = ScriptedGenerator(script)
    out = extract_tuples(dialogue, gen, CONFIG)
    assert [t.relation for t in out] == [Relation.xEffect]
    assert out[0].head == "PersonX had an accident"
    assert out[0].locality is Locality.Pair


def test_extract_counts_match_parse_oracle(dialogue):
    answers = {
        Relation.xIntent: "event1: PersonX", Relation.xNeed: "garbage", Relation.IsAfter: "event2: x; event1: y",
        Relation.xReact: "event1: PersonX calls it beautiful; event2: PersonX is happy",
        Relation.HasSubEvent: "event1: PersonX had an accident; event2: PersonX gets hurt",
    }
    script = extractor_script(dialogue, answers)
    oracle = sum(isinstance(parse_extraction_output(v[0]), tuple) for v in script.values())
    out = extract_tuples(dialogue, ScriptedGenerator(script), CONFIG)
    assert len(out) == oracle == 2
    assert [t.relation for t in out] == [Relation.xReact, Relation.HasSubEvent]


def test_extract_requests_in_relation_order(dialogue):
    gen = ScriptedGenerator(extractor_script(dialogue, {}))
    extract_tuples(dialogue, gen, CONFIG)
    expected = [build_extraction_input(dialogue, s, CONFIG) for s in CONFIG.relation_specs]
    assert [c.input_text for c in gen.calls] == expected
    assert all(c.num_return_sequences == 1 for c in gen.calls)


def test_extract_backend_error_names_relation(dialogue):
    script = extractor_script(dialogue, {})
    del script[build_extraction_input(dialogue, SPECS[Relation.oReact], CONFIG)]
    with pytest.raises(BackendError) as info:
        extract_tuples(dialogue, ScriptedGenerator(script), CONFIG)
    assert info.value.relation is Relation.oReact
    assert "oReact" in str(info.value)


PAIR_DIALOGUE = make_dialogue(history=["I went hiking in the mountains."],
                              response="My legs are so sore and tired now.")


@pytest.mark.parametrize("head, tail, expected", [
    ("PersonX legs are sore", "PersonX tired now", Locality.Single),
    ("PersonX went hiking in the mountains", "PersonX legs are sore", Locality.Pair),
    ("PersonX legs are sore", "PersonX went hiking", Locality.Pair),
    ("PersonX buys a violin", "PersonX legs are sore", Locality.External),
    ("PersonX buys a violin", "PersonX plays music", Locality.External),
])
def test_classify_locality(head, tail, expected):
    tup = EventRelationTuple(head, Relation.xEffect, tail)
    assert classify_locality(tup, PAIR_DIALOGUE) is expected


def test_classify_locality_threshold():
    tup = EventRelationTuple("PersonX legs sore violin", Relation.xEffect, "PersonX tired")
    # 2 of 3 content words of the head occur in the response
    assert classify_locality(tup, PAIR_DIALOGUE, 0.6) is Locality.Single
    assert classify_locality(tup, PAIR_DIALOGUE, 0.7) is Locality.External
    with pytest.raises(ContractViolation):
        classify_locality(tup, PAIR_DIALOGUE, 0.0)


def _corpus(n=10):
    dialogues = [make_dialogue(f"d{i}", history=[f"I walked my dog {i} times."],
                               response=f"The dog slept for {i} hours after the walk.") for i in range(n)]
    return dialogues


def test_prepare_counts_by_construction():
    dialogues = _corpus(10)
    gold = {
        "d0": [EventRelationTuple("PersonX walks the dog", Relation.xNeed, "PersonX has a leash")],
        "d1": [EventRelationTuple("PersonX walks the dog", Relation.xNeed, "PersonX finds the dog")],
    }
    samples = [(d, gold.get(d.id, [])) for d in dialogues]
    result = prepare_training_examples(samples, CONFIG, negatives_per_relation=5, seed=3)
    xneed = [e for e in result.examples if e.relation is Relation.xNeed]
    # oracle: 2 positives + 5 negatives
    assert len(xneed) == 7
    assert sum(e.is_negative for e in xneed) == 5
    assert {e.target_text for e in xneed if not e.is_negative} == {
        "event1: PersonX walks the dog; event2: PersonX has a leash",
        "event1: PersonX walks the dog; event2: PersonX finds the dog"}
    neg_sources = {e.source_text for e in xneed if e.is_negative}
    assert not any("walked my dog 0 times" in s or "walked my dog 1 times" in s for s in neg_sources)
    for rel in Relation:
        if rel is not Relation.xNeed:
            assert result.counts()[rel] == 5
    assert result.warnings == 0


def test_prepare_zero_negatives():
    dialogues = _corpus(3)
    gold = {"d0": [EventRelationTuple("PersonX walks", Relation.xWant, "PersonX rests")]}
    result = prepare_training_examples([(d, gold.get(d.id, [])) for d in dialogues], CONFIG, 0)
    assert len(result.examples) == 1 and not result.examples[0].is_negative


def test_prepare_locality_filter():
    d = PAIR_DIALOGUE
    single = EventRelationTuple("PersonX legs are sore", Relation.xEffect, "PersonX tired now", Locality.Single)
    unlabeled = EventRelationTuple("PersonX legs are sore", Relation.xReact, "PersonX tired now")
    samples = [(d, [single, unlabeled])]
    res = prepare_training_examples(samples, CONFIG, 0, LocalityFilter.PairOnly)
    assert res.examples == []
    res = prepare_training_examples(samples, CONFIG, 0, LocalityFilter.SingleOnly)
    assert len(res.examples) == 2


def test_prepare_shortfall_is_reported():
    dialogues = _corpus(3)
    res = prepare_training_examples([(d, []) for d in dialogues], CONFIG, 5)
    assert all(n == 2 for n in res.shortfall.values())
    assert res.warnings == 12
    assert len(res.examples) == 36


def test_prepare_seed_determinism():
    dialogues = _corpus(12)
    samples = [(d, []) for d in dialogues]
    a = dump_training_examples(prepare_training_examples(samples, CONFIG, 5, seed=7).examples)
    b = dump_training_examples(prepare_training_examples(samples, CONFIG, 5, seed=7).examples)
    c = dump_training_examples(prepare_training_examples(samples, CONFIG, 5, seed=8).examples)
    assert a == b
    assert a != c


def test_prepare_rejects_negative_count():
    with pytest.raises(ContractViolation):
        prepare_training_examples([], CONFIG, -1)
