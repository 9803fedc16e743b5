"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line to the terminal
(bypassing capture) so ``pytest -v`` shows the verdicts inline. Criterion 11
needs real model weights and annotated data and is skipped without them.
"""

import json
import math
import os
import random
import string
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from conftest import extractor_script, make_dialogue
from test_extraction import MALFORMED

from accent.backends import HashEmbedder, ScriptedGenerator
from accent.cli import main
from accent.compatibility import compatibility_score
from accent.core import RELATIONS, EventRelationTuple, Relation
from accent.data_io import HEADER_KEY, dialogue_to_json, dumps
from accent.extraction import (
    ExtractionConfig, FormatError, extract_tuples, parse_extraction_output, render_extraction_output,
)
from accent.metrics import average_ranks, pearson, roc_auc, spearman
from accent.pipeline import PipelineConfig, score_response
from accent.search import ConceptSet, StaticCSKB, search_tuples
from accent.text import content_words

VOCAB = ("run walk eat cook pizza dog cat park rain storm music guitar piano school exam test "
         "friend party gift birthday car road trip beach sun swim tired happy sad angry hungry "
         "sleep dream book read write letter phone call money bank job work boss office coffee "
         "tea garden flower tree river boat fish lake mountain hike snow cold warm").split()


@pytest.fixture
def verdict(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    @contextmanager
    def report(number, summary):
        ok = False
        try:
            yield
            ok = True
        finally:
            line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {summary}"
            with capman.global_and_fixture_disabled():
                print("\n" + line, flush=True)

    return report


def write_jsonl(path, objs):
    path.write_text("".join(dumps(o) + "\n" for o in objs), encoding="utf-8")
    return str(path)


def phrase(rng, lo=1, hi=6):
    return " ".join(rng.choice(VOCAB) for _ in range(rng.randint(lo, hi)))


def test_c01_compatibility_oracle(verdict):
    rng = random.Random(1)
    embedder = HashEmbedder()
    with verdict(1, "compatibility score equals brute-force max cosine on 1000 cases within 1e-12 in < 5 s"):
        start = time.perf_counter()
        worst = 0.0
        for _ in range(1000):
            tail = phrase(rng)
            cands = [phrase(rng) for _ in range(rng.randint(1, 10))]
            got = compatibility_score(tail, cands, embedder)
            t = embedder.embed(tail)
            sims = [float(np.dot(t, c) / (np.linalg.norm(t) * np.linalg.norm(c)))
                    for c in map(embedder.embed, cands)]
            expected = min(1.0, max(0.0, max(sims)))
            worst = max(worst, abs(got - expected))
        elapsed = time.perf_counter() - start
        assert worst <= 1e-12, worst
        assert elapsed < 5.0, elapsed


def test_c02_fallback_exact(verdict):
    with verdict(2, "all-None extraction scores exactly 0.5 with the fallback flag set"):
        for i, d in enumerate([make_dialogue(), make_dialogue("d2", history=(), response="Sure."),
                               make_dialogue("d3", history=("a", "b", "c", "d", "e"), response="ok then")]):
            extractor = ScriptedGenerator(extractor_script(d, {}))
            cskb = ScriptedGenerator({})
            out = score_response(d, extractor, cskb, HashEmbedder(), PipelineConfig())
            assert out.score == 0.5 and out.used_fallback is True and out.tuples == ()
            assert cskb.calls == []


def test_c03_grammar_round_trip(verdict):
    rng = random.Random(3)
    alphabet = string.ascii_letters + string.digits + " ,.'!?-:()\"éßñ中文" + "Person"
    with verdict(3, "1000 render/parse round trips; None and 20 malformed variants rejected"):
        checked = 0
        while checked < 1000:
            head = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 30))).strip()
            tail = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 30))).strip()
            if not head or not tail or any(m in (head + " " + tail).lower() for m in ("event1:", "event2:")):
                continue
            assert parse_extraction_output(render_extraction_output(head, tail)) == (head, tail)
            checked += 1
        for none in ("None", "none", " None ", "NONE"):
            assert parse_extraction_output(none) is None
        assert len(MALFORMED) == 20
        for raw in MALFORMED:
            assert isinstance(parse_extraction_output(raw), FormatError), raw


def test_c04_extraction_call_contract(verdict):
    rng = random.Random(4)
    config = ExtractionConfig()
    with verdict(4, "exactly 12 extractor requests per dialogue in fixed relation order over 50 dialogues"):
        dialogues = [make_dialogue(f"d{i}", history=[phrase(rng, 3, 8) for _ in range(rng.randint(0, 6))],
                                   response=phrase(rng, 3, 10)) for i in range(50)]
        script = {}
        for d in dialogues:
            script.update(extractor_script(d, {rng.choice(RELATIONS): "event1: PersonX runs; event2: PersonX sweats"}))
        gen = ScriptedGenerator(script)
        for d in dialogues:
            before = len(gen.calls)
            extract_tuples(d, gen, config)
            calls = gen.calls[before:]
            assert len(calls) == 12
            expected = extractor_script(d, {}, config)
            assert [c.input_text for c in calls] == list(expected)
            for spec, call in zip(config.relation_specs, calls):
                assert call.input_text.startswith(spec.prompt + " ")
            assert all(c.num_return_sequences == 1 for c in calls)
        assert [s.relation for s in config.relation_specs] == list(Relation)
        assert len(gen.calls) == 600


def _brute_ranks(v):
    return [sum(1 for w in v if w < x) + (sum(1 for w in v if w == x) + 1) / 2 for x in v]


def test_c05_correlation(verdict):
    rng = random.Random(5)
    with verdict(5, "pearson/spearman closed forms within 1e-9; tie ranks match brute force on 200 vectors"):
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        assert abs(pearson(x, [2 * v + 1 for v in x]) - 1.0) <= 1e-9
        assert abs(pearson(x, [-v for v in x]) + 1.0) <= 1e-9
        assert abs(spearman(x, [v ** 3 for v in x]) - 1.0) <= 1e-9
        assert abs(spearman(x, x[::-1]) + 1.0) <= 1e-9
        # x = 1..5, y = (1,2,2,3,3): hand-computed Pearson of ranks (1,2.5,2.5,4.5,4.5) vs 1..5
        ry = [1, 2.5, 2.5, 4.5, 4.5]
        closed = (sum((a - 3) * (b - 3) for a, b in zip(x, ry))
                  / math.sqrt(sum((a - 3) ** 2 for a in x) * sum((b - 3) ** 2 for b in ry)))
        assert abs(spearman(x, [1, 2, 2, 3, 3]) - closed) <= 1e-9
        assert abs(closed - 9 / math.sqrt(10 * 9)) <= 1e-12
        done = 0
        while done < 200:
            n = rng.randint(2, 12)
            a = [rng.randint(0, 4) for _ in range(n)]
            b = [rng.randint(0, 4) for _ in range(n)]
            if len(set(a)) < 2 or len(set(b)) < 2:
                continue
            assert list(average_ranks(a)) == _brute_ranks(a)
            ra, rb = _brute_ranks(a), _brute_ranks(b)
            ma, mb = sum(ra) / n, sum(rb) / n
            ref = (sum((p - ma) * (q - mb) for p, q in zip(ra, rb))
                   / math.sqrt(sum((p - ma) ** 2 for p in ra) * sum((q - mb) ** 2 for q in rb)))
            assert abs(spearman(a, b) - ref) <= 1e-9
            done += 1


def test_c06_auc_exact(verdict):
    rng = random.Random(6)
    with verdict(6, "roc_auc equals exhaustive pair counting exactly on 200 tied instances"):
        done = 0
        while done < 200:
            n = rng.randint(2, 30)
            labels = [rng.randint(0, 1) for _ in range(n)]
            if len(set(labels)) < 2:
                continue
            scores = [rng.randint(0, 5) / 5 for _ in range(n)]
            pos = [s for s, y in zip(scores, labels) if y]
            neg = [s for s, y in zip(scores, labels) if not y]
            wins = sum((p > q) + 0.5 * (p == q) for p in pos for q in neg)
            assert roc_auc(scores, labels) == wins / (len(pos) * len(neg))
            done += 1


def test_c07_search_oracle(verdict):
    rng = random.Random(7)
    with verdict(7, "search equals brute force on a 10k-tuple KB for 100 concept sets and grows monotonically"):
        tuples = [EventRelationTuple(f"PersonX {phrase(rng, 1, 3)}", rng.choice(RELATIONS),
                                     f"PersonX {phrase(rng, 1, 3)}") for _ in range(10_000)]
        kb = StaticCSKB(tuples)
        sides = [(content_words(t.head), content_words(t.tail)) for t in tuples]
        lemmas = sorted(set().union(*(h | t for h, t in sides)))
        for _ in range(100):
            words = set(rng.sample(lemmas, rng.randint(1, 6)))
            got = search_tuples(kb, ConceptSet(frozenset(words)))
            want = [t for t, (h, tl) in zip(tuples, sides) if h & words and tl & words]
            assert got == want
            grown = words | set(rng.sample(lemmas, rng.randint(1, 4)))
            bigger = search_tuples(kb, ConceptSet(frozenset(grown)))
            assert set(map(id, got)) <= set(map(id, bigger))


GOLD = [
    {"id": "s1", "head": "PersonX went hiking", "relation": "xEffect", "tail": "PersonX legs are sore"},
    {"id": "s1", "head": "PersonX went hiking", "relation": "xReact", "tail": "PersonX feels tired"},
    {"id": "s2", "head": "PersonX ate a pizza", "relation": "xNeed", "tail": "PersonX orders food"},
    {"id": "s3", "head": "PersonX lost PersonX job", "relation": "oReact", "tail": "PersonY feels sorry"},
    {"id": "s3", "head": "PersonX lost PersonX job", "relation": "HinderedBy", "tail": "PersonX works hard"},
]


def test_c08_setup2_cli(verdict, tmp_path):
    with verdict(8, "gold-as-prediction through the CLI yields F1 = BLEU-2 = similarity = 1.0"):
        gold = write_jsonl(tmp_path / "gold.jsonl", GOLD)
        out = tmp_path / "report.json"
        assert main(["eval-extraction", "--pred", gold, "--gold", gold, "--out", str(out)]) == 0
        m = json.loads(out.read_text())["metrics"]
        assert m["f1"] == 1.0
        assert m["bleu2"] == 1.0
        assert abs(m["similarity"] - 1.0) <= 1e-9


def test_c09_training_counts(verdict, tmp_path):
    rng = random.Random(9)
    with verdict(9, "per-relation training counts equal positives + 5; same seed is byte-identical"):
        dialogues = [make_dialogue(f"t{i}", history=[phrase(rng, 3, 6)], response=phrase(rng, 5, 9)) for i in range(40)]
        gold, positives = [], {r.value: 0 for r in RELATIONS}
        for i, d in enumerate(dialogues[:20]):
            for rel in rng.sample(RELATIONS, rng.randint(1, 3)):
                gold.append({"id": d.id, "head": f"PersonX {phrase(rng, 1, 3)}", "relation": rel.value,
                             "tail": f"PersonX {phrase(rng, 1, 3)}"})
                positives[rel.value] += 1
        for rel in RELATIONS:
            if not positives[rel.value]:
                gold.append({"id": dialogues[0].id, "head": "PersonX naps", "relation": rel.value, "tail": "PersonX rests"})
                positives[rel.value] += 1
        dpath = write_jsonl(tmp_path / "d.jsonl", [dialogue_to_json(d) for d in dialogues])
        gpath = write_jsonl(tmp_path / "g.jsonl", gold)
        runs = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.jsonl"
            assert main(["prepare-train", "--dialogues", dpath, "--gold", gpath, "--negatives", "5",
                         "--seed", "11", "--out", str(out)]) == 0
            runs.append(out.read_bytes())
        assert runs[0] == runs[1]
        rows = [json.loads(line) for line in runs[0].decode().splitlines()[1:]]
        for rel in RELATIONS:
            mine = [r for r in rows if r["relation"] == rel.value]
            assert len(mine) == positives[rel.value] + 5, rel
            assert sum(r["negative"] for r in mine) == 5


def test_c10_parallel_determinism(verdict, tmp_path):
    rng = random.Random(10)
    with verdict(10, "score output is byte-identical for parallelism 1 and 8"):
        dialogues = [make_dialogue(f"p{i}", history=[phrase(rng, 3, 6)], response=phrase(rng, 5, 9))
                     for i in range(60)]
        extractor, cskb = {}, {}
        for d in dialogues:
            answers = {}
            for rel in rng.sample(RELATIONS, rng.randint(0, 4)):
                head, tail = f"PersonX {phrase(rng, 1, 3)}", f"PersonX {phrase(rng, 1, 3)}"
                answers[rel] = render_extraction_output(head, tail)
                cskb[f"{head} {rel.value} [GEN]"] = [f"PersonX {phrase(rng, 1, 4)}" for _ in range(10)]
            extractor.update(extractor_script(d, answers))
        script = tmp_path / "mock.json"
        script.write_text(json.dumps({"extractor": extractor, "cskb": cskb, "strict": True}))
        corpus = write_jsonl(tmp_path / "d.jsonl", [dialogue_to_json(d) for d in dialogues])
        outputs = []
        for par in ("1", "8"):
            out = tmp_path / f"s{par}.jsonl"
            assert main(["score", corpus, "--mock-script", str(script), "--parallelism", par,
                         "--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        lines = outputs[0].decode().splitlines()
        assert HEADER_KEY in json.loads(lines[0]) and len(lines) == 61
        assert any(not json.loads(line)["fallback"] for line in lines[1:])


def _integration_inputs():
    data = os.environ.get("ACCENT_DECO_DIR")
    if not data or not os.environ.get("ACCENT_MODEL_DIR"):
        return None
    paths = {name: Path(data) / f"{name}.jsonl" for name in ("dialogues", "annotations")}
    return paths if all(p.exists() for p in paths.values()) else None


def test_c11_optional_integration(verdict, pytestconfig, tmp_path):
    paths = _integration_inputs()
    if paths is None:
        reason = "set ACCENT_MODEL_DIR and ACCENT_DECO_DIR (dialogues.jsonl, annotations.jsonl)"
        with pytestconfig.pluginmanager.getplugin("capturemanager").global_and_fixture_disabled():
            print(f"\nACCEPTANCE 11 SKIP: optional integration check, {reason}", flush=True)
        pytest.skip(reason)
    with verdict(11, "DECO Spearman within 0.05 of 0.30 and system ranking matches the human ranking"):
        scores = tmp_path / "scores.jsonl"
        assert main(["score", str(paths["dialogues"]), "--backend", "real", "--out", str(scores)]) in (0, 1)
        report = tmp_path / "report.json"
        assert main(["eval-metric", "--scores", str(scores), "--annotations", str(paths["annotations"]),
                     "--out", str(report)]) == 0
        m = json.loads(report.read_text())["metrics"]
        assert abs(m["spearman"] - 0.30) <= 0.05
        assert [s for s, _ in m["system_ranking"]] == [s for s, _ in m["human_system_ranking"]]
