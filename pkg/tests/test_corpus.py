import json

import pytest

from detectorbench.corpus import (DatasetError, Document, TopicSpec, build_counterparts,
                                  default_topic_specs, load_dataset, manifest_path, regenerate,
                                  synth_topics, train_evaluation_backend, write_dataset)
from detectorbench.ngram import train_ngram
from detectorbench.rng import derive_seed
from detectorbench.topic_metrics import topic_entropy

PETS = "the cat sat on the mat . the dog sat on the log . a cat saw a dog ."
LONG = "the cat sat on the mat and the dog sat on the log"


def row(i, topic="t", origin="human", text="some words here", provenance=None):
    return {"id": f"d{i}", "topic": topic, "origin": origin, "text": text, "provenance": provenance}


def write_lines(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows))
    return path


@pytest.fixture
def pets():
    return train_ngram([PETS], order=2, delta=0.1)


class TestLoad:
    def test_two_documents(self, tmp_path):
        docs, manifest = load_dataset(write_lines(tmp_path / "a.jsonl", [row(1), row(2)]))
        assert [d.id for d in docs] == ["d1", "d2"]
        assert manifest.counts == {"t": {"human": 2}}

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text("\n\n")
        with pytest.raises(DatasetError, match="no documents"):
            load_dataset(path)

    def test_duplicate_ids_cite_both_lines(self, tmp_path):
        rows = [row(1), row(2), row(3), row(4), row(5), row(6), row(3)]
        with pytest.raises(DatasetError, match="lines 3 and 7"):
            load_dataset(write_lines(tmp_path / "d.jsonl", rows))

    def test_missing_field(self, tmp_path):
        bad = row(2)
        del bad["topic"]
        with pytest.raises(DatasetError, match=r":2: missing fields \['topic'\]"):
            load_dataset(write_lines(tmp_path / "m.jsonl", [row(1), bad]))

    def test_unknown_field(self, tmp_path):
        with pytest.raises(DatasetError, match="unknown fields"):
            load_dataset(write_lines(tmp_path / "u.jsonl", [dict(row(1), label=1)]))

    def test_bad_json_line_number(self, tmp_path):
        with pytest.raises(DatasetError, match=":2: invalid JSON"):
            load_dataset(write_lines(tmp_path / "j.jsonl", [row(1), "{not json"]))

    @pytest.mark.parametrize("change", [{"origin": "bot"}, {"text": "  "}, {"topic": ""},
                                        {"origin": "machine"}])
    def test_invalid_values(self, tmp_path, change):
        with pytest.raises(DatasetError, match=":1:"):
            load_dataset(write_lines(tmp_path / "v.jsonl", [dict(row(1), **change)]))

    def test_round_trip(self, tmp_path):
        docs = [Document("a", "x", "human", "one two"),
                Document("a.machine", "x", "machine", "one three", {"backend_id": "b", "seed": 1})]
        path = tmp_path / "rt.jsonl"
        write_dataset(path, docs)
        loaded, manifest = load_dataset(path)
        assert loaded == docs
        assert manifest.counts == {"x": {"human": 1, "machine": 1}}
        assert json.loads(manifest_path(path).read_text())["topics"] == ["x"]

    def test_sidecar_mismatch(self, tmp_path):
        path = tmp_path / "s.jsonl"
        write_dataset(path, [Document("a", "x", "human", "one")])
        with path.open("a") as fh:
            fh.write(json.dumps(row(9)) + "\n")
        with pytest.raises(DatasetError, match="do not match"):
            load_dataset(path)

    def test_write_rejects_duplicates(self, tmp_path):
        d = Document("a", "x", "human", "one")
        with pytest.raises(DatasetError):
            write_dataset(tmp_path / "x.jsonl", [d, d])


class TestCounterparts:
    def test_golden_continuation(self, pets):
        human = [Document("d1", "pets", "human", LONG)]
        machine, skipped = build_counterparts(pets, human, prompt_tokens=4, max_tokens=6,
                                              temperature=1.0, seed=7)
        assert skipped == []
        (m,) = machine
        assert m.id == "d1.machine" and m.topic == "pets" and m.origin == "machine"
        assert m.text == "the cat sat on cat saw a dog saw a"
        assert m.provenance == {"backend_id": pets.backend_id, "source_id": "d1",
                                "prompt_unit": "tokens", "prompt_length": 4, "max_tokens": 6,
                                "temperature": 1.0, "base_seed": 7, "seed": derive_seed(7, "d1")}

    def test_prompt_is_verbatim(self, pets):
        text = "The  Cat,sat ON the mat and then some more words follow here"
        (m,), _ = build_counterparts(pets, [Document("x", "t", "human", text)], prompt_tokens=5,
                                     max_tokens=3)
        assert m.text.startswith("The  Cat,sat ON ")

    def test_skips_short_documents(self, pets):
        docs = [Document("short", "t", "human", "a b c d e f"),
                Document("long", "t", "human", LONG)]
        machine, skipped = build_counterparts(pets, docs, prompt_tokens=4, max_tokens=2)
        assert skipped == ["short"] and [m.id for m in machine] == ["long.machine"]

    def test_all_skipped(self, pets):
        with pytest.raises(ValueError, match="shorter"):
            build_counterparts(pets, [Document("s", "t", "human", "a b")], prompt_tokens=4)

    def test_chars_unit(self, pets):
        (m,), _ = build_counterparts(pets, [Document("c", "t", "human", LONG)], prompt_tokens=7,
                                     max_tokens=2, prompt_unit="chars")
        assert m.text.startswith("the cat ") and m.provenance["prompt_unit"] == "chars"

    def test_regenerate_from_provenance(self, pets):
        human = Document("d1", "pets", "human", LONG)
        (m,), _ = build_counterparts(pets, [human], prompt_tokens=3, max_tokens=8, seed=42)
        assert regenerate(pets, human, m.provenance) == m.text
        other = train_ngram([PETS], order=1)
        with pytest.raises(ValueError, match="backend"):
            regenerate(other, human, m.provenance)

    def test_order_independent(self, pets):
        docs = [Document(f"d{i}", "t", "human", LONG) for i in range(4)]
        fwd, _ = build_counterparts(pets, docs, prompt_tokens=3, max_tokens=5, seed=1)
        rev, _ = build_counterparts(pets, docs[::-1], prompt_tokens=3, max_tokens=5, seed=1)
        assert sorted(fwd, key=lambda d: d.id) == sorted(rev, key=lambda d: d.id)

    def test_bad_arguments(self, pets):
        doc = [Document("d", "t", "human", LONG)]
        with pytest.raises(ValueError):
            build_counterparts(pets, doc, prompt_tokens=0)
        with pytest.raises(ValueError):
            build_counterparts(pets, doc, max_tokens=0)
        with pytest.raises(ValueError):
            build_counterparts(pets, doc, prompt_unit="words")


class TestSynth:
    def test_byte_identical(self, tmp_path):
        specs = default_topic_specs(n_docs=5, base_words=3000)
        backend = train_evaluation_backend(specs)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(a, synth_topics(specs, backend, master_seed=3))
        write_dataset(b, synth_topics(specs, train_evaluation_backend(specs), master_seed=3))
        assert a.read_bytes() == b.read_bytes()
        c = tmp_path / "c.jsonl"
        write_dataset(c, synth_topics(specs, backend, master_seed=4))
        assert a.read_bytes() != c.read_bytes()

    def test_shape(self, synthetic):
        _, docs = synthetic
        counts = {}
        for d in docs:
            counts[d.topic, d.origin] = counts.get((d.topic, d.origin), 0) + 1
        assert set(counts.values()) == {100}
        assert {t for t, _ in counts} == {"low", "mid", "high"}
        assert all(len(d.text.split()) == 40 for d in docs if d.origin == "human")

    def test_temperature_orders_entropy(self, synthetic):
        backend, docs = synthetic
        values = [topic_entropy(backend, [d for d in docs if d.topic == t and d.origin == "human"]).value
                  for t in ("low", "mid", "high")]
        assert values[0] < values[1] < values[2]

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            TopicSpec("t", "a b", 1.0, 0, 40)
        with pytest.raises(ValueError):
            TopicSpec("t", "a b", -1.0, 1, 40)
        spec = TopicSpec("t", "a b a c", 1.0, 2, 20)
        with pytest.raises(ValueError, match="doc_length"):
            synth_topics([spec], train_ngram(["a b"]))
        with pytest.raises(ValueError):
            synth_topics([], train_ngram(["a b"]))
