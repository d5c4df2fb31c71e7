import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synee.align import (
    CharSubwordTokenizer,
    FeatureEncoder,
    LabelScheme,
    LabelSequence,
    align_tags,
    decode_label_ids,
    decode_labels,
    encode_labels,
    read_records,
    select_spans,
    write_records,
)
from synee.annotate import SyntaxAnnotation, VocabTable
from synee.corpus import RawSentence, iter_gold_spans
from synee.errors import ConfigError

from conftest import FIXTURE_SCHEMA, make_synthetic_sentences


def tokenize(text, max_tokens=64):
    seq, _ = CharSubwordTokenizer().encode(text, max_tokens)
    return seq


class TestTokenizer:
    def test_cjk_per_character(self):
        seq = tokenize("裁员")
        assert seq.tokens == ("<s>", "裁", "员", "</s>")
        assert seq.char_spans == ((-1, -1), (0, 1), (1, 2), (-1, -1))
        assert seq.special_mask == (True, False, False, True)

    def test_latin_run_is_chunked(self):
        seq = tokenize("Oracle公司")
        assert seq.tokens == ("<s>", "Orac", "##le", "公", "司", "</s>")
        assert seq.char_spans[1:-1] == ((0, 4), (4, 6), (6, 7), (7, 8))

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            tokenize("")
        with pytest.raises(ValueError):
            tokenize("   ")

    def test_whitespace_skipped(self):
        seq = tokenize("裁 员")
        assert seq.tokens[1:-1] == ("裁", "员")
        assert seq.char_spans[1:-1] == ((0, 1), (2, 3))

    def test_truncation_warns_and_cuts(self, caplog):
        with caplog.at_level("WARNING"):
            seq = tokenize("一二三四五六七八九十", max_tokens=7)
        assert len(seq) == 7
        assert seq.tokens[-1] == "</s>"
        assert "truncated" in caplog.text

    def test_punctuation_single_tokens(self):
        seq = tokenize("好，好。")
        assert seq.tokens[1:-1] == ("好", "，", "好", "。")

    @pytest.mark.parametrize("text", [
        "前两天，软件服务商Oracle公司宣布裁员900人。",
        "X1 测试 ABCDEFGHI 句子257。",
    ])
    def test_non_whitespace_coverage_is_exact(self, text):
        seq = tokenize(text)
        covered = sorted(
            position
            for (start, end), special in zip(seq.char_spans, seq.special_mask)
            if not special
            for position in range(start, end)
        )
        expected = [i for i, ch in enumerate(text) if not ch.isspace()]
        assert covered == expected  # each non-space char in exactly one span


HAND_ANNOTATION = SyntaxAnnotation(
    words=("前两天", "，", "Oracle", "公司", "宣布", "裁员", "。"),
    word_spans=((0, 3), (3, 4), (4, 10), (10, 12), (12, 14), (14, 16), (16, 17)),
    pos_tags=("NT", "PU", "NR", "NN", "VV", "VV", "PU"),
    ner_tags=("O", "O", "ORG", "ORG", "O", "O", "O"),
    dep_edges=(
        (4, 0, "nmod"),
        (4, 1, "punct"),
        (3, 2, "compound"),
        (4, 3, "nsubj"),
        (-1, 4, "root"),
        (4, 5, "ccomp"),
        (4, 6, "punct"),
    ),
    root_index=4,
)
HAND_TEXT = "前两天，Oracle公司宣布裁员。"


class TestAlignTags:
    @pytest.fixture()
    def vocabs(self):
        pos = VocabTable.build(HAND_ANNOTATION.pos_tags)
        dep = VocabTable.build(rel for _, _, rel in HAND_ANNOTATION.dep_edges)
        return pos, dep

    def test_hand_expanded_alignment_table(self, vocabs):
        pos_vocab, dep_vocab = vocabs
        seq = tokenize(HAND_TEXT)
        assert seq.tokens == (
            "<s>", "前", "两", "天", "，", "Orac", "##le", "公", "司",
            "宣", "布", "裁", "员", "。", "</s>",
        )
        feats = align_tags(seq, HAND_ANNOTATION, pos_vocab, dep_vocab)
        assert feats.word_index == (-1, 0, 0, 0, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, -1)
        # every token of a word carries the word's tags
        expected_pos = [HAND_ANNOTATION.pos_tags[w] if w >= 0 else None for w in feats.word_index]
        for token_pos, tag in zip(feats.pos_ids, expected_pos):
            assert token_pos == (pos_vocab.id_of(tag) if tag else 0)
        expected_rel = [HAND_ANNOTATION.relation_of(w) if w >= 0 else None for w in feats.word_index]
        for token_rel, rel in zip(feats.dep_rel_ids, expected_rel):
            assert token_rel == (dep_vocab.id_of(rel) if rel else 0)
        # heads: 宣布 is the root (tokens 9-10); its first token is 9
        assert feats.head_token == (-1, 9, 9, 9, 9, 7, 7, 9, 9, -1, -1, 9, 9, 9, -1)

    def test_root_word_tokens_have_no_head(self, vocabs):
        pos_vocab, dep_vocab = vocabs
        feats = align_tags(tokenize(HAND_TEXT), HAND_ANNOTATION, pos_vocab, dep_vocab)
        root_tokens = [t for t, w in enumerate(feats.word_index) if w == 4]
        assert all(feats.head_token[t] == -1 for t in root_tokens)

    def test_straddling_token_assigned_by_midpoint(self, caplog):
        ann = SyntaxAnnotation(
            words=("AB", "CD"),
            word_spans=((0, 2), (2, 4)),
            pos_tags=("NN", "VV"),
            ner_tags=("O", "O"),
            dep_edges=((-1, 0, "root"), (0, 1, "dep")),
            root_index=0,
        )
        seq = tokenize("ABCD")  # one 4-char chunk straddling both words
        with caplog.at_level("WARNING"):
            feats = align_tags(seq, ann, VocabTable.build(ann.pos_tags), VocabTable.build(["root", "dep"]))
        assert "straddles" in caplog.text
        assert feats.word_index[1] == 1  # midpoint 2.0 falls in the second word

    def test_unknown_tags_map_to_zero(self):
        seq = tokenize("裁员")
        ann = SyntaxAnnotation(
            words=("裁员",),
            word_spans=((0, 2),),
            pos_tags=("WEIRD",),
            ner_tags=("O",),
            dep_edges=((-1, 0, "root"),),
            root_index=0,
        )
        feats = align_tags(seq, ann, VocabTable.build(["NN"]), VocabTable.build(["dep"]))
        assert feats.pos_ids == (0, 0, 0, 0)
        assert feats.dep_rel_ids == (0, 0, 0, 0)

    def test_alignment_totality_on_fixture(self, encoded_records):
        for record in encoded_records:
            for t in range(len(record)):
                if record.special_mask[t]:
                    assert record.word_index[t] == -1
                    assert record.pos_ids[t] == 0 and record.dep_rel_ids[t] == 0
                else:
                    assert record.word_index[t] >= 0
                    assert record.pos_ids[t] >= 1
                    assert record.dep_rel_ids[t] >= 1
                    assert record.head_token[t] == -1 or 0 <= record.head_token[t] < len(record)


class TestScheme:
    def test_trigger_scheme_size(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        assert len(scheme) == 1 + 3 * len(schema)

    def test_role_scheme_size(self, schema):
        scheme = LabelScheme.from_schema("role", schema)
        assert len(scheme) == 1 + 3 * len(schema.role_names)

    def test_outside_is_zero_and_order_deterministic(self):
        scheme = LabelScheme("trigger", ["乙", "甲"])
        assert scheme.labels[0] == "O"
        assert scheme.id_of("O") == 0
        assert scheme.labels == ("O", "B-乙", "I-乙", "E-乙", "B-甲", "I-甲", "E-甲")
        restored = LabelScheme.from_dict(scheme.to_dict())
        assert restored.labels == scheme.labels


class TestEncodeDecode:
    def test_two_token_trigger_is_b_e(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        sentence = RawSentence(
            id="x",
            text="公司裁员。",
            events=(
                __import__("synee.corpus", fromlist=["EventRecord"]).EventRecord(
                    event_type="组织关系-裁员", trigger_text="裁员", trigger_start=2
                ),
            ),
        )
        seq = tokenize(sentence.text)
        labels = encode_labels(sentence, seq, scheme)
        named = [scheme.label_of(i) for i in labels.label_ids]
        assert named == ["O", "O", "O", "B-组织关系-裁员", "E-组织关系-裁员", "O", "O"]

    def test_no_events_all_outside(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        sentence = RawSentence(id="x", text="今天天气不错。")
        labels = encode_labels(sentence, tokenize(sentence.text), scheme)
        assert set(labels.label_ids) == {0}

    def test_three_token_span_is_b_i_e(self, schema, fixture_sentences):
        scheme = LabelScheme.from_schema("role", schema)
        s01 = fixture_sentences[0]
        seq = tokenize(s01.text)
        labels = encode_labels(s01, seq, scheme)
        named = [scheme.label_of(i) for i in labels.label_ids]
        assert named[1:4] == ["B-时间", "I-时间", "E-时间"]  # 前两天

    def test_overlapping_roles_drop_later_class(self, schema, fixture_sentences, caplog):
        s05 = next(s for s in fixture_sentences if s.id == "s05")
        scheme = LabelScheme.from_schema("role", schema)
        seq = tokenize(s05.text)
        with caplog.at_level("WARNING"):
            labels = encode_labels(s05, seq, scheme)
        assert "overlaps" in caplog.text
        named = [scheme.label_of(i) for i in labels.label_ids]
        assert "B-裁员方" in named  # sorts before 解雇方, so it wins the shared span
        assert "B-解雇方" not in named

    def test_decode_orphans_ignored(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        seq = tokenize("公司裁员。")
        ids = [0] * len(seq)
        ids[1] = scheme.id_of("I-组织关系-裁员")
        ids[2] = scheme.id_of("E-组织关系-裁员")
        assert decode_labels(LabelSequence(tuple(ids), scheme), seq) == []

    def test_decode_unterminated_run_closes_at_last_token(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        seq = tokenize("公司裁员。")
        ids = [0] * len(seq)
        ids[1] = scheme.id_of("B-组织关系-裁员")
        ids[2] = scheme.id_of("I-组织关系-裁员")
        assert decode_labels(LabelSequence(tuple(ids), scheme), seq) == [("组织关系-裁员", 0, 2)]

    def test_decode_single_b_is_single_token_span(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        seq = tokenize("公司裁员。")
        ids = [0] * len(seq)
        ids[3] = scheme.id_of("B-组织关系-裁员")
        assert decode_labels(LabelSequence(tuple(ids), scheme), seq) == [("组织关系-裁员", 2, 3)]

    def test_decode_class_switch_closes_run(self, schema):
        scheme = LabelScheme.from_schema("trigger", schema)
        seq = tokenize("公司裁员。")
        ids = [0] * len(seq)
        ids[1] = scheme.id_of("B-组织关系-裁员")
        ids[2] = scheme.id_of("I-组织关系-解雇")
        ids[3] = scheme.id_of("E-组织关系-解雇")
        assert decode_labels(LabelSequence(tuple(ids), scheme), seq) == [("组织关系-裁员", 0, 1)]

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_decode_is_total(self, schema, data):
        scheme = LabelScheme.from_schema("trigger", schema)
        seq = tokenize("前两天Oracle公司宣布裁员900人。")
        ids = data.draw(
            st.lists(
                st.integers(min_value=0, max_value=len(scheme) - 1),
                min_size=len(seq), max_size=len(seq),
            )
        )
        spans = decode_label_ids(ids, seq, scheme)
        for cls, start, end in spans:
            assert 0 <= start < end
            assert cls in scheme.classes


def placements_for(sentence, seq, subtask):
    spans = [
        (cls, start, start + len(text))
        for cls, text, start in iter_gold_spans(sentence, subtask)
    ]
    kept, _ = select_spans(spans, seq)
    return kept


@pytest.mark.parametrize("subtask", ["trigger", "role"])
def test_round_trip_on_fixture_and_synthetic(schema, fixture_sentences, subtask):
    scheme = LabelScheme.from_schema(subtask, schema)
    for sentence in fixture_sentences + make_synthetic_sentences(30):
        seq = tokenize(sentence.text, max_tokens=256)
        kept = placements_for(sentence, seq, subtask)
        decoded = set(decode_labels(encode_labels(sentence, seq, scheme), seq))
        # every kept placement comes back at its token boundaries...
        expected = {
            (p.cls, seq.char_spans[p.first_token][0], seq.char_spans[p.last_token][1])
            for p in kept
        }
        assert decoded == expected, sentence.id
        # ...and token-aligned gold spans come back bit-exact
        for p in kept:
            if p.exact:
                assert (p.cls, p.start, p.end) in decoded


def test_select_spans_drops_truncated(schema):
    seq = tokenize("一二三四五六七八九十", max_tokens=7)  # keeps 5 content tokens
    kept, dropped = select_spans([("x", 0, 2), ("y", 6, 8)], seq)
    assert [(p.cls, p.first_token, p.last_token) for p in kept] == [("x", 1, 2)]
    assert dropped == [("y", 6, 8, "truncated")]


class TestFeatureEncoder:
    def test_transform_before_fit_raises(self):
        with pytest.raises(ConfigError):
            FeatureEncoder().transform([])

    def test_records_have_consistent_lengths(self, encoded_records):
        for record in encoded_records:
            n = len(record)
            for name in ("char_spans", "special_mask", "token_ids", "pos_ids",
                         "dep_rel_ids", "head_token", "word_index",
                         "trigger_labels", "role_labels"):
                assert len(getattr(record, name)) == n, name

    def test_unknown_tokens_map_to_zero(self, feature_encoder, toy_annotator, schema):
        novel = RawSentence(id="n1", text="蘧蒢戚施。")
        record = feature_encoder.transform([(novel, toy_annotator.annotate(novel.text))])[0]
        assert record.token_ids[1] == 0  # 蘧 was never seen in training

    def test_records_round_trip_through_file(self, tmp_path, encoded_records):
        path = tmp_path / "records.jsonl"
        count = write_records(path, encoded_records)
        assert count == len(encoded_records)
        assert read_records(path) == encoded_records

    def test_get_params_round_trip(self):
        encoder = FeatureEncoder(encoder_name="tiny", max_tokens=64, latin_chunk=3)
        params = encoder.get_params()
        clone = FeatureEncoder(**params)
        assert clone.get_params() == params
