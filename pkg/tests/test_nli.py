import pytest
from hypothesis import given, strategies as st

from ctrnli.corpus import InstanceType, Label, NLIInstance, SectionId
from ctrnli.errors import StatementTooLong
from ctrnli.nli import (
    NLIInputPair,
    PredictionRecord,
    assemble_input,
    assembled_token_count,
    lexical_overlap_baseline,
    read_predictions,
    write_predictions,
)
from ctrnli.shortening import ShortenedPremise
from ctrnli.tokenization import WhitespaceTokenizer

TOK = WhitespaceTokenizer()


def words(n, prefix="w"):
    return " ".join(f"{prefix}{i}" for i in range(n))


def _instance(statement, *, comparison=False, label=None):
    return NLIInstance(
        instance_id="i1",
        instance_type=InstanceType.COMPARISON if comparison else InstanceType.SINGLE,
        section=SectionId.RESULTS,
        primary_trial="T1",
        secondary_trial="T2" if comparison else None,
        statement=statement,
        label=label,
    )


def _shortened(primary, secondary=None):
    counts = {"primary": TOK.count(primary)}
    if secondary is not None:
        counts["secondary"] = TOK.count(secondary)
    return ShortenedPremise(
        instance_id="i1",
        fingerprint="fp",
        primary_short=primary,
        secondary_short=secondary,
        token_counts=counts,
    )


class TestAssembleInput:
    def test_single_passthrough(self):
        pair = assemble_input(_shortened("P"), _instance("S"), TOK)
        assert pair.text_a == "P"
        assert pair.text_b == "S"

    def test_comparison_joined_with_markers(self):
        pair = assemble_input(_shortened("A", "B"), _instance("S", comparison=True), TOK)
        assert pair.text_a == "Primary trial: A Secondary trial: B"

    def test_oversize_premise_trimmed_to_window(self):
        statement = words(110)
        pair = assemble_input(_shortened(words(2000, "p")), _instance(statement), TOK)
        assert assembled_token_count(pair, TOK) <= 512
        assert pair.text_b == statement

    def test_statement_never_altered(self):
        statement = words(480)
        pair = assemble_input(_shortened(words(600, "p")), _instance(statement), TOK)
        assert pair.text_b == statement
        assert assembled_token_count(pair, TOK) <= 512

    def test_statement_too_long(self):
        with pytest.raises(StatementTooLong):
            assemble_input(_shortened("p"), _instance(words(502)), TOK)

    def test_wrong_instance_rejected(self):
        shortened = ShortenedPremise("other", "fp", "p", None, {"primary": 1})
        with pytest.raises(ValueError):
            assemble_input(shortened, _instance("s"), TOK)

    def test_gold_label_carried(self):
        pair = assemble_input(_shortened("p"), _instance("s", label=Label.ENTAILMENT), TOK)
        assert pair.gold is Label.ENTAILMENT


class TestLexicalBaseline:
    def test_statement_subset_of_premise(self):
        pairs = [NLIInputPair("a", "the trial showed gains", "trial showed gains")]
        [record] = lexical_overlap_baseline(pairs)
        assert record.score == 1.0
        assert record.predicted is Label.ENTAILMENT

    def test_disjoint_vocabulary(self):
        pairs = [NLIInputPair("a", "alpha beta", "gamma delta")]
        [record] = lexical_overlap_baseline(pairs)
        assert record.score == 0.0
        assert record.predicted is Label.CONTRADICTION

    def test_half_overlap_is_entailment_by_tie_rule(self):
        pairs = [NLIInputPair("a", "a b x y", "a b c d")]
        [record] = lexical_overlap_baseline(pairs)
        assert record.score == 0.5
        assert record.predicted is Label.ENTAILMENT

    def test_empty_statement_scores_zero(self):
        pairs = [NLIInputPair("a", "anything", "")]
        [record] = lexical_overlap_baseline(pairs)
        assert record.score == 0.0

    def test_order_and_ids_preserved(self):
        pairs = [NLIInputPair(str(i), "a", "a") for i in range(5)]
        records = lexical_overlap_baseline(pairs)
        assert [r.instance_id for r in records] == [str(i) for i in range(5)]

    @given(
        st.lists(st.sampled_from("a b c d e".split()), min_size=1, max_size=6),
        st.lists(st.sampled_from("a b c d e".split()), max_size=6),
        st.sampled_from("a b c d e".split()),
    )
    def test_monotone_in_premise_tokens(self, statement_words, premise_words, extra):
        statement = " ".join(statement_words)
        base = " ".join(premise_words)
        [before] = lexical_overlap_baseline([NLIInputPair("x", base, statement)])
        [after] = lexical_overlap_baseline([NLIInputPair("x", base + " " + extra, statement)])
        assert after.score >= before.score


class TestPredictionRecords:
    def test_tie_scores_entailment(self):
        record = PredictionRecord.from_score("a", 0.5, "m")
        assert record.predicted is Label.ENTAILMENT

    def test_below_threshold_contradiction(self):
        assert PredictionRecord.from_score("a", 0.49, "m").predicted is Label.CONTRADICTION

    def test_jsonl_round_trip(self, tmp_path):
        records = [
            PredictionRecord.from_score("a", 0.75, "model-x"),
            PredictionRecord.from_score("b", 0.25, "model-x"),
        ]
        path = tmp_path / "preds.jsonl"
        write_predictions(path, records)
        assert read_predictions(path) == records
        assert len(path.read_text().splitlines()) == 2

    def test_deterministic_bytes(self, tmp_path):
        records = [PredictionRecord.from_score("a", 1 / 3, "m")]
        write_predictions(tmp_path / "one.jsonl", records)
        write_predictions(tmp_path / "two.jsonl", records)
        assert (tmp_path / "one.jsonl").read_bytes() == (tmp_path / "two.jsonl").read_bytes()
