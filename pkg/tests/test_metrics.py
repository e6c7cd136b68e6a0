import random

import pytest
from hypothesis import given, strategies as st

from ctrnli.corpus import (
    ContrastLink,
    InstanceType,
    Intervention,
    Label,
    NLIInstance,
    SectionId,
    load_corpus,
)
from ctrnli.errors import (
    DisjointIdSets,
    EmptyInput,
    LengthMismatch,
    MissingPredictions,
    MixedModelTags,
)
from ctrnli.metrics import (
    AgreementMatrix,
    ContrastPair,
    agreement_matrix,
    breakdown,
    build_contrast_pairs,
    compute_report,
    consistency,
    contrast_counts,
    faithfulness,
    macro_f1,
)
from ctrnli.nli import PredictionRecord
from ctrnli.shortening import ShortenedPremise
from ctrnli.tokenization import WhitespaceTokenizer

from conftest import make_trial, write_trial

E, C = Label.ENTAILMENT, Label.CONTRADICTION
TOK = WhitespaceTokenizer()


class TestMacroF1:
    def test_perfect_predictions(self):
        golds = [E, C, E, C]
        assert macro_f1(golds, golds) == (1.0, 1.0, 1.0)

    def test_all_entailment_on_balanced(self):
        golds = [E, E, C, C]
        preds = [E, E, E, E]
        f1, precision, recall = macro_f1(golds, preds)
        assert f1 == pytest.approx(1 / 3)
        assert precision == pytest.approx(0.25)
        assert recall == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            macro_f1([E], [E, C])

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            macro_f1([], [])

    @given(
        st.lists(st.tuples(st.sampled_from([E, C]), st.sampled_from([E, C])), min_size=1, max_size=40)
    )
    def test_class_swap_invariance(self, items):
        golds = [g for g, _ in items]
        preds = [p for _, p in items]
        swap = {E: C, C: E}
        flipped = macro_f1([swap[g] for g in golds], [swap[p] for p in preds])
        assert macro_f1(golds, preds) == pytest.approx(flipped)

    @given(
        st.lists(st.tuples(st.sampled_from([E, C]), st.sampled_from([E, C])), min_size=1, max_size=40)
    )
    def test_matches_per_class_oracle(self, items):
        golds = [g for g, _ in items]
        preds = [p for _, p in items]
        expected = _macro_f1_oracle(golds, preds)
        assert macro_f1(golds, preds) == pytest.approx(expected, abs=1e-12)


def _macro_f1_oracle(golds, preds):
    # Independent recomputation by explicit confusion counting.
    per_class = []
    for cls in (E, C):
        tp = fp = fn = 0
        for g, p in zip(golds, preds):
            if p is cls and g is cls:
                tp += 1
            elif p is cls:
                fp += 1
            elif g is cls:
                fn += 1
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class.append((f1, precision, recall))
    return tuple(sum(vals) / 2 for vals in zip(*per_class))


def _pair(intervention, orig_gold, orig_pred, pert_pred, *, tag="m", idx=0):
    return ContrastPair(
        original_id=f"y{idx}",
        original_gold=orig_gold,
        original_pred=orig_pred,
        perturbed_id=f"x{idx}",
        perturbed_gold=C if orig_gold is E else E,
        perturbed_pred=pert_pred,
        intervention=intervention,
        model_tag=tag,
    )


ALT, PRES = Intervention.ALTERING, Intervention.PRESERVING


class TestFaithfulness:
    def test_all_eligible_flip(self):
        pairs = [_pair(ALT, E, E, C, idx=i) for i in range(3)]
        assert faithfulness(pairs) == 1.0

    def test_two_of_three_flip(self):
        pairs = [
            _pair(ALT, E, E, C, idx=0),
            _pair(ALT, E, E, C, idx=1),
            _pair(ALT, E, E, E, idx=2),
        ]
        assert faithfulness(pairs) == pytest.approx(2 / 3)

    def test_wrong_original_excluded(self):
        pairs = [
            _pair(ALT, E, C, C, idx=0),  # original predicted wrong: not eligible
            _pair(ALT, E, E, C, idx=1),
        ]
        assert faithfulness(pairs) == 1.0

    def test_no_altering_pairs_undefined(self):
        assert faithfulness([_pair(PRES, E, E, E)]) is None
        assert faithfulness([]) is None

    def test_mixed_model_tags(self):
        pairs = [_pair(ALT, E, E, C, tag="a", idx=0), _pair(ALT, E, E, C, tag="b", idx=1)]
        with pytest.raises(MixedModelTags):
            faithfulness(pairs)

    def test_permutation_invariance(self):
        pairs = [
            _pair(ALT, E, E, C, idx=0),
            _pair(ALT, C, C, C, idx=1),
            _pair(PRES, E, E, E, idx=2),
        ]
        shuffled = pairs[::-1]
        assert faithfulness(pairs) == faithfulness(shuffled)


class TestConsistency:
    def test_identical_predictions(self):
        pairs = [_pair(PRES, E, E, E, idx=i) for i in range(4)]
        assert consistency(pairs) == 1.0

    def test_three_of_four_unchanged(self):
        pairs = [_pair(PRES, E, E, E, idx=i) for i in range(3)] + [_pair(PRES, E, E, C, idx=3)]
        assert consistency(pairs) == pytest.approx(0.75)

    def test_no_correctness_filter(self):
        # original prediction wrong but stable: still counts
        pairs = [_pair(PRES, E, C, C, idx=0)]
        assert consistency(pairs) == 1.0

    def test_no_preserving_pairs_undefined(self):
        assert consistency([_pair(ALT, E, E, C)]) is None

    def test_counts(self):
        pairs = [
            _pair(ALT, E, E, C, idx=0),
            _pair(ALT, E, C, C, idx=1),
            _pair(PRES, E, E, E, idx=2),
        ]
        assert contrast_counts(pairs) == {
            "contrast_pairs": 3,
            "altering_pairs": 2,
            "altering_eligible": 1,
            "preserving_pairs": 1,
        }


class TestBruteForceEquivalence:
    """Randomized equivalence against loop-based enumeration oracles."""

    def test_random_contrast_sets(self):
        rng = random.Random(99)
        for _ in range(200):
            pairs = []
            for idx in range(rng.randint(1, 50)):
                gold_y = rng.choice([E, C])
                pairs.append(
                    ContrastPair(
                        original_id=f"y{idx}",
                        original_gold=gold_y,
                        original_pred=rng.choice([E, C]),
                        perturbed_id=f"x{idx}",
                        perturbed_gold=rng.choice([E, C]),
                        perturbed_pred=rng.choice([E, C]),
                        intervention=rng.choice([ALT, PRES]),
                        model_tag="m",
                    )
                )
            assert faithfulness(pairs) == _faithfulness_oracle(pairs)
            assert consistency(pairs) == _consistency_oracle(pairs)


def _faithfulness_oracle(pairs):
    total = 0
    n = 0
    for p in pairs:
        if p.intervention is ALT and p.original_pred is p.original_gold:
            n += 1
            if p.original_pred is not p.perturbed_pred:
                total += 1
    return total / n if n else None


def _consistency_oracle(pairs):
    total = 0
    n = 0
    for p in pairs:
        if p.intervention is PRES:
            n += 1
            if p.original_pred is p.perturbed_pred:
                total += 1
    return total / n if n else None


class TestAgreementMatrix:
    def _records(self, labels, tag):
        return [
            PredictionRecord(str(i), lab, float(lab.numeric), tag) for i, lab in enumerate(labels)
        ]

    def test_self_agreement(self):
        records = self._records([E, C, E], "a")
        matrix = agreement_matrix([("a", records), ("a2", list(records))])
        assert matrix.matrix[0][1] == 1.0

    def test_one_of_four_differs(self):
        first = self._records([E, C, E, C], "a")
        second = self._records([E, C, E, E], "b")
        matrix = agreement_matrix([("a", first), ("b", second)])
        assert matrix.matrix[0][1] == pytest.approx(0.75)
        assert matrix.matrix[1][0] == pytest.approx(0.75)

    def test_complementary_predictions(self):
        first = self._records([E, E], "a")
        second = self._records([C, C], "b")
        matrix = agreement_matrix([("a", first), ("b", second)])
        assert matrix.matrix[0][1] == 0.0

    def test_symmetry_and_unit_diagonal(self):
        rng = random.Random(3)
        sets = []
        for tag in "abcd":
            labels = [rng.choice([E, C]) for _ in range(10)]
            sets.append((tag, self._records(labels, tag)))
        matrix = agreement_matrix(sets)
        n = len(matrix.model_tags)
        for i in range(n):
            assert matrix.matrix[i][i] == 1.0
            for j in range(n):
                assert matrix.matrix[i][j] == matrix.matrix[j][i]

    def test_disjoint_ids(self):
        first = [PredictionRecord("a", E, 1.0, "x")]
        second = [PredictionRecord("b", E, 1.0, "y")]
        with pytest.raises(DisjointIdSets):
            agreement_matrix([("x", first), ("y", second)])


@pytest.fixture
def breakdown_setup(tmp_path):
    directory = tmp_path / "trials"
    write_trial(directory, make_trial("T1", results=["one two three four five."]))
    write_trial(directory, make_trial("T2", eligibility=["six seven eight."]))
    corpus = load_corpus(directory)
    instances = [
        NLIInstance("r1", InstanceType.SINGLE, SectionId.RESULTS, "T1", None, "s one", label=E),
        NLIInstance("r2", InstanceType.SINGLE, SectionId.RESULTS, "T1", None, "s two", label=C),
        NLIInstance("e1", InstanceType.SINGLE, SectionId.ELIGIBILITY, "T2", None, "s three sss", label=E),
    ]
    shortened = {
        i.instance_id: ShortenedPremise(i.instance_id, "fp", "cut text", None, {"primary": 2})
        for i in instances
    }
    records = [
        PredictionRecord("r1", E, 1.0, "m"),
        PredictionRecord("r2", E, 1.0, "m"),
        PredictionRecord("e1", E, 1.0, "m"),
    ]
    return corpus, instances, shortened, records


class TestBreakdown:
    def test_single_slice_matches_global(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        only_results = instances[:2]
        rows = breakdown(only_results, corpus, shortened, records[:2], "section", TOK)
        assert len(rows) == 1
        global_f1, _, _ = macro_f1([E, C], [E, E])
        assert rows[0].macro_f1 == pytest.approx(global_f1)

    def test_rows_match_per_slice_oracle(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        rows = breakdown(instances, corpus, shortened, records, "section", TOK)
        by_slice = {row.slice_name: row for row in rows}
        assert set(by_slice) == {"results", "eligibility"}
        expected_results_f1, _, _ = macro_f1([E, C], [E, E])
        assert by_slice["results"].macro_f1 == pytest.approx(expected_results_f1)
        assert by_slice["eligibility"].macro_f1 == pytest.approx(macro_f1([E], [E])[0])
        # original premise lengths measured on resolved section text
        assert by_slice["results"].avg_premise_tokens_original == pytest.approx(5.0)
        assert by_slice["eligibility"].avg_premise_tokens_original == pytest.approx(3.0)
        assert by_slice["results"].avg_premise_tokens_shortened == pytest.approx(2.0)

    def test_statement_column_independent_of_lengths_source(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        original = breakdown(instances, corpus, shortened, records, "section", TOK)
        shortened_rows = breakdown(
            instances, corpus, shortened, records, "section", TOK, length_source="shortened"
        )
        for a, b in zip(original, shortened_rows):
            assert a.avg_statement_tokens == b.avg_statement_tokens

    def test_type_grouping(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        rows = breakdown(instances, corpus, shortened, records, "type", TOK)
        assert [row.slice_name for row in rows] == ["Single"]

    def test_missing_predictions(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        with pytest.raises(MissingPredictions):
            breakdown(instances, corpus, shortened, records[:1], "section", TOK)


class TestBuildContrastPairs:
    def _instances(self):
        original = NLIInstance(
            "y1", InstanceType.SINGLE, SectionId.RESULTS, "T1", None, "orig", label=E
        )
        perturbed = NLIInstance(
            "x1",
            InstanceType.SINGLE,
            SectionId.RESULTS,
            "T1",
            None,
            "pert",
            label=C,
            contrast=ContrastLink("y1", ALT),
        )
        return [original, perturbed]

    def test_pairs_built(self):
        records = [PredictionRecord("y1", E, 1.0, "m"), PredictionRecord("x1", E, 1.0, "m")]
        [pair] = build_contrast_pairs(self._instances(), records)
        assert pair.original_id == "y1" and pair.perturbed_id == "x1"
        assert pair.intervention is ALT

    def test_missing_prediction(self):
        records = [PredictionRecord("y1", E, 1.0, "m")]
        with pytest.raises(MissingPredictions):
            build_contrast_pairs(self._instances(), records)

    def test_mixed_tags_rejected(self):
        records = [PredictionRecord("y1", E, 1.0, "m1"), PredictionRecord("x1", E, 1.0, "m2")]
        with pytest.raises(MixedModelTags):
            build_contrast_pairs(self._instances(), records)


class TestComputeReport:
    def test_report_fields(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        report = compute_report(instances, records)
        assert report.model_tag == "m"
        assert report.faithfulness is None
        assert report.consistency is None
        assert report.counts["instances"] == 3
        expected, _, _ = macro_f1([E, C, E], [E, E, E])
        assert report.macro_f1 == pytest.approx(expected)

    def test_report_serialization_round_trip(self, breakdown_setup):
        corpus, instances, shortened, records = breakdown_setup
        rows = {
            "section": breakdown(instances, corpus, shortened, records, "section", TOK),
        }
        report = compute_report(instances, records, breakdowns=rows)
        from ctrnli.metrics import MetricsReport

        assert MetricsReport.from_dict(report.to_dict()) == report
