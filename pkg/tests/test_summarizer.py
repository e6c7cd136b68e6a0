import pytest
from hypothesis import given, strategies as st

from ctrnli.corpus import InstanceType, Label, NLIInstance, SectionId, load_corpus
from ctrnli.errors import UnlabeledInstance
from ctrnli.summarizer import (
    FineTuneConfig,
    SummarizerConfig,
    SummaryTrainPair,
    build_finetune_dataset,
    rouge1,
)

from conftest import make_trial, write_trial

text_strategy = st.text(alphabet="abc d", max_size=30)


class TestRouge1:
    def test_identity(self):
        assert rouge1("the quick fox", "the quick fox") == (1.0, 1.0, 1.0)

    def test_two_of_three_overlap(self):
        p, r, f = rouge1("a b c", "a b d")
        assert (p, r, f) == (2 / 3, 2 / 3, 2 / 3)

    def test_empty_candidate(self):
        assert rouge1("", "a b") == (0.0, 0.0, 0.0)

    def test_empty_both(self):
        assert rouge1("", "") == (0.0, 0.0, 0.0)

    def test_clipped_counts(self):
        # candidate repeats "a" three times; reference has it once
        p, r, f = rouge1("a a a", "a b")
        assert p == pytest.approx(1 / 3)
        assert r == pytest.approx(1 / 2)

    def test_case_and_punctuation_insensitive(self):
        assert rouge1("The, Fox!", "the fox")[2] == 1.0

    @given(text_strategy, text_strategy)
    def test_f1_symmetric_under_swap(self, a, b):
        p1, r1, f1 = rouge1(a, b)
        p2, r2, f2 = rouge1(b, a)
        assert (p1, r1) == (r2, p2)
        assert f1 == pytest.approx(f2)

    @given(text_strategy, text_strategy)
    def test_scores_in_unit_interval(self, a, b):
        for value in rouge1(a, b):
            assert 0.0 <= value <= 1.0


def _instance(instance_id, label, *, comparison=False):
    return NLIInstance(
        instance_id=instance_id,
        instance_type=InstanceType.COMPARISON if comparison else InstanceType.SINGLE,
        section=SectionId.RESULTS,
        primary_trial="T1",
        secondary_trial="T2" if comparison else None,
        statement=f"statement for {instance_id}",
        label=label,
    )


@pytest.fixture
def pair_corpus(tmp_path):
    directory = tmp_path / "trials"
    write_trial(directory, make_trial("T1", results=["primary results line."]))
    write_trial(directory, make_trial("T2", results=["secondary results line."]))
    return load_corpus(directory)


class TestBuildFinetuneDataset:
    def test_excludes_contradiction(self, pair_corpus):
        instances = [_instance("e", Label.ENTAILMENT), _instance("c", Label.CONTRADICTION)]
        pairs = build_finetune_dataset(instances, pair_corpus)
        assert len(pairs) == 1
        assert pairs[0].target == "statement for e"

    def test_comparison_distinct_gives_two_pairs(self, pair_corpus):
        pairs = build_finetune_dataset(
            [_instance("e", Label.ENTAILMENT, comparison=True)], pair_corpus, mode="distinct"
        )
        assert len(pairs) == 2
        assert pairs[0].target == pairs[1].target
        assert "primary results" in pairs[0].source
        assert "secondary results" in pairs[1].source

    def test_comparison_combined_gives_one_pair(self, pair_corpus):
        pairs = build_finetune_dataset(
            [_instance("e", Label.ENTAILMENT, comparison=True)], pair_corpus, mode="combined"
        )
        assert len(pairs) == 1
        assert "primary results" in pairs[0].source
        assert "secondary results" in pairs[0].source

    def test_sources_carry_prompt_prefix(self, pair_corpus):
        instances = [_instance(f"e{i}", Label.ENTAILMENT) for i in range(12)] + [
            _instance(f"c{i}", Label.CONTRADICTION) for i in range(8)
        ]
        pairs = build_finetune_dataset(instances, pair_corpus)
        assert len(pairs) == 12
        assert all(p.source.startswith("summarize: ") for p in pairs)

    def test_unlabeled_rejected(self, pair_corpus):
        with pytest.raises(UnlabeledInstance):
            build_finetune_dataset([_instance("u", None)], pair_corpus)

    def test_size_matches_entailment_count(self, pair_corpus):
        labels = [Label.ENTAILMENT, Label.CONTRADICTION] * 5
        instances = [_instance(str(i), label) for i, label in enumerate(labels)]
        pairs = build_finetune_dataset(instances, pair_corpus)
        assert len(pairs) == sum(1 for label in labels if label is Label.ENTAILMENT)


class TestConfigs:
    def test_summary_cap_below_source_cap(self):
        with pytest.raises(ValueError):
            SummarizerConfig(model_identifier="m", max_source_tokens=100, max_summary_tokens=100)

    def test_epoch_grid_sorted_and_positive(self):
        config = FineTuneConfig(epochs=(7, 2, 10, 5))
        assert config.epochs == (2, 5, 7, 10)
        with pytest.raises(ValueError):
            FineTuneConfig(epochs=())
        with pytest.raises(ValueError):
            FineTuneConfig(learning_rate=0)

    def test_default_grid(self):
        assert FineTuneConfig().epochs == (2, 5, 7, 10)
