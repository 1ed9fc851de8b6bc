"""
Tests for trial scoring, EER and the report grid
"""

import numpy as np
import pytest

from src.corpus import Trial, TrialList
from src.domain import DomainClassifier
from src.encoder import EmbeddingStore
from src.errors import DataError, ShapeError
from src.evaluation import ScoreSet, build_report, eer, eer_bruteforce, order_test_sets, score_store, score_trials
from src.evaluation.scoring import cosine, score_pairs
from src.fusion import FusionMode


class TestEer:

    @pytest.mark.parametrize("targets,nontargets,expected", [
        ([0.9, 0.8], [0.1, 0.2], 0.0),
        ([0.1, 0.2], [0.8, 0.9], 1.0),
        ([0.5], [0.5], 0.5),
        ([0.3, 0.6, 0.9], [0.1, 0.4, 0.7], 1.0 / 3.0),
        ([0.8, 0.6, 0.4], [0.5, 0.3, 0.2], 1.0 / 3.0),
        ([1.0], [0.0], 0.0),
    ])
    def test_fixed_examples(self, targets, nontargets, expected):
        s = ScoreSet.from_lists(targets, nontargets)
        assert eer(s)[0] == pytest.approx(expected)
        assert eer_bruteforce(s) == pytest.approx(expected)

    def test_separating_threshold(self):
        value, threshold = eer(ScoreSet.from_lists([0.9, 0.8], [0.1, 0.2]))
        assert value == 0.0 and 0.2 < threshold < 0.8

    def test_swapped_lists(self):
        assert eer(ScoreSet.from_lists([0.1, 0.4, 0.7], [0.3, 0.6, 0.9]))[0] == pytest.approx(2.0 / 3.0)

    def test_monotone_transform_and_duplicates(self, rng):
        targets, nontargets = rng.normal(1.0, 1.0, 30), rng.normal(0.0, 1.0, 50)
        base = eer(ScoreSet.from_lists(targets, nontargets))[0]
        assert eer(ScoreSet.from_lists(np.exp(targets), np.exp(nontargets)))[0] == pytest.approx(base, abs=1e-12)
        doubled = ScoreSet.from_lists(np.repeat(targets, 2), np.repeat(nontargets, 2))
        assert eer(doubled)[0] == pytest.approx(base, abs=1e-12)

    def test_order_invariant(self, rng):
        s = ScoreSet.from_lists(rng.normal(1.0, 1.0, 40), rng.normal(0.0, 1.0, 60))
        order = rng.permutation(100)
        shuffled = ScoreSet(s.labels[order], s.scores[order])
        assert eer(shuffled)[0] == eer(s)[0]

    def test_matches_bruteforce(self, rng):
        for _ in range(150):
            n_t, n_n = rng.integers(1, 60, size=2)
            targets = rng.normal(1.0, 1.0, n_t)
            nontargets = rng.normal(0.0, 1.0, n_n)
            if rng.random() < 0.5:
                targets, nontargets = np.round(targets, 1), np.round(nontargets, 1)
            s = ScoreSet.from_lists(targets, nontargets)
            assert eer(s)[0] == pytest.approx(eer_bruteforce(s), abs=1e-12)

    @pytest.mark.slow
    def test_matches_bruteforce_exhaustive(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            size = int(rng.integers(2, 501))
            n_t = int(rng.integers(1, size))
            scores = rng.normal(0.0, 1.0, size)
            scores[:n_t] += rng.uniform(0.0, 3.0)
            if rng.random() < 0.3:
                scores = np.round(scores, 1)
            s = ScoreSet.from_lists(scores[:n_t], scores[n_t:])
            assert eer(s)[0] == pytest.approx(eer_bruteforce(s), abs=1e-12)

    def test_needs_both_classes(self):
        with pytest.raises(DataError):
            eer(ScoreSet.from_lists([0.5, 0.6], []))
        with pytest.raises(DataError):
            eer_bruteforce(ScoreSet.from_lists([], [0.1]))


class TestScoring:

    def test_cosine(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == 0.0
        assert cosine(np.array([1.0, 1.0]), np.array([-3.0, -3.0])) == pytest.approx(-1.0)
        assert cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(1 / np.sqrt(2))
        with pytest.raises(DataError):
            cosine(np.zeros(3), np.ones(3))
        with pytest.raises(ShapeError):
            cosine(np.ones(2), np.ones(3))

    def test_score_pairs_bounded(self, rng):
        a = rng.standard_normal((50, 4))
        scores = score_pairs(a, 3.0 * a)
        assert np.all(scores <= 1.0) and scores == pytest.approx(1.0)

    def test_score_set_validation(self, tmp_path):
        with pytest.raises(DataError):
            ScoreSet(np.array([1, 0]), np.array([0.5, np.nan]))
        with pytest.raises(ShapeError):
            ScoreSet(np.array([1, 0]), np.array([0.5]))
        s = ScoreSet.from_lists([0.75], [0.25])
        s.save(tmp_path / "s.txt")
        assert (tmp_path / "s.txt").read_text(encoding="utf-8") == "1 0.750000\n0 0.250000\n"

    def test_score_trials_modes(self, rng):
        ids = ["a", "b", "c"]
        child = EmbeddingStore(ids, rng.standard_normal((3, 4)))
        adult = EmbeddingStore(ids, rng.standard_normal((3, 4)))
        trials = TrialList([Trial(1, "a", "b"), Trial(0, "a", "c")])
        adult_scores = score_trials(trials, FusionMode.ADULT_ONLY, adult_store=adult)
        assert adult_scores.scores[0] == pytest.approx(cosine(adult.get("a"), adult.get("b")), rel=1e-6)
        assert list(adult_scores.labels) == [1, 0]
        child_scores = score_trials(trials, FusionMode.CHILD_ONLY, child_store=child)
        assert child_scores.scores[1] == pytest.approx(cosine(child.get("a"), child.get("c")), rel=1e-6)
        fused = score_trials(trials, FusionMode.AASV, child, adult, DomainClassifier(4, hidden=3))
        assert np.all(np.abs(fused.scores) <= 1.0)

    def test_score_trials_errors(self, rng):
        store = EmbeddingStore(["a", "b"], rng.standard_normal((2, 4)))
        with pytest.raises(DataError):
            score_trials(TrialList([]), adult_store=store)
        with pytest.raises(DataError):
            score_store(TrialList([Trial(1, "a", "missing")]), store)
        with pytest.raises(DataError):
            score_trials(TrialList([Trial(1, "a", "b")]), FusionMode.AASV, store, store)


class TestReport:

    def test_column_order(self):
        assert order_test_sets(["adult", "child-old", "child-young", "child-mid"]) == [
            "child-young", "child-mid", "child-old", "adult"]

    def test_grid(self, tmp_path):
        results = {("A-SV", "adult"): 0.05, ("A-SV", "child-young"): 0.2,
                   ("C-SV", "adult"): None, ("C-SV", "child-young"): 0.1}
        report = build_report(results, ["A-SV", "C-SV"], ["adult", "child-young"], {"seed": 1})
        assert report.test_sets == ["child-young", "adult"]
        assert report.eer_percent("A-SV", "adult") == pytest.approx(5.0)
        assert report.eer_percent("C-SV", "adult") is None
        assert report.to_tsv() == "system\tchild-young\tadult\nA-SV\t20.00\t5.00\nC-SV\t10.00\t-\n"
        assert report.child_mean("A-SV") == pytest.approx(20.0)
        assert len(report.rows) == 4

        report.write(tmp_path)
        assert {p.name for p in tmp_path.iterdir()} == {"report.tsv", "report.txt", "report_meta.json"}
        assert (tmp_path / "report.txt").read_text(encoding="utf-8").startswith("EER (%)")

    def test_out_of_range(self):
        with pytest.raises(DataError):
            build_report({("A-SV", "adult"): 1.5}, ["A-SV"], ["adult"])
