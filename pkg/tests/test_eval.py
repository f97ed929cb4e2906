import numpy as np
import pytest

from lisa.evaluate import (
    RankingTask,
    aggregate_results,
    evaluate_ranking,
    run_synthetic_eval,
    sample_negatives,
    score_candidates,
    synth_dataset,
)
from lisa.quantizer import Codebooks, encode_batch, fit_codebooks, reconstruct_batch


class TestRankingTask:
    def test_rejects_duplicate_negatives(self):
        with pytest.raises(ValueError):
            RankingTask(positive=1, negatives=(2, 2, 3))

    def test_rejects_positive_among_negatives(self):
        with pytest.raises(ValueError):
            RankingTask(positive=1, negatives=(1, 2))


class TestEvaluateRanking:
    def _task(self, n_neg=10, ks=(5, 10)):
        return RankingTask(positive=0, negatives=tuple(range(1, n_neg + 1)), k_values=ks)

    def test_top_ranked_positive(self):
        scores = {0: 5.0, **{i: float(-i) for i in range(1, 11)}}
        res = evaluate_ranking(scores, self._task())
        assert res.rank == 1
        assert res.ndcg[5] == pytest.approx(1.0)
        assert res.hr[5] == 1.0

    def test_rank_two_closed_form(self):
        scores = {0: 5.0, 1: 7.0, **{i: float(-i) for i in range(2, 11)}}
        res = evaluate_ranking(scores, self._task())
        assert res.rank == 2
        assert res.ndcg[5] == pytest.approx(0.63093, abs=1e-5)

    def test_rank_past_cutoff_scores_zero(self):
        scores = {0: -100.0, **{i: float(i) for i in range(1, 12)}}
        res = evaluate_ranking(scores, RankingTask(0, tuple(range(1, 12)), (10,)))
        assert res.rank == 12
        assert res.hr[10] == 0.0
        assert res.ndcg[10] == 0.0

    def test_ties_count_against_the_positive(self):
        scores = {0: 1.0, 1: 1.0, 2: 0.0}
        res = evaluate_ranking(scores, RankingTask(0, (1, 2), (1, 2)))
        assert res.rank == 2
        assert res.hr[1] == 0.0

    def test_metrics_monotone_in_k_and_ndcg_below_hr(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            scores = {i: float(rng.normal()) for i in range(21)}
            res = evaluate_ranking(scores, RankingTask(0, tuple(range(1, 21)), (1, 3, 5, 10, 20)))
            ks = sorted(res.hr)
            hr = [res.hr[k] for k in ks]
            ndcg = [res.ndcg[k] for k in ks]
            assert hr == sorted(hr)
            assert ndcg == sorted(ndcg)
            assert all(n <= h for n, h in zip(ndcg, hr))

    def test_missing_candidate_is_an_error(self):
        with pytest.raises(ValueError):
            evaluate_ranking({0: 1.0}, RankingTask(0, (1,), (5,)))


class TestScoreCandidates:
    def test_zero_representation_scores_zero(self):
        cands = np.random.default_rng(0).normal(size=(7, 4))
        np.testing.assert_array_equal(score_candidates(np.zeros(4), cands), np.zeros(7))

    def test_self_match_beats_orthogonal_distractors(self):
        repr_vec = np.array([1.0, 0.0, 0.0])
        cands = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        scores = score_candidates(repr_vec, cands)
        assert np.argmax(scores) == 1

    def test_encoded_candidates_match_reconstruct_then_dot(self):
        rng = np.random.default_rng(1)
        emb = rng.normal(size=(40, 6))
        cb = fit_codebooks(emb, 2, 4, iters=5, seed=0)
        codes = encode_batch(emb, cb)
        repr_vec = rng.normal(size=6)
        direct = score_candidates(repr_vec, (codes, cb))
        via_recon = reconstruct_batch(codes, cb) @ repr_vec
        np.testing.assert_allclose(direct, via_recon, atol=1e-6)


class TestSampleNegatives:
    def test_excludes_history_and_positive(self):
        rng = np.random.default_rng(0)
        history = [1, 2, 3]
        negs = sample_negatives(rng, 50, history, positive=4, n=20)
        assert len(negs) == len(set(negs)) == 20
        assert not (set(negs) & {1, 2, 3, 4})

    def test_pool_too_small(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_negatives(rng, 10, range(8), positive=9, n=5)


class TestSynthDataset:
    def test_deterministic_per_seed(self):
        a = synth_dataset(20, 100, structure_seed=5)
        b = synth_dataset(20, 100, structure_seed=5)
        np.testing.assert_array_equal(a.item_embeddings, b.item_embeddings)
        np.testing.assert_array_equal(a.positives, b.positives)
        for sa, sb in zip(a.sequences, b.sequences):
            np.testing.assert_array_equal(sa, sb)

    def test_single_item_catalog_is_trivially_solved(self):
        ds = synth_dataset(5, 1, seq_len_range=(3, 3), structure_seed=0)
        for positive in ds.positives:
            task = RankingTask(int(positive), (), (1,))
            res = evaluate_ranking({int(positive): 0.0}, task)
            assert res.hr[1] == 1.0

    def test_sequences_within_length_range(self):
        ds = synth_dataset(30, 80, seq_len_range=(5, 9), structure_seed=1)
        lengths = [len(s) for s in ds.sequences]
        assert min(lengths) >= 5 and max(lengths) <= 9


class TestAggregate:
    def test_bounds_preserved(self):
        rng = np.random.default_rng(0)
        results = []
        for _ in range(200):
            scores = {i: float(rng.normal()) for i in range(11)}
            results.append(
                evaluate_ranking(scores, RankingTask(0, tuple(range(1, 11)), (5, 10)))
            )
        report = aggregate_results(results)
        assert report.n_users == 200
        for k in (5, 10):
            assert 0.0 <= report.ndcg[k] <= report.hr[k] <= 1.0

    def test_report_formats(self):
        results = [
            evaluate_ranking({0: 1.0, 1: 0.0}, RankingTask(0, (1,), (1,))) for _ in range(3)
        ]
        report = aggregate_results(results)
        assert report.as_dict() == {"n_users": 3, "hr@1": 1.0, "ndcg@1": 1.0}
        lines = report.as_csv().strip().split("\n")
        assert lines[0] == "n_users,hr@1,ndcg@1"
        assert lines[1].startswith("3,1.000000,")


class TestSyntheticEval:
    def test_structured_scorers_beat_random(self):
        ds = synth_dataset(150, 300, structure_seed=0)
        random_rep = run_synthetic_eval(ds, "random", seed=0)
        vanilla_rep = run_synthetic_eval(ds, "vanilla", seed=0)
        lisa_rep = run_synthetic_eval(ds, "lisa", seed=0)
        assert vanilla_rep.hr[10] > 2 * random_rep.hr[10]
        assert lisa_rep.hr[10] > 2 * random_rep.hr[10]

    def test_unknown_scorer(self):
        ds = synth_dataset(2, 150, structure_seed=0)
        with pytest.raises(ValueError):
            run_synthetic_eval(ds, "oracle")

    def test_supplied_codebooks_are_used(self):
        ds = synth_dataset(10, 150, structure_seed=0)
        planted = Codebooks(ds.centers[None, :, :])
        rep = run_synthetic_eval(ds, "lisa", codebooks=planted, seed=0)
        assert 0.0 <= rep.hr[10] <= 1.0
