import numpy as np
import pytest

import oracles

from rolediar.core import RoleLabel, TimeInterval, make_role_labels
from rolediar.diarize import (
    DiarizationHypothesis,
    PipelineConfig,
    classify_windows,
    estimate_profiles,
    format_rttm,
    hac_cluster,
    hac_merge_sequence,
    merge_contiguous,
    parse_rttm,
    read_rttm,
    top_confidence_threshold,
    windows_to_records,
    write_rttm,
)
from rolediar.embed import AudioWindow
from rolediar.errors import ParameterError, ProfileEstimationError
from rolediar.plda import PldaModel
from rolediar.roles import RoleAssignment


def iv(a, b):
    return TimeInterval.from_seconds(a, b)


def assignment(segment_id, role_index, confidence, n_roles=2):
    pps = tuple(100.0 + 10.0 * i for i in range(n_roles))
    return RoleAssignment(
        segment_id=segment_id,
        role=RoleLabel(role_index, f"role{role_index}"),
        perplexities=pps,
        confidence=confidence,
    )


def simple_model(d=2, between=1.0):
    return PldaModel(np.zeros(d), np.eye(d) * between, np.eye(d))


class TestHacMergeSequence:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_matches_bruteforce_oracle(self, n):
        rng = np.random.default_rng(100 + n)
        for trial in range(30):
            sims = rng.normal(size=(n, n))
            sims = 0.5 * (sims + sims.T)
            for k in range(1, n + 1):
                got_clusters, got_merges = hac_merge_sequence(sims, k)
                exp_clusters, exp_merges = oracles.average_link_merges(sims, k)
                assert got_merges == exp_merges
                assert got_clusters == exp_clusters

    def test_tie_breaks_to_smallest_pair(self):
        # all similarities equal: the first merge must be clusters (0, 1)
        sims = np.ones((4, 4))
        _, merges = hac_merge_sequence(sims, 1)
        assert merges[0] == ((0,), (1,))
        # after merging [0,1], the tie between ([0,1],2), (2,3) etc. goes
        # to the lexicographically smallest id pair, i.e. (0, 2)
        assert merges[1] == ((0, 1), (2,))

    def test_identity_partition(self):
        sims = np.zeros((3, 3))
        clusters, merges = hac_merge_sequence(sims, 3)
        assert clusters == [[0], [1], [2]]
        assert merges == []


class TestHacCluster:
    def windows_for(self, vectors):
        return [
            AudioWindow(f"w{i}", iv(0.75 * i, 0.75 * i + 1.5), np.asarray(v, dtype=float))
            for i, v in enumerate(vectors)
        ]

    def test_two_windows_two_clusters(self):
        wins = self.windows_for([[0.0, 0.0], [5.0, 5.0]])
        hyp = hac_cluster(wins, simple_model(), 2)
        assert len(hyp.labels) == 2

    def test_separated_speakers_recovered(self):
        rng = np.random.default_rng(8)
        a = [rng.normal(size=2) * 0.1 + [4.0, 0.0] for _ in range(3)]
        b = [rng.normal(size=2) * 0.1 + [-4.0, 0.0] for _ in range(3)]
        wins = self.windows_for(a + b)
        hyp = hac_cluster(wins, simple_model(), 2, "s")
        # windows 0-2 share a label, 3-5 share the other
        labels = []
        for rec_iv, lab in hyp.records:
            labels.append(lab)
        assert len(hyp.labels) == 2

    def test_too_few_windows(self):
        wins = self.windows_for([[0.0, 0.0]])
        with pytest.raises(ParameterError):
            hac_cluster(wins, simple_model(), 2)


class TestTopConfidenceThreshold:
    def test_all_selected_at_100(self):
        a = [assignment(i, 1, c) for i, c in enumerate([0.5, 2.0, 3.0])]
        t = top_confidence_threshold(a, 100.0)
        assert all(x.confidence > t for x in a)

    def test_seventy_percent_of_ten(self):
        a = [assignment(i, 1, float(i)) for i in range(10)]
        t = top_confidence_threshold(a, 70.0)
        assert sum(1 for x in a if x.confidence > t) == 7

    def test_ties_at_cut_included(self):
        a = [assignment(i, 1, c) for i, c in enumerate([1.0, 2.0, 2.0, 3.0])]
        t = top_confidence_threshold(a, 50.0)  # keep 2, but 2.0 is tied
        assert sum(1 for x in a if x.confidence > t) == 3

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            top_confidence_threshold([], 50.0)

    def test_bad_percent(self):
        with pytest.raises(ParameterError):
            top_confidence_threshold([assignment(0, 1, 1.0)], 0.0)


class TestEstimateProfiles:
    def roles(self):
        return make_role_labels(["role1", "role2"])

    def test_threshold_below_all_gives_plain_mean(self):
        vecs = [np.array([1.0, 0.0]), np.array([3.0, 0.0]), np.array([0.0, 2.0])]
        pairs = [
            (assignment(0, 1, 0.1), vecs[0]),
            (assignment(1, 1, 0.2), vecs[1]),
            (assignment(2, 2, 0.3), vecs[2]),
        ]
        profiles = estimate_profiles(pairs, -1.0, self.roles())
        assert np.array_equal(profiles[0].vector, np.stack(vecs[:2]).mean(axis=0))
        assert np.array_equal(profiles[1].vector, vecs[2])
        assert profiles[0].support_count == 2

    def test_single_survivor(self):
        pairs = [
            (assignment(0, 1, 0.5), np.array([1.0, 1.0])),
            (assignment(1, 1, 5.0), np.array([2.0, 0.0])),
            (assignment(2, 2, 5.0), np.array([0.0, 1.0])),
        ]
        profiles = estimate_profiles(pairs, 1.0, self.roles())
        assert np.array_equal(profiles[0].vector, np.array([2.0, 0.0]))
        assert profiles[0].support_count == 1

    def test_hand_computed_mixed_case(self):
        # confidences {0.5, 2.0, 3.0} with threshold 1 -> mean of last two
        vecs = [np.array([9.0, 9.0]), np.array([2.0, 0.0]), np.array([0.0, 4.0])]
        pairs = [
            (assignment(i, 1, c), v)
            for i, (c, v) in enumerate(zip([0.5, 2.0, 3.0], vecs))
        ]
        pairs.append((assignment(3, 2, 1.0), np.array([7.0, 7.0])))
        profiles = estimate_profiles(pairs, 1.0, self.roles())
        assert np.array_equal(profiles[0].vector, np.array([1.0, 2.0]))

    def test_empty_after_gating_falls_back_to_role_mean(self):
        pairs = [
            (assignment(0, 1, 0.1), np.array([2.0, 0.0])),
            (assignment(1, 1, 0.2), np.array([4.0, 0.0])),
            (assignment(2, 2, 9.0), np.array([0.0, 1.0])),
        ]
        profiles = estimate_profiles(pairs, 5.0, self.roles())
        assert np.array_equal(profiles[0].vector, np.array([3.0, 0.0]))

    def test_role_without_segments_raises(self):
        pairs = [(assignment(0, 1, 1.0), np.array([1.0, 0.0]))]
        with pytest.raises(ProfileEstimationError):
            estimate_profiles(pairs, 0.0, self.roles())

    def test_gating_uses_strict_inequality(self):
        pairs = [
            (assignment(0, 1, 1.0), np.array([1.0, 0.0])),
            (assignment(1, 1, 2.0), np.array([3.0, 0.0])),
            (assignment(2, 2, 2.0), np.array([0.0, 1.0])),
        ]
        profiles = estimate_profiles(pairs, 1.0, self.roles())
        # confidence exactly 1.0 is excluded
        assert np.array_equal(profiles[0].vector, np.array([3.0, 0.0]))

    def test_profile_shift_bounded_by_flip_fraction(self):
        """Flipping k labels moves each profile by at most
        (k / selected_count) * max pairwise distance."""
        rng = np.random.default_rng(12)
        labels = self.roles()
        for _ in range(30):
            n = 12
            vecs = [rng.normal(size=3) for _ in range(n)]
            role_of = [1 + (i % 2) for i in range(n)]
            pairs = [
                (assignment(i, role_of[i], 1.0), vecs[i]) for i in range(n)
            ]
            clean = estimate_profiles(pairs, -1.0, labels)
            k = int(rng.integers(1, 4))
            flip = rng.choice(n, size=k, replace=False)
            corrupted = [
                (assignment(i, 3 - role_of[i] if i in flip else role_of[i], 1.0), vecs[i])
                for i in range(n)
            ]
            dirty = estimate_profiles(corrupted, -1.0, labels)
            max_dist = max(
                np.linalg.norm(a - b) for a in vecs for b in vecs
            )
            for c, d in zip(clean, dirty):
                bound = (k / d.support_count) * max_dist + 1e-9
                assert np.linalg.norm(c.vector - d.vector) <= bound


class TestClassifyWindows:
    def windows(self, vectors):
        return [
            AudioWindow(f"w{i}", iv(0.75 * i, 0.75 * i + 1.5), np.asarray(v, float))
            for i, v in enumerate(vectors)
        ]

    def profiles(self, vectors):
        from rolediar.diarize import SpeakerProfile

        return [
            SpeakerProfile(RoleLabel(i + 1, f"role{i + 1}"), np.asarray(v, float), 1)
            for i, v in enumerate(vectors)
        ]

    def test_window_at_profile_gets_its_role(self):
        profiles = self.profiles([[4.0, 0.0], [-4.0, 0.0]])
        wins = self.windows([[4.0, 0.0], [-4.0, 0.0], [3.5, 0.5]])
        hyp = classify_windows(wins, profiles, simple_model())
        labels = [lab for _, lab in hyp.records]
        assert labels[0] == "role1"
        assert labels[-1] == "role1"

    def test_identical_profiles_tie_to_lowest_index(self):
        profiles = self.profiles([[1.0, 1.0], [1.0, 1.0]])
        wins = self.windows([[0.0, 1.0], [5.0, 2.0]])
        hyp = classify_windows(wins, profiles, simple_model())
        assert {lab for _, lab in hyp.records} == {"role1"}

    def test_profile_order_invariance(self):
        rng = np.random.default_rng(13)
        profiles = self.profiles([[3.0, 0.0], [-3.0, 1.0]])
        wins = self.windows(rng.normal(size=(6, 2)) * 2)
        hyp1 = classify_windows(wins, profiles, simple_model())
        hyp2 = classify_windows(wins, list(reversed(profiles)), simple_model())
        assert hyp1.records == hyp2.records

    def test_coverage_equals_window_union(self):
        profiles = self.profiles([[3.0, 0.0], [-3.0, 0.0]])
        wins = self.windows([[3.0, 0.0], [-3.0, 0.0], [3.0, 0.1]])
        hyp = classify_windows(wins, profiles, simple_model())
        assert hyp.records[0][0].start_ms == wins[0].interval.start_ms
        assert hyp.records[-1][0].end_ms == wins[-1].interval.end_ms
        total = sum(r[0].duration_ms for r in hyp.records)
        assert total == wins[-1].interval.end_ms - wins[0].interval.start_ms


class TestWindowsToRecords:
    def test_midpoint_split(self):
        wins = [
            AudioWindow("w0", iv(0.0, 1.5), np.zeros(1)),
            AudioWindow("w1", iv(0.75, 2.25), np.zeros(1)),
        ]
        recs = windows_to_records(wins, ["A", "B"])
        assert recs == [(TimeInterval(0, 1125), "A"), (TimeInterval(1125, 2250), "B")]

    def test_same_label_merged(self):
        wins = [
            AudioWindow("w0", iv(0.0, 1.5), np.zeros(1)),
            AudioWindow("w1", iv(0.75, 2.25), np.zeros(1)),
        ]
        recs = windows_to_records(wins, ["A", "A"])
        assert recs == [(TimeInterval(0, 2250), "A")]

    def test_disjoint_windows_untouched(self):
        wins = [
            AudioWindow("w0", iv(0.0, 1.0), np.zeros(1)),
            AudioWindow("w1", iv(2.0, 3.0), np.zeros(1)),
        ]
        recs = windows_to_records(wins, ["A", "B"])
        assert recs == [(iv(0, 1), "A"), (iv(2, 3), "B")]

    def test_merge_contiguous(self):
        recs = [(iv(0, 1), "A"), (iv(1, 2), "A"), (iv(2, 3), "B")]
        assert merge_contiguous(recs) == [(iv(0, 2), "A"), (iv(2, 3), "B")]


class TestRunPipelineErrors:
    def test_missing_modality_is_configuration_error(self):
        from rolediar.diarize import PipelineConfig, SessionData, run_pipeline
        from rolediar.errors import ConfigurationError

        empty = SessionData(session_id="s")
        for mode in ("audio-only", "language-only", "linguistically-aided"):
            with pytest.raises(ConfigurationError):
                run_pipeline(empty, PipelineConfig(mode=mode))

    def test_unknown_mode_rejected(self):
        from rolediar.diarize import PipelineConfig
        from rolediar.errors import ConfigurationError

        with pytest.raises(ConfigurationError):
            PipelineConfig(mode="spectral")


class TestHypothesisAndRttm:
    def test_overlapping_records_rejected(self):
        with pytest.raises(ParameterError):
            DiarizationHypothesis("s", ((iv(0, 2), "A"), (iv(1, 3), "B")))

    def test_rttm_format_exact(self):
        hyp = DiarizationHypothesis("sess1", ((iv(0.5, 2.0), "role1"),))
        assert format_rttm(hyp) == "SPEAKER sess1 1 0.500 1.500 <NA> <NA> role1 <NA> <NA>\n"

    def test_rttm_roundtrip(self, tmp_path):
        hyp = DiarizationHypothesis(
            "sess1", ((iv(0.5, 2.0), "role1"), (iv(2.5, 3.25), "role2"))
        )
        path = tmp_path / "h.rttm"
        write_rttm(path, hyp)
        back = read_rttm(path)
        assert back["sess1"] == list(hyp.records)

    def test_parse_rejects_junk(self):
        from rolediar.errors import FormatError

        with pytest.raises(FormatError):
            parse_rttm(["SPKR x 1 0 1"])
