"""Frequency tables, dense ranks, CAS scoring, statistics, persistence."""

import collections
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cas_toolkit import cas
from cas_toolkit.dictionary import AnnotatedDataset, AnnotatedImage
from cas_toolkit.errors import FormatError, ScopeMismatchError, ValidationError


def image(image_id, class_label, **attributes):
    return AnnotatedImage(
        image_id=image_id,
        class_label=class_label,
        attributes=dict(attributes),
        similarities={k: 1.0 for k in attributes},
    )


def dense_rank_oracle(counts):
    """Independent dense ranking: sort distinct counts descending."""
    ordered = sorted(set(counts.values()), reverse=True)
    return {secondary: ordered.index(count) + 1 for secondary, count in counts.items()}


class TestDenseRanks:
    def test_documented_example(self):
        # counts 5, 3, 3, 1 give ranks 1, 2, 2, 3
        images = []
        for k, (secondary, count) in enumerate(
            [("black", 5), ("white", 3), ("red", 3), ("purple", 1)]
        ):
            for j in range(count):
                images.append(image(f"i{k}_{j}", "cls", color=secondary))
        table = cas.build_frequency_table(AnnotatedDataset(images=images))
        assert table.rank("cls", "color", "black") == 1
        assert table.rank("cls", "color", "white") == 2
        assert table.rank("cls", "color", "red") == 2
        assert table.rank("cls", "color", "purple") == 3
        assert table.count("cls", "color", "black") == 5

    def test_single_secondary_gets_rank_one(self):
        table = cas.build_frequency_table(
            AnnotatedDataset(images=[image("a", "c", color="red")])
        )
        assert table.rank("c", "color", "red") == 1

    def test_all_tied_share_rank_one(self):
        images = [
            image("a", "c", color="red"),
            image("b", "c", color="green"),
            image("d", "c", color="blue"),
        ]
        table = cas.build_frequency_table(AnnotatedDataset(images=images))
        for secondary in ("red", "green", "blue"):
            assert table.rank("c", "color", secondary) == 1

    def test_ranks_are_per_primary(self):
        images = [
            image("a", "c", color="red", shape="round"),
            image("b", "c", color="red", shape="flat"),
            image("d", "c", color="blue", shape="flat"),
        ]
        table = cas.build_frequency_table(AnnotatedDataset(images=images))
        assert table.rank("c", "color", "red") == 1
        assert table.rank("c", "color", "blue") == 2
        assert table.rank("c", "shape", "flat") == 1
        assert table.rank("c", "shape", "round") == 2

    def test_per_class_scope_separates_classes(self):
        images = [
            image("a", "cats", color="red"),
            image("b", "cats", color="red"),
            image("d", "cats", color="blue"),
            image("e", "dogs", color="blue"),
        ]
        table = cas.build_frequency_table(AnnotatedDataset(images=images))
        assert table.rank("cats", "color", "blue") == 2
        # in dogs, blue is the only secondary
        assert table.rank("dogs", "color", "blue") == 1

    def test_global_scope_pools_classes(self):
        images = [
            image("a", "cats", color="red"),
            image("b", "cats", color="red"),
            image("d", "dogs", color="red"),
            image("e", "dogs", color="blue"),
        ]
        table = cas.build_frequency_table(
            AnnotatedDataset(images=images), scope=cas.SCOPE_GLOBAL
        )
        assert table.rank("cats", "color", "red") == 1
        assert table.rank("dogs", "color", "red") == 1
        assert table.rank("anything", "color", "blue") == 2
        assert table.count("whatever", "color", "red") == 3

    def test_unknown_scope_rejected(self):
        with pytest.raises(ValidationError, match="scope"):
            cas.build_frequency_table(
                AnnotatedDataset(images=[image("a", "c", color="red")]), scope="weird"
            )

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError, match="zero"):
            cas.build_frequency_table(AnnotatedDataset(images=[]))

    def test_missing_key_raises_scope_mismatch(self):
        table = cas.build_frequency_table(
            AnnotatedDataset(images=[image("a", "c", color="red")])
        )
        with pytest.raises(ScopeMismatchError):
            table.rank("c", "color", "green")
        with pytest.raises(ScopeMismatchError):
            table.rank("other_class", "color", "red")
        with pytest.raises(ScopeMismatchError):
            table.count("c", "shape", "round")


class TestScoring:
    def dataset(self):
        images = [
            image("a", "c", color="red", shape="round"),
            image("b", "c", color="red", shape="round"),
            image("d", "c", color="red", shape="flat"),
            image("e", "c", color="blue", shape="flat"),
        ]
        return AnnotatedDataset(images=images)

    def test_score_is_sum_of_ranks(self):
        data = self.dataset()
        table = cas.build_frequency_table(data)
        scores = cas.cas_of(data, table)
        by_id = {score.image_id: score for score in scores}
        # red rank 1, blue rank 2; round and flat tie at rank 1
        assert by_id["a"].cas == 2 and by_id["a"].components == {"color": 1, "shape": 1}
        assert by_id["e"].cas == 3 and by_id["e"].components == {"color": 2, "shape": 1}

    def test_dataset_order_preserved(self):
        data = self.dataset()
        scores = cas.cas_of(data, cas.build_frequency_table(data))
        assert [score.image_id for score in scores] == ["a", "b", "d", "e"]

    def test_score_image_matches_batch(self):
        data = self.dataset()
        table = cas.build_frequency_table(data)
        batch = cas.cas_of(data, table)
        for img, score in zip(data, batch):
            assert cas.score_image(img, table) == score

    def test_minimum_cas_equals_primary_count(self):
        # every rank is at least 1, so CAS >= number of primaries
        data = self.dataset()
        for score in cas.cas_of(data, cas.build_frequency_table(data)):
            assert score.cas >= len(score.components)

    def test_permutation_invariance(self):
        data = self.dataset()
        table = cas.build_frequency_table(data)
        reference = {s.image_id: s.cas for s in cas.cas_of(data, table)}
        shuffled = AnnotatedDataset(images=list(reversed(data.images)))
        table2 = cas.build_frequency_table(shuffled)
        for score in cas.cas_of(shuffled, table2):
            assert score.cas == reference[score.image_id]

    def test_duplicating_an_image_never_raises_its_rarity(self):
        # weak monotonicity: adding one more copy of image "e" cannot
        # increase e's CAS, since its own counts only grow
        data = self.dataset()
        before = {
            s.image_id: s.cas for s in cas.cas_of(data, cas.build_frequency_table(data))
        }
        extended = AnnotatedDataset(
            images=data.images + [image("e2", "c", color="blue", shape="flat")]
        )
        after_scores = cas.cas_of(extended, cas.build_frequency_table(extended))
        after = {s.image_id: s.cas for s in after_scores}
        assert after["e"] <= before["e"]


def random_dataset(generator, n_images, n_classes, primaries):
    images = []
    for k in range(n_images):
        attributes = {
            name: f"s{int(generator.integers(0, cardinality))}"
            for name, cardinality in primaries
        }
        images.append(
            AnnotatedImage(
                image_id=f"img{k:04d}",
                class_label=f"class{int(generator.integers(0, n_classes))}",
                attributes=attributes,
                similarities={name: 1.0 for name, _ in primaries},
            )
        )
    return AnnotatedDataset(images=images)


def cas_oracle(dataset, scope):
    """Fully independent CAS: Counter-based counts, sort-based dense ranks."""
    counts = collections.defaultdict(collections.Counter)
    for img in dataset:
        group = img.class_label if scope == cas.SCOPE_PER_CLASS else "*"
        for primary, secondary in img.attributes.items():
            counts[(group, primary)][secondary] += 1
    expected = {}
    for img in dataset:
        group = img.class_label if scope == cas.SCOPE_PER_CLASS else "*"
        total = 0
        for primary, secondary in img.attributes.items():
            table = counts[(group, primary)]
            ranks = dense_rank_oracle(table)
            total += ranks[secondary]
        expected[img.image_id] = total
    return expected


@pytest.mark.parametrize("scope", [cas.SCOPE_PER_CLASS, cas.SCOPE_GLOBAL])
def test_random_datasets_match_oracle(scope):
    generator = np.random.default_rng(11)
    for trial in range(25):
        primaries = [
            (f"p{k}", int(generator.integers(2, 9)))
            for k in range(int(generator.integers(1, 6)))
        ]
        data = random_dataset(
            generator,
            n_images=int(generator.integers(1, 120)),
            n_classes=int(generator.integers(1, 6)),
            primaries=primaries,
        )
        expected = cas_oracle(data, scope)
        table = cas.build_frequency_table(data, scope=scope)
        for score in cas.cas_of(data, table):
            assert score.cas == expected[score.image_id]


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(st.integers(0, 3), st.integers(0, 2), st.integers(0, 4)),
        min_size=1,
        max_size=60,
    )
)
def test_property_scores_match_oracle(rows):
    images = [
        AnnotatedImage(
            image_id=f"i{k}",
            class_label=f"c{cls}",
            attributes={"p0": f"a{a}", "p1": f"b{b}"},
            similarities={"p0": 1.0, "p1": 1.0},
        )
        for k, (cls, a, b) in enumerate(rows)
    ]
    data = AnnotatedDataset(images=images)
    expected = cas_oracle(data, cas.SCOPE_PER_CLASS)
    table = cas.build_frequency_table(data)
    for score in cas.cas_of(data, table):
        assert score.cas == expected[score.image_id]


class TestStatistics:
    def test_documented_example(self):
        scores = [
            cas.CasScore("a", "c", {"p": 1}, 1),
            cas.CasScore("b", "c", {"p": 3}, 3),
        ]
        stats = cas.cas_statistics(scores)
        assert stats.mean == 2.0
        assert stats.std == 1.0  # population, not sample
        assert stats.n == 2

    def test_single_score(self):
        stats = cas.cas_statistics([cas.CasScore("a", "c", {"p": 4}, 4)])
        assert stats == cas.CasStatistics(mean=4.0, std=0.0, n=1)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            cas.cas_statistics([])

    def test_against_numpy(self):
        generator = np.random.default_rng(5)
        values = generator.integers(1, 40, size=100)
        scores = [
            cas.CasScore(f"i{k}", "c", {"p": int(v)}, int(v))
            for k, v in enumerate(values)
        ]
        stats = cas.cas_statistics(scores)
        assert stats.mean == pytest.approx(float(np.mean(values)), abs=1e-12)
        assert stats.std == pytest.approx(float(np.std(values)), abs=1e-12)


class TestScoreIO:
    def scores(self):
        return [
            cas.CasScore("a", "cats", {"color": 1, "shape": 2}, 3),
            cas.CasScore("b", "dogs", {"color": 4, "shape": 1}, 5),
        ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        cas.write_cas_scores(self.scores(), path)
        assert cas.read_cas_scores(path) == self.scores()

    def test_read_rejects_cas_component_mismatch(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            '{"image_id": "a", "class_label": "c", "cas": 9, '
            '"components": {"color": 1}}\n'
        )
        with pytest.raises(FormatError, match="sum"):
            cas.read_cas_scores(path)

    def test_read_rejects_zero_rank(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            '{"image_id": "a", "class_label": "c", "cas": 0, '
            '"components": {"color": 0}}\n'
        )
        with pytest.raises(FormatError, match="rank"):
            cas.read_cas_scores(path)

    def test_read_rejects_duplicates(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        line = (
            '{"image_id": "a", "class_label": "c", "cas": 1, '
            '"components": {"color": 1}}\n'
        )
        path.write_text(line + line)
        with pytest.raises(FormatError, match="duplicate"):
            cas.read_cas_scores(path)

    def test_read_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            '{"image_id": "a", "class_label": "c", "cas": 1, '
            '"components": {"color": 1}, "extra": null}\n'
        )
        with pytest.raises(FormatError, match="unknown"):
            cas.read_cas_scores(path)

    def test_read_rejects_float_cas(self, tmp_path):
        path = tmp_path / "scores.jsonl"
        path.write_text(
            '{"image_id": "a", "class_label": "c", "cas": 1.0, '
            '"components": {"color": 1}}\n'
        )
        with pytest.raises(FormatError):
            cas.read_cas_scores(path)


class TestStatisticsIO:
    def test_round_trip_without_fingerprint(self, tmp_path):
        path = tmp_path / "stats.json"
        cas.write_statistics(cas.CasStatistics(2.5, 0.5, 4), path)
        stats, fingerprint = cas.read_statistics(path)
        assert stats == cas.CasStatistics(2.5, 0.5, 4)
        assert fingerprint is None

    def test_round_trip_with_fingerprint(self, tmp_path):
        path = tmp_path / "stats.json"
        cas.write_statistics(
            cas.CasStatistics(2.5, 0.5, 4), path, taxonomy_fingerprint="f" * 64
        )
        stats, fingerprint = cas.read_statistics(path)
        assert fingerprint == "f" * 64

    def test_read_rejects_bad_fingerprint(self, tmp_path):
        path = tmp_path / "stats.json"
        path.write_text('{"mean": 1.0, "std": 0.0, "n": 1, "taxonomy_fingerprint": "xy"}')
        with pytest.raises(FormatError, match="fingerprint"):
            cas.read_statistics(path)

    def test_read_rejects_bad_n(self, tmp_path):
        path = tmp_path / "stats.json"
        path.write_text('{"mean": 1.0, "std": 0.0, "n": 0}')
        with pytest.raises(FormatError, match="'n'"):
            cas.read_statistics(path)

    def test_read_rejects_invalid_json(self, tmp_path):
        path = tmp_path / "stats.json"
        path.write_text("{")
        with pytest.raises(FormatError, match="JSON"):
            cas.read_statistics(path)


def annotate_fixture(fixture):
    from cas_toolkit import dictionary as dic

    built = dic.build_dictionary(
        fixture.text_embeddings, fixture.reference_images, fixture.taxonomy
    )
    return dic.annotate_dataset(built, fixture.images, fixture.manifest)


def test_fixture_class0_is_maximally_common(fixture200):
    """Homogeneous class: every image scores the number of primaries."""
    annotated = annotate_fixture(fixture200)
    table = cas.build_frequency_table(annotated)
    scores = cas.cas_of(annotated, table)
    primaries = len(annotated.images[0].attributes)
    class0 = [s for s in scores if s.class_label == "class_0"]
    assert class0
    for score in class0:
        assert score.cas == primaries


def test_fixture_planted_rarity_is_visible_in_scores(fixture200):
    annotated = annotate_fixture(fixture200)
    table = cas.build_frequency_table(annotated)
    scores = cas.cas_of(annotated, table)
    # planted rarity: only rare slots ever receive the last secondary val5
    rare_ids = {
        image_id
        for image_id, attributes in fixture200.planted.items()
        if "val5" in attributes.values()
    }
    assert rare_ids
    by_id = {score.image_id: score for score in scores}
    for image_id in rare_ids:
        score = by_id[image_id]
        planted = fixture200.planted[image_id]
        rare_primary = next(p for p, s in planted.items() if s == "val5")
        # the planted secondary is never the common one in its group
        assert score.components[rare_primary] > 1
    rare_mean = np.mean([by_id[i].cas for i in rare_ids])
    common_mean = np.mean(
        [
            score.cas
            for score in scores
            if score.image_id not in rare_ids and score.class_label != "class_0"
        ]
    )
    assert rare_mean > common_mean
