import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from context_fuse.exceptions import EmptyCorpus, NoObjects, ParseError, UnknownSupercategory
from context_fuse.learning import (
    cooccurrence_counts,
    estimate_context,
    load_coco_annotations,
    load_native_corpus,
    nearest_correlation,
    read_json,
)
from context_fuse.scene import AnnotatedCorpus, ClassCatalog, validate_context


def pearson(xs, ys):
    """Textbook Pearson correlation over plain lists."""
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def brute_cooccurrence(images, m):
    out = [[0] * m for _ in range(m)]
    for img in images:
        present = set(img)
        for a in range(m):
            for b in range(m):
                if a in present and b in present:
                    out[a][b] += 1
    return out


corpora = st.integers(1, 6).flatmap(lambda m: st.tuples(
    st.just(m),
    st.lists(st.lists(st.integers(0, m - 1), max_size=6), min_size=1, max_size=50),
))


COCO = {
    "images": [{"id": 1}, {"id": 2}, {"id": 3}],
    "categories": [
        {"id": 1, "name": "dog", "supercategory": "animal"},
        {"id": 2, "name": "skis", "supercategory": "sports"},
        {"id": 3, "name": "person", "supercategory": "person"},
    ],
    "annotations": [
        {"image_id": 1, "category_id": 1},
        {"image_id": 1, "category_id": 3},
        {"image_id": 2, "category_id": 2},
        {"image_id": 2, "category_id": 3},
        {"image_id": 2, "category_id": 3},
    ],
}


class TestIngestion:
    def test_coco_minimal(self, tmp_path):
        p = tmp_path / "coco.json"
        p.write_text(json.dumps(COCO))
        corpus = load_coco_annotations(p)
        assert corpus.catalog.names == ("dog", "person", "skis")
        assert [sorted(corpus.catalog.names[i] for i in img) for img in corpus.images] == [
            ["dog", "person"], ["person", "person", "skis"]]

    def test_coco_filter_keeps_all_objects(self, tmp_path):
        p = tmp_path / "coco.json"
        p.write_text(json.dumps(COCO))
        corpus = load_coco_annotations(p, "animal")
        assert len(corpus) == 1
        assert len(corpus.catalog) == 3
        assert sorted(corpus.catalog.names[i] for i in corpus.images[0]) == ["dog", "person"]

    def test_unknown_supercategory(self, tmp_path):
        p = tmp_path / "coco.json"
        p.write_text(json.dumps(COCO))
        with pytest.raises(UnknownSupercategory):
            load_coco_annotations(p, "vehicle")

    def test_not_coco(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text("[1, 2]")
        with pytest.raises(ParseError):
            load_coco_annotations(p)

    def test_parse_error_has_line(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('[\n["a",\n')
        with pytest.raises(ParseError, match=r"bad\.json:3:"):
            read_json(p)

    def test_native(self, tmp_path):
        p = tmp_path / "n.json"
        p.write_text('[["cat", "dog"], ["cat"]]')
        corpus = load_native_corpus(p)
        assert corpus.images == ((0, 1), (0,))

    def test_native_wrong_shape(self, tmp_path):
        p = tmp_path / "n.json"
        p.write_text('{"a": 1}')
        with pytest.raises(ParseError):
            load_native_corpus(p)


class TestEstimateContext:
    def test_single_image_frequencies(self):
        ctx = estimate_context(AnnotatedCorpus.from_names([["A", "A", "B"]]), "x")
        np.testing.assert_allclose(ctx.mu, [2 / 3, 1 / 3], atol=1e-15)
        np.testing.assert_array_equal(ctx.sigma, np.eye(2))

    def test_identical_count_vectors_perfectly_correlated(self):
        corpus = AnnotatedCorpus.from_names([["A", "B"], ["A", "A", "B", "B"], ["C"]])
        ctx = estimate_context(corpus, "x")
        # exact 1 is singular; the PD repair moves it by O(1e-6)
        assert ctx.sigma[0, 1] == pytest.approx(1.0, abs=1e-5)
        validate_context(ctx)

    def test_against_spreadsheet_recomputation(self, rng):
        m = 4
        images = [list(rng.integers(0, m, size=rng.integers(1, 6))) for _ in range(10)]
        corpus = AnnotatedCorpus(ClassCatalog(("a", "b", "c", "d")), tuple(map(tuple, images)))
        ctx = estimate_context(corpus, "x")
        counts = [[img.count(k) for k in range(m)] for img in images]
        total = sum(map(sum, counts))
        for k in range(m):
            assert ctx.mu[k] == pytest.approx(sum(row[k] for row in counts) / total, abs=1e-12)
        cols = [[row[k] for row in counts] for k in range(m)]
        expected = np.eye(m)
        for a in range(m):
            for b in range(m):
                if a != b and len(set(cols[a])) > 1 and len(set(cols[b])) > 1:
                    expected[a, b] = pearson(cols[a], cols[b])
        # the seeded corpus gives a PD matrix, so no repair is applied
        assert np.linalg.eigvalsh(expected).min() > 1e-3
        np.testing.assert_allclose(ctx.sigma, expected, atol=1e-9)

    def test_zero_variance_class_independent(self):
        corpus = AnnotatedCorpus.from_names([["A", "B"], ["A", "B", "B"], ["A"]])
        ctx = estimate_context(corpus, "x")
        assert ctx.sigma[0, 1] == 0.0

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            estimate_context(AnnotatedCorpus(ClassCatalog(("a",)), ()), "x")

    def test_no_objects(self):
        with pytest.raises(NoObjects):
            estimate_context(AnnotatedCorpus(ClassCatalog(("a",)), ((), ())), "x")

    @given(corpora)
    def test_always_valid(self, data):
        m, images = data
        if not any(images):
            return
        corpus = AnnotatedCorpus(ClassCatalog(tuple(f"k{i}" for i in range(m))), tuple(map(tuple, images)))
        ctx = estimate_context(corpus, "x")
        assert abs(ctx.mu.sum() - 1) <= 1e-12
        assert np.array_equal(ctx.sigma, ctx.sigma.T)
        np.testing.assert_array_equal(np.diag(ctx.sigma), 1.0)
        validate_context(ctx)


def test_nearest_correlation_repairs():
    bad = np.array([[1, 0.9, 0.9], [0.9, 1, -0.9], [0.9, -0.9, 1.0]])
    fixed = nearest_correlation(bad)
    assert np.linalg.eigvalsh(fixed).min() > 1e-12
    np.testing.assert_array_equal(np.diag(fixed), 1.0)


class TestCooccurrence:
    def test_direct(self):
        corpus = AnnotatedCorpus.from_names([["A", "B"], ["A", "B"]])
        mat, diag = cooccurrence_counts(corpus)
        assert mat[0, 1] == 2 and list(diag) == [2, 2]

    def test_duplicates_collapse(self):
        mat, _ = cooccurrence_counts(AnnotatedCorpus.from_names([["A", "A", "B"]]))
        assert mat[0, 1] == 1

    def test_empty(self):
        with pytest.raises(EmptyCorpus):
            cooccurrence_counts(AnnotatedCorpus(ClassCatalog(("a",)), ()))

    def test_fifty_image_brute_force(self, rng):
        m = 6
        images = [tuple(rng.integers(0, m, size=rng.integers(0, 5))) for _ in range(50)]
        corpus = AnnotatedCorpus(ClassCatalog(tuple("abcdef")), tuple(images))
        mat, diag = cooccurrence_counts(corpus)
        assert mat.tolist() == brute_cooccurrence(images, m)
        assert diag.tolist() == [brute_cooccurrence(images, m)[k][k] for k in range(m)]

    @given(corpora, st.randoms())
    def test_permutation_equivariant(self, data, rnd):
        m, images = data
        cat = ClassCatalog(tuple(f"k{i}" for i in range(m)))
        shuffled = list(images)
        rnd.shuffle(shuffled)
        a, _ = cooccurrence_counts(AnnotatedCorpus(cat, tuple(map(tuple, images))))
        b, _ = cooccurrence_counts(AnnotatedCorpus(cat, tuple(map(tuple, shuffled))))
        assert np.array_equal(a, b)

    @given(st.integers(1, 6).flatmap(
        lambda m: st.tuples(st.just(m), st.lists(st.integers(0, m - 1), min_size=1, max_size=30))))
    def test_singletons_have_no_edges(self, data):
        m, labels = data
        cat = ClassCatalog(tuple(f"k{i}" for i in range(m)))
        mat, _ = cooccurrence_counts(AnnotatedCorpus(cat, tuple((k,) for k in labels)))
        assert np.count_nonzero(mat - np.diag(np.diag(mat))) == 0
