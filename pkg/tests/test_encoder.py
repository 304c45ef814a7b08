import math

import numpy as np
import pytest

from dialattack.encoder import SimilarityScorer, encode_sentence, semantic_similarity
from dialattack.lexsub import EmbeddingTable, fixture_embeddings


class TestEncodeSentence:
    def test_single_word_is_its_vector(self, mini_table):
        vec = encode_sentence("cat", mini_table)
        assert not vec.is_zero
        assert np.allclose(vec.vector, [1.0, 0.0])

    def test_empty_is_zero(self, mini_table):
        assert encode_sentence("", mini_table).is_zero

    def test_all_oov_is_zero(self, mini_table):
        assert encode_sentence("quantum flux", mini_table).is_zero

    def test_mean_then_normalize(self, mini_table):
        # mean of (1,0) and (0,1) is (0.5,0.5); normalized -> (0.7071, 0.7071)
        vec = encode_sentence("cat dog", mini_table)
        assert np.allclose(vec.vector, [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-6)

    def test_punctuation_ignored(self, mini_table):
        with_punct = encode_sentence("cat !!! ???", mini_table)
        assert np.allclose(with_punct.vector, [1.0, 0.0])

    def test_unit_norm(self, mini_table):
        vec = encode_sentence("cat feline dog", mini_table)
        assert math.isclose(np.linalg.norm(vec.vector), 1.0, abs_tol=1e-6)


class TestSemanticSimilarity:
    def test_identical_sentences(self, mini_table):
        assert semantic_similarity("the cat sat", "the cat sat", mini_table) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_words(self, mini_table):
        assert semantic_similarity("cat", "dog", mini_table) == pytest.approx(0.0, abs=1e-10)

    def test_cat_feline(self, mini_table):
        assert semantic_similarity("cat", "feline", mini_table) == pytest.approx(0.8, abs=1e-10)

    def test_symmetry(self, mini_table):
        a, b = "cat dog", "feline cat"
        assert semantic_similarity(a, b, mini_table) == pytest.approx(
            semantic_similarity(b, a, mini_table), abs=1e-12)

    def test_degenerate_side_is_zero(self, mini_table):
        assert semantic_similarity("cat", "", mini_table) == 0.0
        assert semantic_similarity("", "", mini_table) == 0.0

    def test_self_substitution_is_exactly_one(self, mini_table):
        scorer = SimilarityScorer(table=mini_table)
        assert scorer.similarity("cat on mat", "cat on mat") == pytest.approx(1.0, abs=1e-12)

    def test_monotone_degradation(self):
        # Replacing more orthogonal-vector words never increases similarity.
        table = EmbeddingTable(
            ["w1", "w2", "w3", "o1", "o2", "o3"],
            np.array([
                [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 1.0, 0.0],
            ]),
        )
        original = "w1 w2 w3"
        variants = ["o1 w2 w3", "o1 o2 w3", "o1 o2 o3"]
        sims = [semantic_similarity(original, v, table) for v in variants]
        assert sims[0] >= sims[1] >= sims[2]

    def test_fixture_table_tiers(self):
        # Frozen from hand computation: sim of (w+obj) vs (flip+obj) with obj at
        # w+90deg and flip at w+theta is (1+cos t+sin t)/(2 sqrt(1+sin t)).
        table = fixture_embeddings()
        cases = [("red", "rosy", "ball", 30), ("big", "vast", "box", 95),
                 ("dark", "murky", "lamp", 130), ("soft", "mushy", "sofa", 155),
                 ("tall", "steep", "fence", 177)]
        for w, flip, obj, theta in cases:
            t = math.radians(theta)
            expected = (1 + math.cos(t) + math.sin(t)) / (2 * math.sqrt(1 + math.sin(t)))
            got = semantic_similarity(f"{w} {obj}", f"{flip} {obj}", table)
            assert got == pytest.approx(expected, abs=1e-4)
