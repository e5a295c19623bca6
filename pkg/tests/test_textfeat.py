import math
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qpop.corpus import Question
from qpop.textfeat import (
    FeatureVector,
    capitalization_flags,
    extract_features,
    first_word,
    first_word_group,
    text_bag,
    tokenize,
)


def make_question(summary, details=None, **kw):
    defaults = dict(
        id="q1", week=3, platform="online", product_version="deluxe",
        answered=False, views=0,
    )
    defaults.update(kw)
    return Question(summary=summary, details=details, **defaults)


class TestTokenize:
    def test_contraction_split_keeps_leading_i(self):
        assert tokenize("I'm filing late") == ["i", "m", "filing", "late"]

    def test_ive_split(self):
        assert tokenize("I've got a w2")[0] == "i"

    def test_turbo_tax_merge(self):
        assert tokenize("Turbo Tax won't install")[0] == "turbotax"
        assert tokenize("TurboTax deluxe")[0] == "turbotax"

    def test_empty(self):
        assert tokenize("") == []

    def test_edge_punctuation_stripped(self):
        assert tokenize("refund, please!") == ["refund", "please"]

    def test_no_empty_tokens(self):
        assert "" not in tokenize("... !!! ?? a")

    @given(st.text(max_size=80))
    def test_case_insensitive(self, text):
        assert tokenize(text) == tokenize(text.upper())

    @given(st.text(max_size=80))
    def test_deterministic(self, text):
        assert tokenize(text) == tokenize(text)


class TestFirstWord:
    def test_question_word(self):
        assert first_word("Why is my refund low?") == "why"

    def test_brand(self):
        assert first_word("TurboTax deluxe price") == "turbotax"

    def test_whitespace_only(self):
        assert first_word("   ") is None

    def test_group_mapping(self):
        assert first_word_group("Why is my refund low?") == "why"
        assert first_word_group("zebra stripes") == "OTHER"
        assert first_word_group("") == "NONE"


class TestCapitalizationFlags:
    def test_proper(self):
        assert capitalization_flags("Why is my refund low?") == (True, False)

    def test_excessive(self):
        # 16 alphabetic chars, all upper: fraction 1.0 > 0.5 and >= 10 chars.
        assert capitalization_flags("WHERE IS MY REFUND") == (False, True)

    def test_all_lower(self):
        assert capitalization_flags("why is my refund low") == (False, False)

    def test_no_alpha(self):
        assert capitalization_flags("12345 ???") == (False, False)

    def test_short_allcaps_not_excessive(self):
        # below the 10-char alphabetic floor ("IRS" should never flag)
        proper, excessive = capitalization_flags("IRS")
        assert excessive is False
        assert proper is True


class TestExtractFeatures:
    def test_lengths_no_details(self):
        q = make_question("x" * 100)
        fv = extract_features(q)
        assert fv.log_summary_len == pytest.approx(math.log(100))
        assert fv.log_question_len == pytest.approx(math.log(100))
        assert fv.log_details_len_plus1 == 0.0
        assert fv.details_flag is False
        assert fv.first_word_details == "NONE"

    def test_lengths_with_details(self):
        # the top-decile archetype: 87-char summary, 271-char details
        q = make_question("x" * 87, details="d" * 271)
        fv = extract_features(q)
        assert fv.log_question_len == pytest.approx(math.log(358))
        assert fv.log_details_len_plus1 == pytest.approx(math.log(272))
        assert fv.details_flag is True

    def test_question_mark_anywhere(self):
        assert extract_features(make_question("is this? really")).question_mark is True
        assert extract_features(make_question("no mark here")).question_mark is False

    def test_never_reads_outcomes(self):
        a = make_question("Where is my refund", views=0, answered=False)
        b = make_question("Where is my refund", views=9999, answered=True, asker_vote="up")
        assert extract_features(a) == extract_features(b)

    @given(st.integers(min_value=1, max_value=170), st.integers(min_value=0, max_value=400))
    def test_log_question_len_invariant(self, slen, dlen):
        q = make_question("a" * slen, details=("b" * dlen) if dlen else None)
        fv = extract_features(q)
        assert fv.log_question_len == pytest.approx(math.log(slen + dlen))
        assert fv.details_flag == (dlen > 0)


class TestTextBag:
    DIM = 2**14

    def test_dim_floor(self):
        with pytest.raises(ValueError):
            text_bag(make_question("hello"), 100)

    def test_empty_details_namespace_zero(self):
        q = make_question("refund check")
        vec = text_bag(q, self.DIM).toarray()[0]
        # oracle: rebuild expected counts by hand with the same hash
        expected = {}
        for gram in ["refund", "check", "refund check"]:
            idx = zlib.crc32(f"s\x00{gram}".encode()) % self.DIM
            expected[idx] = expected.get(idx, 0) + 1
        assert vec.sum() == sum(expected.values())
        for idx, count in expected.items():
            assert vec[idx] == count

    def test_identical_questions_identical_vectors(self):
        q1 = make_question("can i deduct mileage", details="drove 100 miles")
        q2 = make_question("can i deduct mileage", details="drove 100 miles")
        assert (text_bag(q1, self.DIM) != text_bag(q2, self.DIM)).nnz == 0

    def test_repeated_token_counts(self):
        q = make_question("refund refund")
        vec = text_bag(q, self.DIM).toarray()[0]
        refund_idx = zlib.crc32(b"s\x00refund") % self.DIM
        bigram_idx = zlib.crc32(b"s\x00refund refund") % self.DIM
        assert vec[refund_idx] == (2 if refund_idx != bigram_idx else 3)

    def test_summary_details_namespaces_differ(self):
        a = text_bag(make_question("refund"), self.DIM).toarray()[0]
        b = text_bag(make_question("x", details="refund"), self.DIM).toarray()[0]
        assert np.argmax(a) != np.argmax(b)
