import numpy as np
import pytest

from qpop.corpus import Question
from qpop.interventions import SUGGESTION_KINDS, split_sentences, suggest, whatif


def make_question(summary, details=None, week=3):
    return Question(id="t", summary=summary, details=details, week=week,
                    platform="online", product_version="deluxe",
                    answered=False, views=0)


class TestSplitSentences:
    def test_basic(self):
        assert split_sentences("First one. Second one?") == ["First one.", "Second one?"]

    def test_no_terminal(self):
        assert split_sentences("just one clause") == ["just one clause"]

    def test_empty(self):
        assert split_sentences("   ") == []

    def test_punctuation_without_space_keeps_together(self):
        assert split_sentences("version 4.2 is broken") == ["version 4.2 is broken"]


class TestSuggest:
    def test_two_sentence_summary_offers_move(self, desk_bundle):
        q = make_question(
            "i need to add my health insurance info and i already sent my taxes. "
            "can i just add the medical info and resend my taxes"
        )
        suggestions = suggest(q, desk_bundle)
        kinds = {s.kind for s in suggestions}
        assert "move_sentence_to_details" in kinds
        move = next(s for s in suggestions if s.kind == "move_sentence_to_details")
        assert move.delta > 0
        assert move.details

    def test_single_sentence_never_offers_move(self, desk_bundle):
        q = make_question("Where is my refund")
        for s in suggest(q, desk_bundle):
            assert s.kind != "move_sentence_to_details"

    def test_deltas_verified_by_rescoring(self, desk_bundle):
        q = make_question("why is my turbotax refund so low this year")
        base = desk_bundle.score_question(q).probability
        for s in suggest(q, desk_bundle):
            edited = make_question(s.summary, s.details)
            # oracle: independently re-score the edited question
            assert desk_bundle.score_question(edited).probability == pytest.approx(s.score)
            assert s.score - base == pytest.approx(s.delta)
            assert s.delta > 0

    def test_well_formed_question_may_get_no_suggestions(self, desk_bundle):
        q = make_question("Does the deluxe version cover rental property income?")
        suggestions = suggest(q, desk_bundle)
        for s in suggestions:
            assert s.kind in SUGGESTION_KINDS

    def test_edits_respect_summary_limit(self, desk_bundle):
        q = make_question("x" * 168 + "?!")
        for s in suggest(q, desk_bundle):
            assert 1 <= len(s.summary) <= 170

    def test_greeting_stripped(self, desk_bundle):
        q = make_question("hi, where is my refund check from the irs")
        kinds = {s.kind: s for s in suggest(q, desk_bundle)}
        if "shorten_summary" in kinds:
            assert not kinds["shorten_summary"].summary.lower().startswith("hi")

    def test_max_n_respected(self, desk_bundle):
        q = make_question("why my refund is late. i filed weeks ago and nothing came")
        assert len(suggest(q, desk_bundle, max_n=2)) <= 2


class TestWhatIf:
    def test_identical_questions_zero_delta(self, desk_bundle):
        q = make_question("Where is my refund")
        result = whatif(q, q, desk_bundle)
        assert result.delta == 0.0
        assert result.feature_diff == {}

    def test_question_mark_only_diff(self, desk_bundle):
        a = make_question("Where is my refund")
        b = make_question("Where is my refund?")
        result = whatif(a, b, desk_bundle)
        assert "question_mark" in result.feature_diff
        assert result.feature_diff["question_mark"] == (False, True)
        # lengths moved by one char; nothing else structural
        assert "details_flag" not in result.feature_diff

    def test_adding_details_changes_flags(self, desk_bundle):
        a = make_question("Where is my refund")
        b = make_question("Where is my refund", details="i filed three weeks ago electronically")
        result = whatif(a, b, desk_bundle)
        assert result.feature_diff["details_flag"] == (False, True)
        assert result.bundle_version == desk_bundle.version
