"""Calibration targets and reference statistics for the synthetic corpus.

The default generator configuration is tuned so that a 50k-question corpus
reproduces the headline statistics of the 2015 tax-season Q&A dataset this
toolkit models: answer rate, view concentration, details usage, first-word
shares, and the per-topic vote/view structure. The tables below are the
published reference numbers; every default effect size in
:mod:`qpop.corpus` is derived from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Global reference statistics for the 2015 tax-season corpus.
ANSWER_RATE = 0.675
MEAN_VIEWS = 23.7
TOP1_VIEW_SHARE = 0.45
TOP10_VIEW_SHARE = 0.76
ZERO_VIEW_FRACTION = 0.20
TOP_DECILE_VIEW_THRESHOLD = 34
DETAILS_FRACTION = 0.50
DETAILS_FRACTION_TOP_DECILE = 0.68
MEAN_DETAILS_LEN = 218
MEAN_DETAILS_LEN_TOP_DECILE = 271
MEAN_SUMMARY_LEN_NO_DETAILS = 100
MEAN_SUMMARY_LEN_TOP_DECILE = 87
SUMMARY_CHAR_LIMIT = 170

# First questions per user: 160,500 of 289,000 questions, 20.5% with details.
FIRST_QUESTION_FRACTION = 160_500 / 289_000
FIRST_QUESTION_DETAILS_FRACTION = 0.205
PERSUADABLE_FRACTION = 0.60

# Reference AUC values for the popularity model (Group I / I+II / I+III).
REFERENCE_AUC = {"I": 0.678, "I+II": 0.759, "I+III": 0.793}

# Per-topic up-vote fraction vs. content type (0 = tax, 1 = product).
UPVOTE_CONTENT_TYPE_CORRELATION = -0.866
GOOGLE_VIEW_FRACTION = 0.205


@dataclass(frozen=True)
class FirstWordRow:
    """One row of the reference first-word table.

    ``share`` is the fraction of questions starting with the word,
    ``views`` the group's mean views, ``top_decile`` the percentage of the
    group's questions landing in the global top 10%, and ``answer_rate``
    the group's answered percentage.
    """

    word: str
    share: float
    views: float
    top_decile: float
    answer_rate: float


# Twenty most frequent first words of the question summary, covering 76.3%
# of questions. All but "turbotax" are common stop words.
FIRST_WORD_TABLE: tuple[FirstWordRow, ...] = (
    FirstWordRow("are", 0.4, 29.1, 17.0, 72.1),
    FirstWordRow("does", 0.7, 40.9, 16.2, 74.5),
    FirstWordRow("where", 3.5, 37.6, 15.6, 73.4),
    FirstWordRow("is", 1.5, 23.4, 14.1, 71.5),
    FirstWordRow("how", 10.8, 30.0, 14.0, 74.3),
    FirstWordRow("turbotax", 1.2, 28.4, 13.5, 65.3),
    FirstWordRow("what", 3.8, 38.1, 13.3, 68.3),
    FirstWordRow("can", 4.1, 23.7, 12.6, 80.5),
    FirstWordRow("do", 1.8, 26.1, 12.1, 76.6),
    FirstWordRow("need", 0.7, 23.6, 11.0, 68.4),
    FirstWordRow("when", 1.4, 31.1, 10.1, 72.0),
    FirstWordRow("on", 0.6, 19.0, 8.8, 57.6),
    FirstWordRow("my", 5.6, 23.9, 8.1, 71.5),
    FirstWordRow("if", 1.9, 18.0, 7.5, 77.3),
    FirstWordRow("the", 1.1, 22.7, 7.3, 60.6),
    FirstWordRow("i", 27.0, 15.6, 7.0, 69.1),
    FirstWordRow("it", 0.6, 11.1, 6.2, 58.5),
    FirstWordRow("in", 0.6, 11.5, 6.1, 61.7),
    FirstWordRow("we", 1.0, 15.0, 6.0, 69.8),
    FirstWordRow("why", 8.0, 8.6, 2.3, 51.4),
)

FIRST_WORD_VOCABULARY: tuple[str, ...] = tuple(r.word for r in FIRST_WORD_TABLE)

# Share and implied statistics for questions starting with any other word;
# chosen so the full population reproduces the global answer rate and mean
# views exactly.
_covered = sum(r.share for r in FIRST_WORD_TABLE)
OTHER_FIRST_WORD_SHARE = 100.0 - _covered
OTHER_ANSWER_RATE = (
    100.0 * ANSWER_RATE - sum(r.share * r.answer_rate for r in FIRST_WORD_TABLE) / 100.0
) / (OTHER_FIRST_WORD_SHARE / 100.0)
OTHER_MEAN_VIEWS = (100.0 * MEAN_VIEWS - sum(r.share * r.views for r in FIRST_WORD_TABLE)) / OTHER_FIRST_WORD_SHARE


def first_word_log_effect(word: str, scale: float = 1.0) -> float:
    """Planted log-views multiplier for a first-word group."""
    views = OTHER_MEAN_VIEWS
    for row in FIRST_WORD_TABLE:
        if row.word == word:
            views = row.views
            break
    return scale * math.log(views / MEAN_VIEWS)


@dataclass(frozen=True)
class TopicSpec:
    """A planted topic: keyword vocabulary plus its causal effects.

    ``content_type`` is the tax(0)..product(1) position, ``view_effect``
    the additive log-views contribution of the topic, ``google_fraction``
    the expected share of views arriving from external search, and
    ``uplift_shift`` the topic's additive contribution to the
    add-details treatment effect.
    """

    name: str
    words: tuple[str, ...]
    content_type: float
    view_effect: float
    google_fraction: float
    uplift_shift: float


# Topic vocabulary bank: 30 topics, ~12 keywords each, ordered by
# within-topic frequency (a Zipf profile is applied over this order).
# The four anchor topics mirror well-known exemplars: refund status and
# e-file acceptance sit between the tax and product categories and draw
# the most views; claiming dependents is a pure tax topic; contacting
# support is a pure product topic.
_TOPIC_WORDS: dict[str, tuple[str, ...]] = {
    "refund_status": ("refund", "check", "account", "receive", "bank", "deposit", "direct", "waiting", "money", "sent", "weeks", "expect"),
    "efile_accepted": ("file", "still", "day", "accept", "say", "pending", "irs", "processing", "submitted", "long", "status", "approved"),
    "claim_dependents": ("claim", "child", "son", "dependent", "daughter", "lived", "support", "custody", "qualifying", "parents", "college", "relative"),
    "contact_support": ("help", "number", "please", "card", "call", "phone", "someone", "talk", "speak", "contact", "agent", "person"),
    "w2_income": ("w2", "employer", "wages", "income", "box", "missing", "copy", "received", "statement", "payroll", "multiple", "corrected"),
    "filing_status": ("married", "jointly", "separately", "single", "spouse", "status", "head", "household", "divorced", "change", "wife", "husband"),
    "deductions": ("deduct", "deduction", "expenses", "standard", "itemize", "mileage", "medical", "receipts", "donation", "charitable", "write", "off"),
    "education": ("student", "tuition", "education", "1098t", "loan", "credit", "school", "scholarship", "interest", "college", "books", "grant"),
    "healthcare": ("insurance", "health", "coverage", "1095", "marketplace", "premium", "obamacare", "exemption", "months", "medicaid", "employer", "subsidy"),
    "state_return": ("state", "california", "york", "resident", "nonresident", "moved", "local", "city", "owe", "wisconsin", "ohio", "both"),
    "amended_return": ("amend", "amended", "1040x", "mistake", "correct", "already", "filed", "change", "forgot", "fix", "original", "resubmit"),
    "self_employment": ("self", "employed", "business", "1099misc", "contractor", "schedule", "expenses", "quarterly", "freelance", "income", "clients", "home"),
    "investments": ("stock", "shares", "sold", "capital", "gains", "broker", "1099b", "dividend", "basis", "loss", "investment", "crypto"),
    "retirement": ("401k", "ira", "retirement", "withdrawal", "pension", "rollover", "distribution", "penalty", "social", "security", "roth", "early"),
    "unemployment": ("unemployment", "benefits", "1099g", "compensation", "laid", "collected", "taxable", "received", "jobless", "claim", "weeks", "report"),
    "property": ("mortgage", "house", "home", "property", "interest", "bought", "sold", "1098", "escrow", "closing", "rental", "landlord"),
    "dependents_credits": ("credit", "earned", "eic", "child", "care", "daycare", "qualify", "income", "additional", "eligible", "amount", "claiming"),
    "estimated_taxes": ("estimated", "quarterly", "payments", "voucher", "owe", "penalty", "1040es", "withholding", "paid", "next", "avoid", "underpayment"),
    "foreign_income": ("foreign", "abroad", "overseas", "country", "exclusion", "fbar", "treaty", "citizen", "visa", "resident", "earned", "reporting"),
    "military": ("military", "combat", "deployed", "active", "duty", "veteran", "base", "allowance", "moving", "reserve", "pay", "exclusion"),
    "install_software": ("install", "download", "disc", "windows", "mac", "computer", "cd", "drive", "installation", "laptop", "running", "system"),
    "pricing_upgrade": ("price", "charged", "free", "upgrade", "paid", "cost", "fee", "edition", "downgrade", "charge", "twice", "advertised"),
    "login_account": ("login", "password", "sign", "username", "reset", "locked", "email", "access", "account", "remember", "verification", "forgot"),
    "efile_errors": ("error", "reject", "rejected", "code", "agi", "pin", "wrong", "tried", "submit", "fixing", "message", "transmit"),
    "printing": ("print", "printer", "copy", "pdf", "save", "paper", "mail", "printed", "pages", "blank", "preview", "forms"),
    "import_data": ("import", "transfer", "last", "prior", "previous", "data", "pulled", "information", "carry", "forward", "old", "2014"),
    "product_versions": ("deluxe", "premier", "basic", "version", "which", "difference", "between", "need", "covers", "compare", "features", "switch"),
    "payment_fees": ("pay", "payment", "owe", "balance", "due", "debit", "bill", "installment", "plan", "paying", "options", "schedule"),
    "forms_availability": ("form", "forms", "available", "ready", "update", "release", "when", "schedule", "finalized", "waiting", "february", "dates"),
    "mobile_app": ("app", "phone", "mobile", "iphone", "android", "tablet", "snap", "picture", "camera", "continue", "sync", "device"),
}

_TAX_TOPICS = {
    "claim_dependents", "w2_income", "filing_status", "deductions", "education",
    "healthcare", "state_return", "amended_return", "self_employment", "investments",
    "retirement", "unemployment", "property", "dependents_credits", "estimated_taxes",
    "foreign_income", "military",
}

# Words shared by every topic; drawn alongside topic keywords.
COMMON_WORDS: tuple[str, ...] = (
    "tax", "taxes", "return", "year", "get", "filed", "filing", "federal",
    "back", "know", "turbotax", "irs", "time", "now", "ask", "question",
    "find", "put", "enter", "work", "money", "last", "made", "doing",
)

# Tokens carrying an extra planted view boost independent of topic or
# style; the text-bag attribute group is the only one that can see them.
HOT_KEYWORDS: tuple[str, ...] = (
    "audit", "deadline", "extension", "calculator", "maximum",
    "garnished", "offset", "levy", "injured", "stimulus", "delay", "track",
)

# Starters for the OTHER first-word group.
OTHER_STARTERS: tuple[str, ...] = (
    "just", "trying", "after", "got", "looking", "want", "our", "so",
    "filed", "turbotax", "someone", "since", "last", "there", "should",
)

GREETING_PREFIXES: tuple[str, ...] = ("hi", "hello", "please help")


def default_topic_specs() -> tuple[TopicSpec, ...]:
    """The 30 planted topics with deterministic per-topic effects.

    View effects are assigned from a fixed balanced pattern (not drawn at
    run time) and then explicitly orthogonalized against content type,
    which keeps the planted up-vote/views correlation near zero. The two
    anchor "between tax and product" topics get the largest view effects
    and the largest external-search share.
    """
    names = list(_TOPIC_WORDS)
    n = len(names)
    # Deterministic spread patterns; index-based so the config is stable.
    tax_ct = [0.03 + 0.013 * i for i in range(len(_TAX_TOPICS))]
    prod_ct = [0.97 - 0.017 * i for i in range(n - len(_TAX_TOPICS) - 2)]
    cts, views, googles, shifts = [], [], [], []
    tax_i = prod_i = 0
    anchor = {}
    for i, name in enumerate(names):
        if name == "refund_status":
            anchor[i] = (0.45, 1.0, 0.29, 0.15)
        elif name == "efile_accepted":
            anchor[i] = (0.55, 1.15, 0.495, 0.18)
        if i in anchor:
            ct, view, google, shift = anchor[i]
        else:
            if name in _TAX_TOPICS:
                ct = tax_ct[tax_i]
                tax_i += 1
            else:
                ct = prod_ct[prod_i]
                prod_i += 1
            view = ((i * 7) % 13 - 6.0) * 0.0875
            google = 0.10 + ((i * 5) % 9) * 0.012
            shift = ((i * 11) % 7 - 3.0) * 0.06
        cts.append(ct)
        views.append(view)
        googles.append(google)
        shifts.append(shift)
    # Remove any incidental content-type component from the non-anchor
    # view-effect ladder (anchors stay put: they sit mid-scale anyway).
    free = [i for i in range(n) if i not in anchor]
    ct_free = [cts[i] for i in free]
    v_free = [views[i] for i in free]
    ct_mean = sum(ct_free) / len(free)
    v_mean = sum(v_free) / len(free)
    denom = sum((c - ct_mean) ** 2 for c in ct_free)
    beta = sum((c - ct_mean) * (v - v_mean) for c, v in zip(ct_free, v_free)) / denom
    for i in free:
        views[i] = views[i] - beta * (cts[i] - ct_mean)
    specs = []
    for i, name in enumerate(names):
        specs.append(
            TopicSpec(name, _TOPIC_WORDS[name], round(cts[i], 3), round(views[i], 4), round(googles[i], 3), round(shifts[i], 3))
        )
    return tuple(specs)
