from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deiatransit.corpus import CleanPost
from deiatransit.relevance import (
    STATED_SIZES,
    KeywordList,
    RelevanceFilter,
    default_keywords,
    load_keywords,
    matches,
    tag_and_filter,
)

DEI = default_keywords("dei")
TR = default_keywords("transport")
T0 = datetime(2020, 3, 15, tzinfo=timezone.utc)


def cp(i, tokens):
    return CleanPost(str(i), "u", T0, -74.0, 40.7, " ".join(tokens), tuple(tokens))


def test_bundled_lists():
    assert {"racism", "equity"} <= DEI.words
    assert {"subway", "bus", "mtasubway", "publictransit"} <= TR.words
    assert "housing" not in DEI.words | TR.words
    # printed lists repeat words, so the deduplicated sets are smaller than stated
    assert len(DEI.words) <= STATED_SIZES["dei"]
    assert len(TR.words) <= STATED_SIZES["transport"]


def test_matches_examples():
    assert matches(["racism", "pizza"], DEI)
    assert not matches(["pizza"], DEI)
    assert not matches([], DEI)
    assert not matches([], TR)


def test_whole_token_only():
    kw = KeywordList("t", frozenset({"bus"}))
    assert not matches(["buses", "omnibus"], kw)
    assert matches(["buses"], kw, mode="substring")
    with pytest.raises(ValueError):
        matches(["bus"], kw, mode="fuzzy")


def test_tag_examples():
    res = tag_and_filter([cp(0, ["racism", "subway"]), cp(1, ["racism", "housing"]),
                          cp(2, ["subway", "delay"])], DEI, TR)
    tags = [t for _, t in res.tagged]
    assert tags[0].relevant
    assert tags[1].dei and not tags[1].relevant
    # stage 2 is never evaluated for posts dropped at stage 1
    assert not tags[2].dei and not tags[2].transport
    assert [p.post_id for p in res.retained] == ["0"]
    assert (res.stage1_kept, res.stage2_kept) == (2, 1)
    assert res.summary() == "stage1_kept=2 stage2_kept=1 ratio=33.33"


def test_keyword_list_validation(tmp_path):
    with pytest.raises(ValueError):
        KeywordList("x", frozenset())
    with pytest.raises(ValueError):
        KeywordList("x", frozenset({"two words"}))
    p = tmp_path / "kw.txt"
    p.write_text("Bus\nbus\n# note\ntrain\n", encoding="utf-8")
    assert load_keywords(p, "transport").words == frozenset({"bus", "train"})


def test_filter_estimator():
    f = RelevanceFilter().fit()
    mask = f.predict([["racism", "subway"], ["racism"], ["bus"]])
    assert mask.dtype == bool and mask.tolist() == [True, False, False]
    with pytest.raises(ValueError):
        RelevanceFilter(match="nope").fit()
    custom = RelevanceFilter(dei_keywords=["a"], transport_keywords=["b"])
    assert custom.predict([["a", "b"], ["b"]]).tolist() == [True, False]


vocab = sorted(DEI.words)[:6] + sorted(TR.words)[:6] + ["pizza", "today", "housing"]
docs = st.lists(st.lists(st.sampled_from(vocab), max_size=6), max_size=40)


@given(docs)
def test_staged_equals_conjunctive(token_lists):
    corpus = [cp(i, t) for i, t in enumerate(token_lists)]
    staged = [p.post_id for p in tag_and_filter(corpus, DEI, TR).retained]
    conj = [p.post_id for p in corpus if matches(p.tokens, DEI) and matches(p.tokens, TR)]
    assert staged == conj


@given(docs, st.sampled_from(vocab), st.integers(0, 39))
def test_monotone(token_lists, extra, drop):
    corpus = [cp(i, t) for i, t in enumerate(token_lists)]
    base = {p.post_id for p in tag_and_filter(corpus, DEI, TR).retained}
    bigger = KeywordList("dei", DEI.words | {extra})
    assert base <= {p.post_id for p in tag_and_filter(corpus, bigger, TR).retained}
    fewer = [p for i, p in enumerate(corpus) if i != drop]
    assert {p.post_id for p in tag_and_filter(fewer, DEI, TR).retained} <= base


def test_predict_matches_function():
    rng = np.random.default_rng(3)
    rows = [list(rng.choice(vocab, size=int(rng.integers(0, 5)))) for _ in range(200)]
    res = tag_and_filter([cp(i, r) for i, r in enumerate(rows)], DEI, TR)
    assert RelevanceFilter().predict(rows).tolist() == [t.relevant for _, t in res.tagged]
