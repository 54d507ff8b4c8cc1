import io
import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deiatransit.corpus import (
    EMOJI_RANGES,
    NYC_BOX,
    BoundingBox,
    RawPost,
    TextPreprocessor,
    clean_text,
    dedup,
    default_stopwords,
    filter_bbox,
    load_stopwords,
    parse_posts,
    to_clean_post,
    tokenize,
)
from deiatransit.relevance import default_keywords

T0 = datetime(2020, 3, 20, 10, tzinfo=timezone.utc)


def post(pid, lat=40.7, lon=-74.0, user="u1", text="bus late"):
    return RawPost(pid, user, T0, text, lon, lat)


def ndjson(*objs):
    lines = [o if isinstance(o, str) else json.dumps(o) for o in objs]
    return io.BytesIO(("\n".join(lines) + "\n").encode())


GOOD = {"id": "1", "user_id": "u1", "created_at": "2020-03-20T10:00:00Z",
        "text": "bus late", "lon": -73.9, "lat": 40.7}


def test_parse_one_record():
    posts, errors = parse_posts(ndjson(GOOD))
    assert errors == []
    assert posts == [RawPost("1", "u1", T0, "bus late", -73.9, 40.7)]


def test_parse_missing_field():
    posts, errors = parse_posts(ndjson('{"id":"2"}'))
    assert posts == []
    assert errors[0].line == 1
    assert "missing field" in errors[0].reason
    assert str(errors[0]).startswith("line1: ")


def test_parse_ten_lines_two_bad():
    lines = [dict(GOOD, id=str(i)) for i in range(8)]
    lines.insert(3, "{not json")
    lines.insert(7, dict(GOOD, id="x", lat=123.0))
    posts, errors = parse_posts(ndjson(*lines))
    assert len(posts) == 8 and len(errors) == 2
    assert [e.line for e in errors] == [4, 8]
    assert [p.post_id for p in posts] == [str(i) for i in range(8)]


@pytest.mark.parametrize("bad", [
    dict(GOOD, lon="x"),
    dict(GOOD, lat=True),
    dict(GOOD, created_at="yesterday"),
    dict(GOOD, text=5),
    dict(GOOD, id=""),
    [1, 2],
])
def test_parse_ill_typed(bad):
    posts, errors = parse_posts(ndjson(bad))
    assert posts == [] and len(errors) == 1


def test_parse_skips_blank_and_bad_utf8():
    stream = [json.dumps(GOOD).encode(), b"   \n", b"\xff\xfe\n"]
    posts, errors = parse_posts(stream)
    assert len(posts) == 1
    assert [(e.line, e.reason) for e in errors] == [(3, "invalid UTF-8")]


def test_bbox_examples():
    kept = filter_bbox([post("a"), post("b", lat=43.0), post("c", lat=40.49, lon=-74.25)], NYC_BOX)
    assert [p.post_id for p in kept] == ["a", "c"]


def test_bbox_rejects_inverted():
    with pytest.raises(ValueError):
        BoundingBox(41, 40, -74, -73)


def test_dedup_examples():
    assert [p.post_id for p in dedup([post("1"), post("2", text="x"), post("1")])] == ["1", "2"]
    assert [p.post_id for p in dedup([post("1"), post("2")])] == ["1"]
    uniq = [post(str(i), text=f"t{i}") for i in range(5)]
    assert dedup(uniq) == uniq


@pytest.mark.parametrize("raw, expected", [
    ("<b>Bus</b> is LATE 😡 http://t.co/x", "bus is late"),
    ("#MTA @user delays &amp; crowding", "mta delays crowding"),
    ("", ""),
    ("Don’t  wait", "don't wait"),
    ("'quoted' it's", "quoted it's"),
    ("www.mta.info/service ok", "ok"),
    ("a&lt;b&gt;c", "a b c"),
    ("email me@x.com", "email me x com"),
    ("👍🏽 ok ❤️", "ok"),
])
def test_clean_text(raw, expected):
    assert clean_text(raw) == expected


def test_emoji_ranges_sorted_and_disjoint():
    for (lo, hi), (lo2, _) in zip(EMOJI_RANGES, EMOJI_RANGES[1:]):
        assert lo <= hi
    spans = sorted(EMOJI_RANGES)
    assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))


def test_tokenize_examples():
    assert tokenize("the bus is late", {"the", "is"}) == ["bus", "late"]
    assert tokenize("bus bus bus", {"the"}) == ["bus", "bus", "bus"]
    assert tokenize("the is", {"the", "is"}) == []


def test_stopwords_file(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("# comment\nThe\n\nis\n", encoding="utf-8")
    assert load_stopwords(p) == frozenset({"the", "is"})


def test_keywords_survive_default_stopwords():
    stop = default_stopwords()
    for name in ("dei", "transport"):
        kw = default_keywords(name).words
        assert not kw & stop
        for w in kw:
            assert tokenize(clean_text(w), stop) == [w]


def test_to_clean_post_and_transformer():
    cp = to_clean_post(post("1", text="The BUS is #late"), {"the", "is"})
    assert cp.clean_text == "the bus is late"
    assert cp.tokens == ("bus", "late")
    out = TextPreprocessor(stopwords={"the"}).fit_transform(["The bus", "the"])
    assert out == [["bus"], []]


texts = st.text(st.characters(blacklist_categories=("Cs",)), max_size=80)


@given(texts)
@settings(max_examples=300)
def test_clean_text_idempotent_and_lowercase(raw):
    once = clean_text(raw)
    assert clean_text(once) == once
    assert once == once.lower()
    assert "  " not in once and once == once.strip()


@given(texts)
@settings(max_examples=200)
def test_tokens_never_uppercase_or_stopword(raw):
    stop = default_stopwords()
    for t in tokenize(clean_text(raw), stop):
        assert t == t.lower() and t not in stop


coords = st.tuples(st.floats(40.0, 42.5), st.floats(-74.5, -73.5))
post_lists = st.lists(
    st.tuples(st.integers(0, 8), st.integers(0, 2), st.sampled_from(["a", "b", "c"]), coords),
    max_size=30,
).map(lambda rows: [post(str(i), lat, lon, f"u{u}", t) for i, u, t, (lat, lon) in rows])


@given(post_lists)
def test_bbox_and_dedup_idempotent(posts):
    once = filter_bbox(posts, NYC_BOX)
    assert filter_bbox(once, NYC_BOX) == once
    d = dedup(posts)
    assert dedup(d) == d
    assert len(d) <= len(posts)
    assert {p.post_id for p in d} <= {p.post_id for p in posts}
    assert len({p.post_id for p in d}) == len(d)
