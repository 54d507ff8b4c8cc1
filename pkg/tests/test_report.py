import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deiatransit.geodemo import TractDemographics, load_tracts, parse_tracts
from deiatransit.report import (
    DIMENSIONS,
    UNASSIGNED,
    ScoredPost,
    demographic_distribution,
    emit_geojson,
    percent,
    rollup_summary,
    sentiment_distribution,
    tract_rollup,
    write_csv,
)
from deiatransit.sentiment import Sentiment
from deiatransit.synthetic import tract_grid

NEG, NEU, POS = Sentiment.NEGATIVE, Sentiment.NEUTRAL, Sentiment.POSITIVE


def sp(i, s, geoid=None):
    return ScoredPost(str(i), -74.0, 40.7, {NEG: -0.5, NEU: 0.0, POS: 0.5}[s], s, geoid)


def test_percent_half_up():
    assert percent(1, 8) == 12.5
    assert percent(1, 3) == 33.3
    assert percent(2, 3) == 66.7
    assert percent(1, 16) == 6.3  # 6.25 rounds up, not to even
    assert percent(0, 0) == 0.0


def test_sentiment_distribution():
    d = sentiment_distribution([NEG, NEU, POS, POS])
    assert (d.pct_negative, d.pct_neutral, d.pct_positive, d.n) == (25.0, 25.0, 50.0, 4)
    d = sentiment_distribution([POS] * 3)
    assert (d.pct_negative, d.pct_neutral, d.pct_positive) == (0, 0, 100)
    e = sentiment_distribution([])
    assert e.empty and (e.pct_negative, e.pct_neutral, e.pct_positive) == (0, 0, 0)


def test_rollup_examples():
    r = tract_rollup([sp(0, POS, "A"), sp(1, NEG, "A"), sp(2, NEG, "B"), sp(3, NEU)])
    assert [(x.geoid, x.highly_sensitive) for x in r] == [("A", True), ("B", False)]
    assert tract_rollup([sp(0, POS)]) == []
    s = rollup_summary(r, [sp(0, POS, "A"), sp(1, NEG, "A"), sp(2, NEG, "B"), sp(3, NEU)])
    assert s["highly_sensitive"] == 1 and s["posts_unassigned"] == 1 and s["posts_geotagged"] == 3


def test_distribution_all_low():
    demo = {"A": TractDemographics("A", 20_000, 10, 5, 5)}
    posts = [sp(i, POS, "A") for i in range(4)]
    rows = demographic_distribution(tract_rollup(posts, demo), posts)
    income = {r.label: r.tweet_share for r in rows if r.dimension == "income"}
    assert income == {"Low": 100.0, "Medium": 0.0, "High": 0.0, UNASSIGNED: 0.0}


def test_distribution_constructed_split():
    demo = {
        "L": TractDemographics("L", 30_000, 60, 5, 5),
        "M": TractDemographics("M", 90_000, 60, 5, 5),
        "H": TractDemographics("H", 200_000, 60, 5, 5),
    }
    posts = ([sp(i, POS, "L") for i in range(53)] + [sp(100 + i, NEG, "M") for i in range(45)]
             + [sp(200, NEU, "H"), sp(300, NEU, None)])
    rows = demographic_distribution(tract_rollup(posts, demo), posts)
    income = [(r.label, r.count, r.tweet_share) for r in rows if r.dimension == "income"]
    assert income == [("Low", 53, 53.0), ("Medium", 45, 45.0), ("High", 1, 1.0), (UNASSIGNED, 1, 1.0)]


geoids = st.sampled_from(["A", "B", "C", "D", None])
post_rows = st.lists(st.tuples(st.sampled_from([NEG, NEU, POS]), geoids), max_size=60)


@given(post_rows, st.integers(0, 2**32 - 1))
def test_aggregation_invariants(rows, seed):
    rng = np.random.default_rng(seed)
    demo = {}
    for g in "ABC":
        vals = [None if rng.random() < 0.2 else float(rng.uniform(0, 100)) for _ in range(3)]
        demo[g] = TractDemographics(g, float(rng.uniform(0, 3e5)), *vals)
    posts = [sp(i, s, g) for i, (s, g) in enumerate(rows)]
    rollups = tract_rollup(posts, demo)
    for r in rollups:
        mine = [p.sentiment for p in posts if p.geoid == r.geoid]
        assert r.highly_sensitive == (NEG in mine and POS in mine)
    summary = rollup_summary(rollups, posts)
    assert summary["posts_geotagged"] + summary["posts_unassigned"] == len(posts)
    assert summary["highly_sensitive"] <= min(summary["tracts_with_negative"], summary["tracts_with_positive"])
    rows_ = demographic_distribution(rollups, posts)
    for dim in DIMENSIONS:
        mine = [r for r in rows_ if r.dimension == dim]
        assert sum(r.count for r in mine) == len(posts)
        if posts:
            assert abs(sum(r.tweet_share for r in mine) - 100) <= 0.5


def test_geojson_round_trip(tmp_path):
    grid = tract_grid(nx=2, ny=1, seed=0)
    tracts, _ = parse_tracts(grid)
    g0 = tracts[0].geoid
    posts = [sp(0, POS, g0), sp(1, NEG, g0), sp(2, NEU)]
    demo = {g0: TractDemographics(g0, 1e5, 55, 5, 70)}
    pts, polys = emit_geojson(posts, tract_rollup(posts, demo), tracts,
                              tmp_path / "p.geojson", tmp_path / "t.geojson")
    assert len(pts["features"]) == 3 and pts["features"][2]["properties"]["geoid"] is None
    assert len(polys["features"]) == 2
    props = polys["features"][0]["properties"]
    assert props["highly_sensitive"] and props["black_class"] == "VeryHigh"
    reloaded = load_tracts(tmp_path / "t.geojson")
    assert [t.geoid for t in reloaded] == [t.geoid for t in tracts]
    assert reloaded[0].rings == tracts[0].rings
    json.loads((tmp_path / "p.geojson").read_text())


def test_csv_writer(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [(1, 'say "hi", ok')])
    assert p.read_bytes() == b'a,b\r\n1,"say ""hi"", ok"\r\n'
    with open(p, newline="") as fh:
        assert list(csv.reader(fh))[1] == ["1", 'say "hi", ok']


def test_scored_post_labels():
    with pytest.raises(ValueError):
        sentiment_distribution(["bogus"])
