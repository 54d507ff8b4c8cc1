"""Deterministic synthetic data: planted topic corpora, keyword corpora, tract grids,
and the end-to-end fixture bundle.

Run ``python -m deiatransit.synthetic DIR`` to regenerate the fixture bundle.
"""

from __future__ import annotations

import csv
import json
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .corpus import CleanPost, format_timestamp
from .relevance import default_keywords

__all__ = [
    "PLANTED_VOCABS",
    "planted_corpus",
    "keyword_corpus",
    "tract_grid",
    "random_demographics",
    "write_fixture",
]

# Interleaved names, so lexicographic order (used for tie-breaks) carries no
# information about which vocabulary a word belongs to.
PLANTED_VOCABS = (
    tuple(f"w{i:02d}" for i in range(0, 20, 2)),
    tuple(f"w{i:02d}" for i in range(1, 20, 2)),
)


def planted_corpus(n_docs=200, doc_len=20, seed=0, vocabs=PLANTED_VOCABS):
    """Documents alternating between planted vocabularies; each doc uses one only.

    Returns ``(docs, labels)`` where ``labels[i]`` is the vocabulary index of doc i.
    """
    rng = np.random.default_rng(seed)
    docs, labels = [], []
    for i in range(n_docs):
        g = i % len(vocabs)
        vocab = vocabs[g]
        docs.append([vocab[j] for j in rng.integers(0, len(vocab), size=doc_len)])
        labels.append(g)
    return docs, labels


FILLER = tuple(
    "today city people time morning street work home week service news public "
    "line crowd wait day night community policy plan money health school".split()
)


def keyword_corpus(n_posts=10_000, seed=0) -> list[CleanPost]:
    """CleanPosts mixing DEI words, transport words, near-miss forms and filler."""
    rng = np.random.default_rng(seed)
    dei = sorted(default_keywords("dei").words)
    tr = sorted(default_keywords("transport").words)
    near = [w + "s" for w in tr[:10]] + ["car" + "pet", "bus" + "es", "racist"]
    t0 = datetime(2020, 3, 15, tzinfo=timezone.utc)
    posts = []
    for i in range(n_posts):
        toks = list(rng.choice(FILLER, size=int(rng.integers(2, 12))))
        if rng.random() < 0.3:
            toks.insert(int(rng.integers(0, len(toks) + 1)), str(rng.choice(dei)))
        if rng.random() < 0.3:
            toks.insert(int(rng.integers(0, len(toks) + 1)), str(rng.choice(tr)))
        if rng.random() < 0.2:
            toks.insert(int(rng.integers(0, len(toks) + 1)), str(rng.choice(near)))
        posts.append(
            CleanPost(
                post_id=str(i),
                user_id=f"u{int(rng.integers(0, 500))}",
                created_at=t0 + timedelta(minutes=i),
                lon=-74.0,
                lat=40.7,
                clean_text=" ".join(toks),
                tokens=tuple(toks),
            )
        )
    return posts


def tract_grid(nx=5, ny=4, origin=(0.0, 0.0), size=(1.0, 1.0), jitter=0.25, seed=0,
               geoid_prefix="36061"):
    """A jittered ``nx`` by ``ny`` tiling as a GeoJSON FeatureCollection.

    Neighbouring cells share vertices, so tracts tile without gaps or overlap.
    The first cell carries a square hole.
    """
    rng = np.random.default_rng(seed)
    x0, y0 = origin
    dx, dy = size
    vx = np.zeros((nx + 1, ny + 1))
    vy = np.zeros((nx + 1, ny + 1))
    for i in range(nx + 1):
        for j in range(ny + 1):
            jx = 0.0 if i in (0, nx) else rng.uniform(-jitter, jitter) * dx
            jy = 0.0 if j in (0, ny) else rng.uniform(-jitter, jitter) * dy
            vx[i, j] = x0 + i * dx + jx
            vy[i, j] = y0 + j * dy + jy
    features = []
    n = 0
    for j in range(ny):
        for i in range(nx):
            n += 1
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1), (i, j)]
            ring = [[float(vx[a, b]), float(vy[a, b])] for a, b in corners]
            rings = [ring]
            if n == 1:
                cx = float(np.mean([p[0] for p in ring[:4]]))
                cy = float(np.mean([p[1] for p in ring[:4]]))
                hx, hy = 0.15 * dx, 0.15 * dy
                rings.append([[cx - hx, cy - hy], [cx - hx, cy + hy], [cx + hx, cy + hy],
                              [cx + hx, cy - hy], [cx - hx, cy - hy]])
            features.append({
                "type": "Feature",
                "properties": {"GEOID": f"{geoid_prefix}{n:06d}"},
                "geometry": {"type": "Polygon", "coordinates": rings},
            })
    return {"type": "FeatureCollection", "features": features}


def random_demographics(geoids, seed=0, missing_rate=0.1):
    """Rows for an ACS CSV; some cells left empty."""
    rng = np.random.default_rng(seed)
    rows = []
    for g in geoids:
        vals = [
            round(float(rng.uniform(10_000, 200_000)), 0),
            round(float(rng.uniform(20, 80)), 1),
            round(float(rng.uniform(0, 80)), 1),
            round(float(rng.uniform(0, 80)), 1),
        ]
        row = [g] + ["" if rng.random() < missing_rate else v for v in vals]
        rows.append(row)
    return rows


# Fixture post themes: (DEI words, transport words, context words).
_THEMES = (
    ("racism black hispanic race racial".split(), "bus subway transit".split(),
     "police neighborhood community color stop".split()),
    ("income poor afford affordable unaffordable".split(), "taxi uber car ride".split(),
     "fare rent job money workers".split()),
    ("wheelchair disabled disability accessibility".split(), "subway station train".split(),
     "elevator stairs broken access ramp".split()),
    ("women gender".split(), "bus train metro".split(),
     "night safety harassment driver late".split()),
)
_POSITIVE = "love great thank support happy safe best fair welcome proud".split()
_NEGATIVE = "hate terrible unsafe dangerous unfair angry sad awful crowded broken".split()


def _fixture_text(rng) -> str:
    dei, transport, context = _THEMES[int(rng.integers(0, len(_THEMES)))]
    parts = []
    if rng.random() < 0.85:
        parts.append(str(rng.choice(dei)))
    if rng.random() < 0.8:
        parts.append(str(rng.choice(transport)))
    mood = rng.random()
    if mood < 0.35:
        parts += list(rng.choice(_NEGATIVE, size=int(rng.integers(1, 3))))
    elif mood < 0.7:
        parts += list(rng.choice(_POSITIVE, size=int(rng.integers(1, 3))))
    parts += list(rng.choice(context, size=int(rng.integers(2, 6))))
    rng.shuffle(parts)
    text = " ".join(parts)
    decor = rng.random()
    if decor < 0.15:
        text = "#MTA " + text + " http://t.co/abc"
    elif decor < 0.3:
        text = "@nyct " + text.capitalize() + " &amp; more 😡"
    elif decor < 0.4:
        text = "<b>" + text.upper() + "</b>!!"
    return text


def write_fixture(out_dir, n_posts=600, seed=7) -> Path:
    """Write posts, tracts, ACS table and config for an end-to-end run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    # tracts tile a window inside the study box
    tracts = tract_grid(5, 4, origin=(-74.10, 40.60), size=(0.05, 0.05), jitter=0.2, seed=seed)
    (out / "tracts.geojson").write_text(json.dumps(tracts, indent=1) + "\n", encoding="utf-8")
    geoids = [f["properties"]["GEOID"] for f in tracts["features"]]
    with open(out / "acs.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["geoid", "income_per_capita", "pct_female", "pct_hispanic_latino", "pct_black"])
        # the last tract is left out of the table on purpose
        w.writerows(random_demographics(geoids[:-1], seed=seed))

    t0 = datetime(2020, 3, 15, tzinfo=timezone.utc)
    lines = []
    for i in range(n_posts):
        r = rng.random()
        if r < 0.05:
            lon, lat = -75.5, 40.0  # outside the study box
        elif r < 0.12:
            lon, lat = float(rng.uniform(-74.25, -74.11)), float(rng.uniform(40.49, 40.59))
        else:
            lon = float(rng.uniform(-74.10, -73.85))
            lat = float(rng.uniform(40.60, 40.80))
        rec = {
            "id": str(1000 + i),
            "user_id": f"u{int(rng.integers(0, 80))}",
            "created_at": format_timestamp(t0 + timedelta(minutes=97 * i)),
            "text": _fixture_text(rng),
            "lon": round(lon, 6),
            "lat": round(lat, 6),
        }
        lines.append(json.dumps(rec, ensure_ascii=False))
        if i % 97 == 5:
            lines.append(json.dumps(rec, ensure_ascii=False))  # exact repeat
    lines.insert(10, '{"id": "bad-1", "user_id": "u1"}')
    lines.insert(20, "{not json")
    (out / "posts.ndjson").write_text("\n".join(lines) + "\n", encoding="utf-8")

    (out / "fixture.ini").write_text(FIXTURE_CONFIG, encoding="utf-8")
    return out


FIXTURE_CONFIG = """\
# End-to-end fixture configuration. Relative paths resolve against this file.
[inputs]
posts = posts.ndjson
tracts = tracts.geojson
acs = acs.csv

[run]
seed = 20200315
out_dir = out

[topics]
k = 2,3,4
iterations = 300
min_count = 2
min_tokens = 3

[bigrams]
g = 4
max_sweeps = 20
top_n = 20
"""


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "fixture"
    print(write_fixture(target))
