#!/usr/bin/env python3
"""Write ML-100K as MovieLens-style CSVs (ratings.csv, movies.csv).

The GroupLens download host is tried first; if unreachable, the copy of
ML-100K bundled in the `pytorch-widedeep` wheel on PyPI is used instead.

    python3 scripts/fetch_ml100k.py [out_dir]    # default: data/ml-100k
"""
import csv
import io
import os
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]


def from_grouplens():
    url = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
    raw = urllib.request.urlopen(url, timeout=20).read()
    z = zipfile.ZipFile(io.BytesIO(raw))
    ratings = []
    for line in z.read("ml-100k/u.data").decode().splitlines():
        u, i, r, t = line.split("\t")
        ratings.append((int(u), int(i), int(r), int(t)))
    items = []
    for line in z.read("ml-100k/u.item").decode("latin-1").splitlines():
        f = line.split("|")
        flags = [int(x) for x in f[5:24]]
        items.append((int(f[0]), f[1], [g for g, on in zip(GENRES, flags) if on]))
    return ratings, items


def from_wheel():
    import pandas as pd

    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
             "-d", tmp, "pytorch-widedeep==1.7.0"])
        whl = [f for f in os.listdir(tmp) if f.endswith(".whl")][0]
        z = zipfile.ZipFile(os.path.join(tmp, whl))
        base = "pytorch_widedeep/datasets/data/MovieLens100k_"
        data = pd.read_parquet(io.BytesIO(z.read(base + "data.parquet.brotli")))
        meta = pd.read_parquet(io.BytesIO(z.read(base + "items.parquet.brotli")))
    ratings = list(data[["user_id", "movie_id", "rating", "timestamp"]]
                   .itertuples(index=False, name=None))
    items = []
    for row in meta.itertuples(index=False):
        d = row._asdict()
        flags = [int(meta.loc[meta.movie_id == d["movie_id"], g].iloc[0]) for g in GENRES]
        items.append((int(d["movie_id"]), str(d["movie_title"]),
                      [g for g, on in zip(GENRES, flags) if on]))
    return ratings, items


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "data", "ml-100k")
    os.makedirs(out, exist_ok=True)
    try:
        ratings, items = from_grouplens()
    except Exception as err:  # noqa: BLE001
        print(f"grouplens unavailable ({err}); using PyPI copy", file=sys.stderr)
        ratings, items = from_wheel()

    with open(os.path.join(out, "ratings.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["userId", "movieId", "rating", "timestamp"])
        for u, i, r, t in ratings:
            w.writerow([int(u), int(i), f"{float(r):.1f}", int(t)])
    with open(os.path.join(out, "movies.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["movieId", "title", "genres"])
        for i, title, genres in sorted(items):
            w.writerow([i, title, "|".join(genres) if genres else "(no genres listed)"])
    print(f"wrote {len(ratings)} ratings, {len(items)} items to {out}")


if __name__ == "__main__":
    main()
