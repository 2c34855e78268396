"""Writes the Michelle Obama / spouse fixture used by the masking checks.

The vectors are constructed, not downloaded: every word gets a random
200-d unit vector whose cosine with "spouse" is set to the intensity the
word has in the published MWRW heat map. Words the heat map does not show
get small made-up values.
"""

import argparse
import pathlib

import numpy as np

DIM = 200

# cosine with "spouse"
HEAT = {
    "michelle": 0.28, "lavaughn": 0.05, "robinson": 0.08, "obama": 0.28,
    "born": 0.25, "january": 0.10, "17": 0.10, "1964": 0.04,
    "american": 0.14, "lawyer": 0.12, "writer": 0.11,
    "first": 0.23, "lady": 0.36, "united": 0.19, "states": 0.20,
    "2009": 0.02, "2017": 0.02,
    "she": 0.42, "married": 0.55, "44th": 0.0, "previous": 0.28,
    "president": 0.27, "barack": 0.23,
    "hussein": 0.06, "ii": 0.01, "politician": 0.09, "served": 0.07,
}

TRIPLES = "Michelle_Obama\tspouse\tBarack_Obama\n"
NAMES = (
    "Michelle_Obama\tMichelle Obama\n"
    "Barack_Obama\tBarack Obama\n"
    "spouse\tspouse\n"
)
DESCRIPTIONS = (
    "Michelle_Obama\tMichelle LaVaughn Robinson Obama (born January 17, 1964) is an American "
    "lawyer and writer who was First Lady of the United States from 2009 to 2017. She is "
    "married to the 44th and previous President of the United States, Barack Obama.\n"
    "Barack_Obama\tBarack Hussein Obama II is an American politician who served as the 44th "
    "President of the United States.\n"
)


def unit(v):
    return v / np.linalg.norm(v)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parents[1] / "data/fixtures/michelle_obama"))
    ap.add_argument("--seed", type=int, default=2017)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    spouse = unit(rng.standard_normal(DIM))
    lines = ["spouse " + " ".join(f"{x:.9f}" for x in spouse)]
    for word, c in HEAT.items():
        u = rng.standard_normal(DIM)
        u = unit(u - (u @ spouse) * spouse)
        v = c * spouse + np.sqrt(1.0 - c * c) * u
        lines.append(word + " " + " ".join(f"{x:.9f}" for x in v))

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "vectors.txt").write_text("\n".join(lines) + "\n")
    (out / "triples.tsv").write_text(TRIPLES)
    (out / "names.tsv").write_text(NAMES)
    (out / "descriptions.tsv").write_text(DESCRIPTIONS)


if __name__ == "__main__":
    main()
