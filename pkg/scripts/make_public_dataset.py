"""Write the bundled breast-cancer table as a min-max-scaled CSV for the exporter.

Scaling the full table to [0, 1] up front keeps the model space aligned between
the JS training side and the engine consuming the exported models; the
criterion exercised on this data measures prediction parity and approximation
fidelity, not generalization.
"""

from pathlib import Path

import numpy as np
from sklearn.datasets import load_breast_cancer


def main() -> None:
    data = load_breast_cancer()
    X = data.data
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    scaled = (X - mins) / (maxs - mins)
    names = [n.replace(" ", "_") for n in data.feature_names]
    out = Path(__file__).resolve().parent.parent / "exporter" / "data"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "breast_cancer.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([*names, "target"]) + "\n")
        for row, label in zip(scaled, data.target):
            fh.write(",".join(f"{v:.9f}" for v in row) + f",{int(label)}\n")
    print(f"wrote {path} ({scaled.shape[0]} rows, {scaled.shape[1]} features)")


if __name__ == "__main__":
    main()
