"""Export the benchmark datasets to the sparse text format under data/.

iris and wine come from scikit-learn's bundled copies of the UCI data.
glass2 is the binarized UCI glass variant shipped as an ARFF fixture inside
scikit-learn's test data (163 samples, 9 features, 2 classes); the original
6-class glass set is not redistributed with scikit-learn, so the widely
used glass2 variant stands in for it. Run from the repository root:

    python3 scripts/export_benchmarks.py
"""

import csv
import gzip
import io
from pathlib import Path

import numpy as np
from sklearn.datasets import load_iris, load_wine

from vvlearn.data import Dataset, TaskKind, serialize_sparse_multiclass

GLASS2_FIXTURE = (
    Path(np.__file__).parents[1]
    / "sklearn"
    / "datasets"
    / "tests"
    / "data"
    / "openml"
    / "id_40675"
    / "data-v1-dl-4965250.arff.gz"
)


def _to_dataset(X, y):
    classes = np.unique(y)
    Y = np.zeros((len(y), len(classes)))
    for i, label in enumerate(y):
        Y[i, int(np.searchsorted(classes, label))] = 1.0
    return Dataset(np.asarray(X, dtype=float), Y, np.ones_like(Y, dtype=bool), TaskKind.MULTICLASS)


def _read_glass2():
    raw = gzip.decompress(GLASS2_FIXTURE.read_bytes()).decode()
    rows = []
    in_data = False
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        if line.lower().startswith("@data"):
            in_data = True
            continue
        if line.startswith("@"):
            continue
        if in_data:
            rows.append(next(csv.reader(io.StringIO(line))))
    X = np.array([[float(v) for v in r[:-1]] for r in rows])
    y = np.array([int(float(r[-1])) for r in rows])
    return X, y


def main():
    out_dir = Path(__file__).parents[1] / "data"
    out_dir.mkdir(exist_ok=True)
    iris = load_iris()
    wine = load_wine()
    glass_X, glass_y = _read_glass2()
    for name, X, y in [
        ("iris", iris.data, iris.target),
        ("wine", wine.data, wine.target),
        ("glass2", glass_X, glass_y),
    ]:
        ds = _to_dataset(X, y)
        path = out_dir / f"{name}_mc.txt"
        path.write_text(serialize_sparse_multiclass(ds))
        print(f"{path}: {ds.n} samples, {ds.d} features, {ds.K} classes")


if __name__ == "__main__":
    main()
