"""Convert KEEL ``.dat`` files shipped in the ``keel-ds`` wheel into plain CSVs.

Usage::

    pip download keel-ds --no-deps -d /tmp/keel
    python tools/keel_to_csv.py /tmp/keel/keel_ds-*.whl data/

Only the benchmark datasets used by the experiment configs are exported.
"""
import csv
import sys
import zipfile
from pathlib import Path

# output name -> path inside the wheel
DATASETS = {
    "australian": "balanced/raw/australian.dat",
    "cmc": "balanced/raw/contraceptive.dat",
    "diabetes": "imbalanced/raw/pima.dat",
    "glass1": "imbalanced/raw/glass1.dat",
    "glass6": "imbalanced/raw/glass6.dat",
    "haberman": "imbalanced/raw/haberman.dat",
    "hayes": "balanced/raw/hayes-roth.dat",
    "heart": "balanced/raw/heart.dat",
    "led7digit": "balanced/raw/led7digit.dat",
    "mammographic": "balanced/raw/mammographic.dat",
    "pima": "balanced/raw/pima.dat",
    "sonar": "balanced/raw/sonar.dat",
    "vehicle": "balanced/raw/vehicle.dat",
    "vehicle2": "imbalanced/raw/vehicle2.dat",
    "vowel": "balanced/raw/vowel.dat",
    "wdbc": "balanced/raw/wisconsin.dat",
}


def main(wheel, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as zf:
        for name, member in DATASETS.items():
            text = zf.read(f"keel_ds/data/{member}").decode()
            rows = [[c.strip() for c in line.split(",")] for line in text.splitlines() if line.strip()]
            header = [f"x{i}" for i in range(len(rows[0]) - 1)] + ["class"]
            with open(out / f"{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows(rows)
            print(f"{name}: {len(rows)} rows")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
