"""Reference STOI / SI-SDR values for a `reference,estimate` manifest.

Uses pystoi as the independent implementation. Prints one JSON object
with per-pair values in manifest order.

    python3 tools/stoi_oracle.py <manifest.csv>
"""
import csv
import json
import os
import sys

import numpy as np
from scipy.io import wavfile
from pystoi import stoi


def si_sdr(ref, est):
    alpha = np.dot(est, ref) / np.dot(ref, ref)
    s = alpha * ref
    return 10 * np.log10(np.sum(s**2) / np.sum((est - s) ** 2))


def main(path):
    base = os.path.dirname(path)
    rows = []
    with open(path) as f:
        for rec in csv.DictReader(f):
            fs, x = wavfile.read(os.path.join(base, rec["reference"]))
            fs2, y = wavfile.read(os.path.join(base, rec["estimate"]))
            x, y = x.astype(np.float64), y.astype(np.float64)
            assert fs == fs2
            n = min(len(x), len(y))
            x, y = x[:n], y[:n]
            rows.append({
                "reference": rec["reference"],
                "estimate": rec["estimate"],
                "stoi": float(stoi(x, y, fs, extended=False)),
                "si_sdr": float(si_sdr(x, y)),
            })
    json.dump(rows, sys.stdout, indent=1)
    print()


if __name__ == "__main__":
    main(sys.argv[1])
