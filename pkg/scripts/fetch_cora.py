"""Build a Cora graph bundle (edges.tsv + features.csv) from the LINQS release.

The LINQS files (cora.content, cora.cites) can be given directly. Without
them the script pulls them out of the ``pgl`` wheel on PyPI, which vendors
an unmodified copy.

    python scripts/fetch_cora.py data/cora
    python scripts/fetch_cora.py data/cora --content cora.content --cites cora.cites
"""

import argparse
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

import numpy as np

from cvgad.graph import AttributedGraph, save_bundle, validate


def read_linqs(content_path, cites_path):
    ids, rows = [], []
    with open(content_path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:-1]])
    index = {pid: i for i, pid in enumerate(ids)}
    pairs, skipped = [], 0
    with open(cites_path) as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = parts
            if a in index and b in index:
                pairs.append((index[a], index[b]))
            else:
                skipped += 1
    if skipped:
        print(f"skipped {skipped} citations to papers outside the corpus", file=sys.stderr)
    return AttributedGraph.from_pairs(np.array(rows), pairs)


def from_pgl_wheel(workdir):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "pgl==2.2.6", "-d", workdir, "-q"],
        check=True,
    )
    wheel = glob.glob(os.path.join(workdir, "pgl-*.whl"))[0]
    with zipfile.ZipFile(wheel) as zf:
        for name in ("cora.content", "cora.cites"):
            with zf.open(f"pgl/data/cora/{name}") as src, open(os.path.join(workdir, name), "wb") as dst:
                dst.write(src.read())
    return os.path.join(workdir, "cora.content"), os.path.join(workdir, "cora.cites")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--content")
    ap.add_argument("--cites")
    args = ap.parse_args(argv)
    with tempfile.TemporaryDirectory() as tmp:
        if args.content and args.cites:
            content, cites = args.content, args.cites
        else:
            content, cites = from_pgl_wheel(tmp)
        graph = read_linqs(content, cites)
    print(validate(graph))
    save_bundle(graph, args.out)
    print(f"wrote {args.out}: n={graph.n}, o={graph.o}, edges={graph.num_edges}")


if __name__ == "__main__":
    main()
