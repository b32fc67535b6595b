"""Smoke test for the refab_py extension.

Builds the extension with cargo (unless REFAB_PY_LIB points at a built library),
copies it next to a temporary package path and exercises each binding once.
"""

import importlib
import json
import os
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def locate_library() -> Path:
    given = os.environ.get("REFAB_PY_LIB")
    if given:
        return Path(given)
    subprocess.run(
        ["cargo", "build", "--release", "-p", "refab-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    for name in ("librefab_py.so", "librefab_py.dylib", "refab_py.dll"):
        lib = ROOT / "target" / "release" / name
        if lib.exists():
            return lib
    raise SystemExit("refab_py library not found under target/release")


def load():
    staging = Path(tempfile.mkdtemp(prefix="refab_py_"))
    suffix = ".pyd" if sys.platform == "win32" else ".so"
    shutil.copy(locate_library(), staging / f"refab_py{suffix}")
    sys.path.insert(0, str(staging))
    return importlib.import_module("refab_py")


def main() -> None:
    rp = load()

    assert rp.modulus_m(3, 2) == 6
    assert rp.modulus_m(4, 3) == 12

    k7 = rp.Hypergraph.complete(7, 2)
    assert len(k7) == 21 and k7.is_divisible(3)
    assert not rp.Hypergraph.complete(8, 2).is_divisible(3)
    again = rp.Hypergraph.from_jsonl(k7.to_jsonl())
    assert again.edges() == k7.edges()
    assert len(k7.link([0])) == 6

    sts = rp.find_decomposition(k7, 3)
    assert sts is not None and len(sts) == 7
    assert rp.verify_decomposition(k7, 3, sts)
    assert not rp.verify_decomposition(k7, 3, sts[1:])
    assert rp.find_decomposition(rp.Hypergraph.complete(6, 2), 3) is None

    blocks = rp.decompose_complete(9, q=3, strategy="hybrid", seed=1)
    assert len(blocks) == 12
    assert rp.verify_decomposition(rp.Hypergraph.complete(9, 2), 3, blocks)
    try:
        rp.decompose_complete(8)
    except ValueError:
        pass
    else:
        raise AssertionError("K_8 should be rejected")

    rmh = json.loads(rp.rmh_json(3, 2))
    assert len(rmh["vertices"]) == 8
    assert rp.verify_rmh(3, 4)

    host = rp.Hypergraph.complete(40, 2)
    x = rp.Hypergraph(40, 2, [[0, 1], [1, 2], [0, 2]])
    omni = json.loads(rp.omni_absorber_json(host, x, 3))
    assert omni["verify"]["ok"] and omni["verify"]["checked"] == 2

    print("refab_py smoke test: ok")


if __name__ == "__main__":
    main()
