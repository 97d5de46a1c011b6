#!/usr/bin/env python3
"""Smoke test for the tcg_py extension module.

Builds nothing itself: expects `cargo build -p tcg-py` to have produced the
cdylib under target/. Copies the library next to a temp dir as tcg_py.so so
Python can import it, then exercises the bound API.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def locate_library() -> Path:
    names = ["libtcg_py.so", "libtcg_py.dylib", "tcg_py.dll"]
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("debug", "release")
        for name in names
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit(
        "tcg_py library not found; run `cargo build -p tcg-py` first "
        f"(searched {', '.join(str(c) for c in candidates)})"
    )


def main() -> None:
    lib = locate_library()
    tmp = Path(tempfile.mkdtemp(prefix="tcg-py-"))
    shutil.copy(lib, tmp / "tcg_py.so")
    sys.path.insert(0, str(tmp))
    import tcg_py

    checks = 0

    def check(cond: bool, what: str) -> None:
        nonlocal checks
        if not cond:
            sys.exit(f"FAIL: {what}")
        checks += 1
        print(f"ok: {what}")

    # gate verification against closed forms
    report = tcg_py.verify()
    check(len(report) == 8 and all(p for (_, _, _, p) in report),
          "all closed-form verifications pass")
    flipped = tcg_py.verify(flip_convention=True)
    check(any(not p for (_, _, _, p) in flipped),
          "flipped convention fails as negative control")

    # conditional-rotation block structure
    block = tcg_py.cu_block(math.pi, 0.0)
    check(abs(block[0][0][0] - 1.0) < 1e-12 and abs(block[3][2][0] + 1.0) < 1e-12,
          "cu(pi, 0) block exchanges |10> and |11> with a sign")
    full = tcg_py.cu_matrix(math.pi / 2, 0.3)
    check(len(full) == 9 and len(full[0]) == 9, "full cu matrix is 9x9")

    # GHZ preparation: counts and fidelity, ideal and noisy
    ghz = tcg_py.Circuit.ghz(3, 0.0, "cu")
    check(ghz.counts() == (1, 2, 3), "ghz(3) counts (1 single, 2 two-qudit, depth 3)")
    check(abs(ghz.ghz_fidelity(0.0) - 1.0) < 1e-12, "ideal ghz fidelity is 1")
    noisy = ghz.ghz_fidelity(0.0, tcg_py.NoiseModel.device_default(3))
    check(0.85 < noisy < 1.0, f"noisy ghz fidelity {noisy:.4f} is degraded but high")

    # scheme comparison under noise
    ghz_cz = tcg_py.Circuit.ghz(3, 0.0, "cz")
    noisy_cz = ghz_cz.ghz_fidelity(0.0, tcg_py.NoiseModel.device_default(3))
    check(noisy >= noisy_cz, "composite scheme beats cz decomposition under noise")

    # JSON round trip
    w = tcg_py.Circuit.w(3, 1.0, "spcu")
    check(tcg_py.Circuit.from_json(w.to_json()).to_json() == w.to_json(),
          "circuit JSON round-trips byte-identically")

    # manual circuit building and truth table
    c = tcg_py.Circuit(2, "cu")
    c.push("cu", [0, 1], {"theta": math.pi, "phi": 0.0})
    t = c.truth_table()
    check(abs(t[3][2] - 1.0) < 1e-12 and abs(t[2][3] - 1.0) < 1e-12,
          "cu(pi) exchanges |10> and |11> populations")
    sampled = c.truth_table(shots=5000, seed=3)
    check(abs(sampled[3][2] - 1.0) < 1e-12, "sampled truth table is consistent")

    # comparator contract
    comp = tcg_py.Circuit.comparator()
    check(comp.counts() == (8, 6, 7), "comparator counts (8, 6, 7)")
    tt = comp.truth_table()
    check(all(abs(sum(col) - 1.0) < 1e-9
              for col in zip(*tt)), "comparator table is a permutation")

    # expansion to pulse level
    check(ghz.expand().num_ops() > ghz.num_ops(), "expansion adds pulse-level gates")

    # tomography and feedback
    check(abs(tcg_py.process_fidelity(math.pi, 0.0) - 1.0) < 1e-9,
          "exact process tomography fidelity is 1")
    converged, iters, fid = tcg_py.feedback(math.pi, 0.0, 0.1, 0.0)
    check(converged and iters <= 5 and fid >= 0.999,
          f"feedback calibrates a 0.1 angle offset in {iters} iterations")

    print(f"smoke test passed ({checks} checks)")


if __name__ == "__main__":
    main()
