"""Regenerate frozen fixtures.  Run from the repository root: python3 tests/fixtures/regen.py

Golden SDPA files are frozen after a manual review; the recorded solve comes
from CVXOPT acting on the exported text through the reader in tests/oracles.py.
"""

import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import oracles  # noqa: E402
from pathcert import examples  # noqa: E402
from pathcert.sdp import export_sdpa  # noqa: E402
from pathcert.sos import build_disconnect  # noqa: E402


def main():
    sdp, _ = build_disconnect(examples.load("univariate_gap"), 2)
    (HERE / "univariate_gap_disconnect_d2.dat-s").write_text(export_sdpa(sdp))

    sdp, _ = build_disconnect(examples.load("hyperelliptic_curve"), 1)
    rec = oracles.solve_sdpa_cvxopt(oracles.read_sdpa(export_sdpa(sdp)))
    rec["source"] = "cvxopt.solvers.sdp on the SDPA export"
    (HERE / "recorded_hyperelliptic_d1.json").write_text(json.dumps({sdp.digest(): rec}))


if __name__ == "__main__":
    main()
