"""Regenerate the shipped fixture corpus from the library's own oracles.

Run from the repository root: ``python3 tools/make_fixtures.py``.
"""

from __future__ import annotations

import json
from pathlib import Path

from steiner.amalgam import random_merge_config
from steiner.core import discrete, enumerate_sts, validate, write_system

OUT = Path(__file__).resolve().parents[1] / "src" / "steiner" / "fixtures"


def _dump(obj: dict, name: str) -> None:
    (OUT / name).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    # First systems of the exhaustive enumerators.
    write_system(next(enumerate_sts([str(i) for i in range(1, 8)])), OUT / "fano.json")
    write_system(next(enumerate_sts([str(i) for i in range(1, 10)])), OUT / "aff9.json")
    write_system(validate(["a", "b", "c"], []), OUT / "triangle.json")
    write_system(validate(["a", "b", "c"], [["a", "b", "c"]]), OUT / "one-block.json")

    # Malformed on purpose, so written raw.
    dup = {"points": ["a", "b", "c", "d"], "blocks": [["a", "b", "c"], ["a", "b", "d"]]}
    _dump(dup, "dup-pair.json")
    _dump(dup, "broken.json")
    _dump({"points": ["a", "b", "c"], "blocks": [["a", "b"]]}, "short-block.json")

    d8 = discrete([f"p{i}" for i in range(1, 9)]).to_json()
    d8["inner"] = []
    _dump(d8, "delta8.json")

    cfg = random_merge_config(0)
    _dump(
        {
            "base": cfg.universe.base.to_json(),
            "A0": [str(t) for t in cfg.A0],
            "B0": [str(t) for t in cfg.B0],
            "A1": [str(t) for t in cfg.A1],
            "B1": [str(t) for t in cfg.B1],
            "iso": {str(k): str(v) for k, v in sorted(cfg.iso.items(), key=lambda kv: kv[0].key)},
        },
        "merge-al25.json",
    )


if __name__ == "__main__":
    main()
