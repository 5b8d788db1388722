"""Helpers for locating and perturbing single entries of family files."""

import copy
import re


def entry_paths(doc: dict) -> list[tuple]:
    """JSON paths of every sequence entry in a kunen or fullsupport payload."""
    payload = doc["payload"]
    kind = doc["spec"]["kind"]
    if kind == "kunen":
        return [
            ("levels", a, b, c)
            for a, level in enumerate(payload["levels"])
            for b, vec in enumerate(level)
            for c in range(len(vec))
        ]
    if kind == "fullsupport":
        return [
            ("segments", s, "block", c, r)
            for s, seg in enumerate(payload["segments"])
            for c, col in enumerate(seg["block"])
            for r in range(len(col))
        ]
    raise ValueError(f"no entry layout for {kind}")


def perturbed(doc: dict, path: tuple, delta: int = 1) -> dict:
    """Copy of ``doc`` with the rational coefficient at ``path`` moved by ``delta``."""
    out = copy.deepcopy(doc)
    node = out["payload"]
    for key in path:
        node = node[key]
    node["num"] = str(int(node["num"]) + delta * int(node["den"]))
    return out


RESIDUAL = re.compile(r"^FAIL .* residual=(\S+)", re.M)


def residuals(text: str) -> list[str]:
    return RESIDUAL.findall(text)
