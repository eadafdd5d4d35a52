"""Fenced-output parsing for model responses."""
from __future__ import annotations

import re

from ..errors import NoFence


def extract_fenced(text: str, kind: str) -> str:
    """Content of the first ``` fence of the requested kind (sql or json).

    A fence tagged with the kind wins; an untagged fence is accepted as a
    fallback so terse model outputs still parse.
    """
    if kind not in ("sql", "json"):
        raise ValueError(f"unsupported fence kind {kind!r}")
    tagged = re.search(
        rf"```{kind}\s*\n?(.*?)```", text, re.DOTALL | re.IGNORECASE
    )
    if tagged:
        return tagged.group(1).strip()
    bare = re.search(r"```\s*\n(.*?)```", text, re.DOTALL)
    if bare:
        return bare.group(1).strip()
    raise NoFence(f"no ```{kind}``` fence in response")
