"""Praat TextGrid (short text format) for single-vowel annotations."""

from __future__ import annotations

import re


def format_textgrid(xmax: float, onset_s: float, offset_s: float,
                    tier: str = "vowel", label: str = "vowel") -> str:
    """One interval tier covering [0, xmax] with a labelled vowel interval.

    Praat interval tiers must tile the whole span, so unlabelled intervals
    fill the gaps before and after the vowel.
    """
    if not 0 <= onset_s < offset_s <= xmax:
        raise ValueError("need 0 <= onset < offset <= xmax")
    intervals = []
    if onset_s > 0:
        intervals.append((0.0, onset_s, ""))
    intervals.append((onset_s, offset_s, label))
    if offset_s < xmax:
        intervals.append((offset_s, xmax, ""))
    lines = ['File type = "ooTextFile"', 'Object class = "TextGrid"', "",
             "0", _num(xmax), "<exists>", "1", '"IntervalTier"', f'"{tier}"',
             "0", _num(xmax), str(len(intervals))]
    for a, b, text in intervals:
        lines += [_num(a), _num(b), '"' + text.replace('"', '""') + '"']
    return "\n".join(lines) + "\n"


def _num(x: float) -> str:
    return repr(float(x))


_TOKEN = re.compile(r'"((?:[^"]|"")*)"|(?<![\w.])([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)')


def parse_textgrid(text: str) -> dict:
    """Parse the short text format into ``{tier_name: [(xmin, xmax, text), ...]}``."""
    tokens = []
    for m in _TOKEN.finditer(text):
        if m.group(1) is not None:
            tokens.append(m.group(1).replace('""', '"'))
        elif m.group(2) is not None:
            tokens.append(float(m.group(2)))
    if tokens[:2] != ["ooTextFile", "TextGrid"]:
        raise ValueError("not a TextGrid")
    pos = 4  # skip file xmin, xmax
    n_tiers = int(tokens[pos])
    pos += 1
    tiers = {}
    for _ in range(n_tiers):
        cls, name = tokens[pos], tokens[pos + 1]
        n = int(tokens[pos + 4])
        pos += 5
        if cls != "IntervalTier":
            raise ValueError(f"unsupported tier class {cls}")
        items = []
        for _ in range(n):
            items.append((tokens[pos], tokens[pos + 1], tokens[pos + 2]))
            pos += 3
        tiers[name] = items
    return tiers
