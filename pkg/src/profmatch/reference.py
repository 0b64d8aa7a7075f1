"""File-backed lookup providers: gazetteer, first-name gender table, sentiment
lexicon, and a rule-based entity extractor for profile freetext."""

from __future__ import annotations

import csv
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .profiles import DataError, Profile

# name fields tried, in order, when inferring gender from a name
GENDER_NAME_ORDER = ("given_name", "display_name", "screen_name", "username")


def normalize_place(text: str) -> str:
    return " ".join(text.lower().split())


@dataclass(frozen=True)
class Gazetteer:
    entries: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for place, (lat, lon) in self.entries.items():
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise DataError(f"gazetteer entry {place!r} out of range: {lat}, {lon}")

    def __len__(self):
        return len(self.entries)


def geocode(gaz: Gazetteer, place: str | None) -> tuple[float, float] | None:
    if not place:
        return None
    return gaz.entries.get(normalize_place(place))


def country_of(place: str) -> str | None:
    """Trailing comma-separated component, or None for a bare place."""
    if "," not in place:
        return None
    country = place.rsplit(",", 1)[1].strip()
    return country or None


@dataclass(frozen=True)
class NameGenderTable:
    rows: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        for name, (m, f) in self.rows.items():
            if m < 0 or f < 0 or m + f == 0:
                raise DataError(f"name table row {name!r} needs non-negative counts with a positive total")


def gender_distribution(tbl: NameGenderTable, name: str | None) -> float | None:
    """Probability that the first token of ``name`` belongs to a male."""
    if not name:
        return None
    tokens = name.lower().split()
    if not tokens:
        return None
    counts = tbl.rows.get(tokens[0])
    if counts is None:
        return None
    male, female = counts
    return male / (male + female)


def gender_source_name(profile: Profile) -> str | None:
    for kind in GENDER_NAME_ORDER:
        text = profile.name(kind)
        if text:
            return text
    return None


@dataclass(frozen=True)
class SentimentLexicon:
    positive_terms: frozenset[str] = frozenset()
    negative_terms: frozenset[str] = frozenset()

    def __post_init__(self):
        overlap = self.positive_terms & self.negative_terms
        if overlap:
            raise DataError(f"lexicon terms both positive and negative: {sorted(overlap)[:5]}")


_ALNUM = re.compile(r"[^\W_]+")


def sentiment_scores(lex: SentimentLexicon, text: str) -> tuple[float, float]:
    pos = neg = 0
    for tok in _ALNUM.findall(text.lower()):
        if tok in lex.positive_terms:
            pos += 1
        elif tok in lex.negative_terms:
            neg += 1
    if pos + neg == 0:
        return 0.5, 0.5
    p = pos / (pos + neg)
    return p, 1.0 - p


# --- entity extraction -------------------------------------------------------

_MONTH_NAMES = ("January", "February", "March", "April", "May", "June", "July", "August", "September",
                "October", "November", "December", "Jan", "Feb", "Mar", "Apr", "Jun", "Jul", "Aug", "Sep",
                "Sept", "Oct", "Nov", "Dec")
# capital initial required, rest of the name in any case
_MONTH = "(?:" + "|".join(f"{m[0]}(?i:{m[1:]})" for m in _MONTH_NAMES) + ")"
_ORD = r"(?:st|nd|rd|th)?"
_TOKEN_PATTERNS = [
    re.compile(r"\b\d{4}-\d{2}-\d{2}\b"),
    re.compile(r"\b\d{1,2}/\d{1,2}/\d{2,4}\b"),
    re.compile(rf"\b{_MONTH}\.?\s+\d{{1,2}}{_ORD}(?:,?\s+\d{{4}})?\b"),
    re.compile(rf"\b\d{{1,2}}{_ORD}\s+{_MONTH}(?:\s+\d{{4}})?\b"),
    re.compile(rf"\b{_MONTH}\s+\d{{4}}\b"),
    re.compile(r"\b\d{1,2}:\d{2}(?:\s?(?i:[ap]m)\b)?"),
    re.compile(r"[$€£¥]\s?\d+(?:[.,]\d+)*"),
    re.compile(r"\b\d+(?:\.\d+)?\s?%"),
]
_COMPACT = re.compile(r"^[$€£¥%\d\s.,]+$")
_WORD = re.compile(r"[^\W\d_][\w'&-]*")
_SENTENCE_END = re.compile(r"[.!?\n]")


def _mask_tokens(text: str) -> tuple[str, list[str]]:
    found = []
    chars = list(text)
    for pat in _TOKEN_PATTERNS:
        for m in pat.finditer("".join(chars)):
            tok = " ".join(m.group(0).lower().split())
            if _COMPACT.match(tok):
                tok = tok.replace(" ", "")
            found.append((m.start(), tok))
            for i in range(m.start(), m.end()):
                chars[i] = "\x00"
    found.sort()
    return "".join(chars), [tok for _, tok in found]


def extract_entities(text: str | None) -> Counter:
    """Entity-like tokens of ``text``, lowercased, with multiplicity.

    Dates, times, money and percentages are taken first; the remaining text
    contributes maximal runs of capitalized words. A capitalized word that
    opens a sentence only counts if it also appears capitalized mid-sentence.
    """
    out = Counter()
    if not text:
        return out
    masked, tokens = _mask_tokens(text)
    out.update(tokens)

    words = []  # (start, end, word, sentence_initial)
    prev_end = 0
    initial = True
    for m in _WORD.finditer(masked):
        gap = masked[prev_end:m.start()]
        if words and _SENTENCE_END.search(gap):
            initial = True
        elif words:
            initial = False
        words.append((m.start(), m.end(), m.group(0), initial))
        prev_end = m.end()

    mid_caps = {w.lower() for _, _, w, ini in words if not ini and w[0].isupper()}

    run: list[str] = []
    last_end = None
    for start, end, word, ini in words:
        is_cap = word[0].isupper() and (not ini or word.lower() in mid_caps)
        joined = last_end is not None and masked[last_end:start].strip(" ") == "" and "\n" not in masked[last_end:start]
        if is_cap and run and joined:
            run.append(word)
        else:
            if run:
                out[" ".join(run).lower()] += 1
            run = [word] if is_cap else []
        last_end = end
    if run:
        out[" ".join(run).lower()] += 1
    return out


# --- loaders -----------------------------------------------------------------

def load_gazetteer(path) -> Gazetteer:
    entries = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["place", "lat", "lon"]:
            raise DataError(f"{path}: header must be place,lat,lon")
        for lineno, row in enumerate(reader, 2):
            try:
                entries[normalize_place(row["place"])] = (float(row["lat"]), float(row["lon"]))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: bad gazetteer row") from None
    return Gazetteer(entries)


def load_name_table(path) -> NameGenderTable:
    rows = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["name", "male_count", "female_count"]:
            raise DataError(f"{path}: header must be name,male_count,female_count")
        for lineno, row in enumerate(reader, 2):
            try:
                rows[row["name"].strip().lower()] = (int(row["male_count"]), int(row["female_count"]))
            except (TypeError, ValueError):
                raise DataError(f"{path}:{lineno}: bad name row") from None
    return NameGenderTable(rows)


def _read_terms(path) -> frozenset[str]:
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip().lower() for line in fh if line.strip())


def load_lexicon(positive_path, negative_path) -> SentimentLexicon:
    return SentimentLexicon(_read_terms(positive_path), _read_terms(negative_path))


@dataclass(frozen=True)
class Providers:
    gazetteer: Gazetteer
    names: NameGenderTable
    lexicon: SentimentLexicon


def data_path(name: str) -> Path:
    return Path(str(resources.files("profmatch") / "data" / name))


def default_providers() -> Providers:
    return Providers(
        load_gazetteer(data_path("gazetteer.csv")),
        load_name_table(data_path("names.csv")),
        load_lexicon(data_path("positive.txt"), data_path("negative.txt")),
    )


def load_providers(gazetteer=None, names=None, lexicon=None) -> Providers:
    """Load providers, falling back to the bundled files for any left as None.

    ``lexicon`` is a directory holding positive.txt and negative.txt.
    """
    lex_dir = Path(lexicon) if lexicon else None
    return Providers(
        load_gazetteer(gazetteer or data_path("gazetteer.csv")),
        load_name_table(names or data_path("names.csv")),
        load_lexicon(lex_dir / "positive.txt" if lex_dir else data_path("positive.txt"),
                     lex_dir / "negative.txt" if lex_dir else data_path("negative.txt")),
    )
