"""Profile, corpus and label types plus JSON-lines / CSV ingestion."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)

NAME_KINDS = ("screen_name", "display_name", "given_name", "last_name", "username")
GENDERS = ("male", "female")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class Post:
    timestamp: int
    text: str

    def __post_init__(self):
        if self.timestamp < 0:
            raise DataError(f"negative timestamp {self.timestamp}")


@dataclass(frozen=True)
class Profile:
    profile_id: str
    network_id: str = ""
    name_fields: tuple[tuple[str, str], ...] = ()
    location_text: str | None = None
    declared_gender: str | None = None
    photo_embedding: tuple[float, ...] | None = None
    freetext: str | None = None
    posts: tuple[Post, ...] = ()
    # other photos of the same person, used only by the countermeasure levels
    alternate_photos: tuple[tuple[float, ...], ...] = ()

    def name(self, kind: str) -> str | None:
        for k, text in self.name_fields:
            if k == kind:
                return text
        return None

    @property
    def timestamps(self) -> list[int]:
        return [p.timestamp for p in self.posts]


@dataclass(frozen=True)
class Corpus:
    network_id: str
    profiles: tuple[Profile, ...] = ()
    embedding_dim: int = 0
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, p in enumerate(self.profiles):
            if p.profile_id in index:
                raise DataError(f"duplicate profile_id {p.profile_id!r}")
            index[p.profile_id] = i
        object.__setattr__(self, "_index", index)

    def __len__(self):
        return len(self.profiles)

    def __iter__(self):
        return iter(self.profiles)

    def __contains__(self, profile_id):
        return profile_id in self._index

    def get(self, profile_id: str) -> Profile:
        try:
            return self.profiles[self._index[profile_id]]
        except KeyError:
            raise DataError(f"unknown profile id {profile_id!r} in corpus {self.network_id!r}") from None

    def position(self, profile_id: str) -> int:
        return self._index[profile_id]

    @property
    def ids(self) -> list[str]:
        return [p.profile_id for p in self.profiles]

    def subset(self, ids: Iterable[str]) -> "Corpus":
        return Corpus(self.network_id, tuple(self.get(i) for i in ids), self.embedding_dim)

    def replace_profiles(self, profiles: Iterable[Profile]) -> "Corpus":
        return Corpus(self.network_id, tuple(profiles), self.embedding_dim)


@dataclass(frozen=True)
class PairLabel:
    aux_id: str
    target_id: str
    coupled: bool


def _embedding(value, where) -> tuple[float, ...]:
    if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
        raise DataError(f"{where}: embedding must be a list of numbers")
    return tuple(float(v) for v in value)


def profile_from_dict(rec: dict, network_id: str, where: str = "record") -> Profile:
    if not isinstance(rec, dict):
        raise DataError(f"{where}: expected a JSON object")
    pid = rec.get("profile_id")
    if not isinstance(pid, str) or not pid:
        raise DataError(f"{where}: profile_id must be a nonempty string")

    names = []
    for item in rec.get("name_fields") or []:
        if isinstance(item, dict):
            item = (item.get("kind"), item.get("text"))
        if len(item) != 2 or item[0] not in NAME_KINDS or not isinstance(item[1], str):
            raise DataError(f"{where}: bad name field {item!r}")
        names.append((item[0], item[1]))

    gender = rec.get("declared_gender")
    if gender is not None and gender not in GENDERS:
        raise DataError(f"{where}: declared_gender must be one of {GENDERS}")

    photo = rec.get("photo_embedding")
    if photo is not None:
        photo = _embedding(photo, where)
    alternates = tuple(_embedding(e, where) for e in rec.get("alternate_photos") or [])

    posts = []
    for p in rec.get("posts") or []:
        try:
            ts, text = p["timestamp"], p["text"]
        except (TypeError, KeyError):
            raise DataError(f"{where}: posts need timestamp and text") from None
        if isinstance(ts, bool) or not isinstance(ts, int) or not isinstance(text, str):
            raise DataError(f"{where}: bad post {p!r}")
        posts.append(Post(ts, text))
    posts.sort(key=lambda p: p.timestamp)

    for key in ("location_text", "freetext"):
        if rec.get(key) is not None and not isinstance(rec[key], str):
            raise DataError(f"{where}: {key} must be a string")

    return Profile(
        profile_id=pid,
        network_id=network_id,
        name_fields=tuple(names),
        location_text=rec.get("location_text"),
        declared_gender=gender,
        photo_embedding=photo,
        freetext=rec.get("freetext"),
        posts=tuple(posts),
        alternate_photos=alternates,
    )


def profile_to_dict(p: Profile) -> dict:
    rec = {"profile_id": p.profile_id}
    if p.name_fields:
        rec["name_fields"] = [list(nf) for nf in p.name_fields]
    if p.location_text is not None:
        rec["location_text"] = p.location_text
    if p.declared_gender is not None:
        rec["declared_gender"] = p.declared_gender
    if p.photo_embedding is not None:
        rec["photo_embedding"] = list(p.photo_embedding)
    if p.alternate_photos:
        rec["alternate_photos"] = [list(e) for e in p.alternate_photos]
    if p.freetext is not None:
        rec["freetext"] = p.freetext
    if p.posts:
        rec["posts"] = [{"timestamp": q.timestamp, "text": q.text} for q in p.posts]
    return rec


def make_corpus(network_id: str, profiles: Iterable[Profile]) -> Corpus:
    """Build a corpus, checking that every embedding shares one dimension."""
    profiles = tuple(profiles)
    dim = 0
    for p in profiles:
        for emb in ([p.photo_embedding] if p.photo_embedding is not None else []) + list(p.alternate_photos):
            if dim == 0:
                dim = len(emb)
            elif len(emb) != dim:
                raise DataError(
                    f"profile {p.profile_id!r}: embedding length {len(emb)} != corpus dimension {dim}")
    return Corpus(network_id, profiles, dim)


def load_corpus(path, network_id: str) -> Corpus:
    profiles = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            p = profile_from_dict(rec, network_id, where=f"{path}:{lineno}")
            if p.profile_id in seen:
                raise DataError(f"{path}:{lineno}: duplicate profile_id {p.profile_id!r}")
            seen.add(p.profile_id)
            profiles.append(p)
    try:
        return make_corpus(network_id, profiles)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in corpus.profiles:
            fh.write(json.dumps(profile_to_dict(p), ensure_ascii=False, sort_keys=True) + "\n")


_BOOLS = {"true": True, "false": False}


def load_labels(path, aux: Corpus, target: Corpus) -> list[PairLabel]:
    labels = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return labels
        if [h.strip() for h in header] != ["aux_id", "target_id", "coupled"]:
            raise DataError(f"{path}: header must be aux_id,target_id,coupled")
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns")
            aux_id, target_id, flag = (c.strip() for c in row)
            if aux_id not in aux:
                raise DataError(f"{path}:{lineno}: unknown aux id {aux_id!r}")
            if target_id not in target:
                raise DataError(f"{path}:{lineno}: unknown target id {target_id!r}")
            if flag.lower() not in _BOOLS:
                raise DataError(f"{path}:{lineno}: malformed boolean {flag!r}")
            labels.append(PairLabel(aux_id, target_id, _BOOLS[flag.lower()]))
    for pid in multiply_coupled(labels):
        log.warning("%s: profile %r appears in more than one coupled pair", path, pid)
    return labels


def multiply_coupled(labels: Iterable[PairLabel]) -> list[str]:
    """Ids that have more than one coupled partner."""
    seen_a, seen_t, bad = set(), set(), []
    for lab in labels:
        if not lab.coupled:
            continue
        for pid, seen in ((lab.aux_id, seen_a), (lab.target_id, seen_t)):
            if pid in seen:
                bad.append(pid)
            seen.add(pid)
    return bad


def save_labels(labels: Iterable[PairLabel], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["aux_id", "target_id", "coupled"])
        for lab in labels:
            w.writerow([lab.aux_id, lab.target_id, "true" if lab.coupled else "false"])
