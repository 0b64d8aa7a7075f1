"""Synthetic paired corpora with known coupled profiles and tunable per-attribute noise."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .profiles import Corpus, PairLabel, Post, Profile, make_corpus
from .reference import Gazetteer, NameGenderTable, SentimentLexicon, data_path

START_TS = 1483228800          # 2017-01-01T00:00:00Z
WINDOW_S = 90 * 86400
KM_PER_DEG = 111.195

LAST_NAMES = """smith johnson williams brown jones garcia miller davis rodriguez martinez hernandez lopez
gonzalez wilson anderson thomas taylor moore jackson martin lee perez thompson white harris sanchez clark
ramirez lewis robinson walker young allen king wright scott torres nguyen hill flores green adams nelson
baker hall rivera campbell mitchell carter roberts mueller schmidt schneider fischer weber meyer wagner
becker schulz hoffmann koch richter klein wolf neumann schwarz zimmermann braun krueger hofmann hartmann
lange schmitt werner krause meier lehmann kaya demir yilmaz sahin celik rossi russo ferrari esposito bianchi
romano colombo ricci marino greco dubois moreau laurent simon michel lefebvre leroy roux""".split()

ORGS = ["Acme Labs", "Blue River Capital", "Northwind Traders", "Globex", "Initech", "Umbrella Health",
        "Stark Industries", "Wayne Enterprises", "Hooli", "Pied Piper", "Vandelay Industries", "Soylent Foods",
        "Cyberdyne Systems", "Tyrell Corporation", "Wonka Industries", "Oscorp", "Massive Dynamic",
        "Aperture Science", "Black Mesa", "Gringotts Bank", "Monarch Solutions", "Dunder Mifflin",
        "Sterling Cooper", "Bluth Company", "Prestige Worldwide", "Nakatomi Trading", "Virtucon",
        "Octan Energy", "Tessier Ashpool", "Weyland Yutani"]
SCHOOLS = ["Columbia University", "Stanford", "Oxford", "Cambridge", "Harvard", "Yale", "Princeton",
           "Sorbonne", "Bogazici University", "Humboldt University", "Bocconi", "Delft", "Caltech",
           "Berkeley", "Cornell", "Imperial College", "Bilkent University", "Heidelberg University"]
TEAMS = ["Werder Bremen", "Red Sox", "Real Madrid", "Bayern Munich", "Arsenal", "Galatasaray",
         "Chicago Bulls", "Green Bay Packers", "Juventus", "Boca Juniors", "Ajax", "Celtic", "Lakers",
         "Yankees", "Fenerbahce", "Liverpool", "Hamburger SV", "Olympique Lyon"]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August", "September", "October",
          "November", "December"]
ROLES = ["Engineer", "Designer", "Teacher", "Nurse", "Writer", "Analyst", "Student", "Chef", "Lawyer",
         "Photographer", "Researcher", "Consultant"]
TEMPLATES = [
    "{role} at {org} since {date}. Big fan of {team}, living in {city}.",
    "{role} based in {city}. Studied at {school}, now with {org}.",
    "Proud alum of {school}. Working for {org} and cheering for {team}.",
    "Living in {city} since {date}. Alumni of {school}, supporter of {team}.",
]
FILLERS = ["the", "and", "so", "with", "today", "at", "my", "this", "just", "really"]

MISSING_KEYS = ("location", "gender", "photo", "freetext", "posts", "display_name")


@dataclass(frozen=True)
class GeneratorConfig:
    n_coupled: int = 500
    n_uncoupled_per_side: int = 500
    seed: int = 0
    name_edit_rate: float = 0.12
    location_jitter_km: float = 150.0
    gender_flip_rate: float = 0.05
    photo_noise_sigma: float = 0.12
    freetext_swap_rate: float = 0.4
    activity_jitter_s: float = 1800.0
    topic_drift: float = 0.3
    sentiment_drift: float = 0.2
    independent_post_rate: float = 0.3
    missing_rate: dict = field(default_factory=lambda: {
        "location": 0.3, "gender": 0.5, "photo": 0.25, "freetext": 0.35, "posts": 0.1, "display_name": 0.1})
    posts_per_profile: int = 20
    embedding_dim: int = 16
    n_alternate_photos: int = 3
    alternate_photo_sigma: float = 0.35
    words_per_post: int = 6

    def __post_init__(self):
        if self.n_coupled < 0 or self.n_uncoupled_per_side < 0:
            raise ValueError("profile counts must be nonnegative")
        for name in ("name_edit_rate", "gender_flip_rate", "freetext_swap_rate", "topic_drift",
                     "sentiment_drift", "independent_post_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("location_jitter_km", "photo_noise_sigma", "activity_jitter_s", "alternate_photo_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for key, rate in self.missing_rate.items():
            if key not in MISSING_KEYS:
                raise ValueError(f"unknown missing-rate key {key!r}")
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"missing rate for {key} must lie in [0, 1]")
        if self.posts_per_profile < 0 or self.embedding_dim < 1:
            raise ValueError("posts_per_profile must be >= 0 and embedding_dim >= 1")

    def missing(self, key: str) -> float:
        return float(self.missing_rate.get(key, 0.0))

    @classmethod
    def zero_noise(cls, **overrides) -> "GeneratorConfig":
        base = dict(name_edit_rate=0.0, location_jitter_km=0.0, gender_flip_rate=0.0, photo_noise_sigma=0.0,
                    freetext_swap_rate=0.0, activity_jitter_s=0.0, topic_drift=0.0, sentiment_drift=0.0,
                    independent_post_rate=0.0, missing_rate={})
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown generator settings {sorted(unknown)}")
        return cls(**d)


def parse_config_text(text: str) -> GeneratorConfig:
    """Read ``key=value`` lines; ``missing.<attr>=rate`` sets one missing rate."""
    defaults = GeneratorConfig()
    kwargs: dict = {}
    missing = dict(defaults.missing_rate)
    types = {f.name: type(getattr(defaults, f.name)) for f in fields(GeneratorConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("missing."):
            missing[key[len("missing."):]] = float(value)
        elif key in types and key != "missing_rate":
            kwargs[key] = types[key](float(value)) if types[key] is int else types[key](value)
        else:
            raise ValueError(f"line {lineno}: unknown setting {key!r}")
    return GeneratorConfig(missing_rate=missing, **kwargs)


def load_vocab_spec(path=None) -> dict[str, list[str]]:
    with open(path or data_path("topics.json"), encoding="utf-8") as fh:
        spec = json.load(fh)
    if not spec or not all(isinstance(v, list) and v for v in spec.values()):
        raise ValueError("vocab spec must map topic names to nonempty word lists")
    return spec


@dataclass
class _Persona:
    gender: str
    first: str
    last: str
    handle: str
    city: str
    lat: float
    lon: float
    face: np.ndarray
    bio_template: str
    bio_slots: dict
    mixture: np.ndarray
    positivity: float
    events: list          # (timestamp, topic, positive)
    words: list = field(default_factory=list)


class _World:
    """Shared pools the generator samples from."""

    def __init__(self, gaz: Gazetteer, names: NameGenderTable, lexicon: SentimentLexicon, vocab_spec: dict):
        self.cities = sorted(p for p in gaz.entries if "," in p)
        if not self.cities:
            raise ValueError("gazetteer needs at least one 'city, country' entry")
        self.city_coords = np.array([gaz.entries[c] for c in self.cities])
        self.male = sorted(n for n, (m, f) in names.rows.items() if m > f)
        self.female = sorted(n for n, (m, f) in names.rows.items() if f > m)
        if not self.male or not self.female:
            raise ValueError("name table needs clearly male and clearly female names")
        self.positive = sorted(lexicon.positive_terms)
        self.negative = sorted(lexicon.negative_terms)
        self.positive_set, self.negative_set = set(self.positive), set(self.negative)
        self.topics = [list(vocab_spec[k]) for k in sorted(vocab_spec)]

    def nearest_city(self, lat: float, lon: float) -> int:
        la1, lo1 = np.radians(lat), np.radians(lon)
        la2, lo2 = np.radians(self.city_coords[:, 0]), np.radians(self.city_coords[:, 1])
        h = np.sin((la2 - la1) / 2) ** 2 + np.cos(la1) * np.cos(la2) * np.sin((lo2 - lo1) / 2) ** 2
        return int(np.argmin(h))


def _pick(pool, rng):
    return pool[int(rng.integers(len(pool)))]


def _draw(cdf: np.ndarray, rng) -> int:
    """Index drawn from a discrete distribution given its cumulative sums."""
    return min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cdf.shape[0] - 1)


def _title(city_key: str) -> str:
    return ", ".join(" ".join(w.capitalize() for w in part.split()) for part in city_key.split(", "))


def _persona(world: _World, cfg: GeneratorConfig, rng: np.random.Generator) -> _Persona:
    gender = "male" if rng.random() < 0.5 else "female"
    first = _pick(world.male if gender == "male" else world.female, rng)
    last = _pick(LAST_NAMES, rng)
    style = rng.integers(4)
    digits = int(rng.integers(10, 100))
    handle = [f"{first}{last}", f"{first}_{last}", f"{first[0]}{last}{digits}", f"{first}.{last}{digits}"][style]
    ci = int(rng.integers(len(world.cities)))
    lat, lon = world.city_coords[ci]
    face = rng.normal(size=cfg.embedding_dim)
    face /= np.linalg.norm(face)
    slots = {
        "role": _pick(ROLES, rng), "org": _pick(ORGS, rng), "school": _pick(SCHOOLS, rng),
        "team": _pick(TEAMS, rng), "date": f"{_pick(MONTHS, rng)} {int(rng.integers(2005, 2017))}",
        "city": _title(world.cities[ci]).split(",")[0],
    }
    mixture = rng.dirichlet(np.full(len(world.topics), 0.2))
    positivity = float(rng.beta(2, 2))
    cdf = np.cumsum(mixture)
    events = []
    for _ in range(cfg.posts_per_profile):
        events.append((START_TS + int(rng.integers(WINDOW_S)), _draw(cdf, rng), bool(rng.random() < positivity)))
    events.sort()
    return _Persona(gender, first, last, handle, world.cities[ci], float(lat), float(lon), face,
                    _pick(TEMPLATES, rng), slots, mixture, positivity, events)


def _edit(text: str, rate: float, rng: np.random.Generator) -> str:
    if rate <= 0:
        return text
    out = []
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    for ch in text:
        if rng.random() < rate:
            op = rng.integers(3)
            if op == 0:
                out.append(alphabet[rng.integers(26)])
            elif op == 2:
                out.append(ch)
                out.append(alphabet[rng.integers(26)])
        else:
            out.append(ch)
    return "".join(out)


def _post_text(world: _World, cfg: GeneratorConfig, topic: int, positive: bool, rng) -> list[str]:
    pool = world.topics[topic]
    words = [pool[i] for i in rng.integers(len(pool), size=cfg.words_per_post)]
    mood = world.positive if positive else world.negative
    words.insert(int(rng.integers(len(words) + 1)), _pick(mood, rng))
    words.insert(int(rng.integers(len(words) + 1)), _pick(FILLERS, rng))
    return words


def _drift_text(world: _World, cfg: GeneratorConfig, words: list[str], rng) -> str:
    out = []
    pos, neg = world.positive_set, world.negative_set
    flip = rng.random() < cfg.sentiment_drift
    for w in words:
        if w in pos or w in neg:
            if flip:
                w = _pick(world.negative if w in pos else world.positive, rng)
        elif w not in FILLERS and rng.random() < cfg.topic_drift:
            w = _pick(_pick(world.topics, rng), rng)
        out.append(w)
    return " ".join(out)


def _bio(persona: _Persona, swap: float, rng) -> str:
    slots = dict(persona.bio_slots)
    if swap > 0:
        pools = {"org": ORGS, "school": SCHOOLS, "team": TEAMS, "role": ROLES}
        for key, pool in pools.items():
            if rng.random() < swap:
                slots[key] = _pick(pool, rng)
        if rng.random() < swap:
            slots["date"] = f"{_pick(MONTHS, rng)} {int(rng.integers(2005, 2017))}"
    return persona.bio_template.format(**slots)


def _embed(face: np.ndarray, sigma: float, rng) -> tuple[float, ...]:
    if sigma <= 0:
        return tuple(float(x) for x in face)
    v = face + rng.normal(scale=sigma, size=face.shape[0])
    return tuple(float(x) for x in v / np.linalg.norm(v))


def _displace(world: _World, persona: _Persona, km: float, rng) -> str:
    if km <= 0:
        return persona.city
    dist = abs(rng.normal(scale=km))
    bearing = rng.uniform(0, 2 * math.pi)
    lat = persona.lat + dist * math.cos(bearing) / KM_PER_DEG
    lat = max(-89.9, min(89.9, lat))
    lon = persona.lon + dist * math.sin(bearing) / (KM_PER_DEG * max(math.cos(math.radians(lat)), 0.05))
    lon = (lon + 180.0) % 360.0 - 180.0
    return world.cities[world.nearest_city(lat, lon)]


def _project(world: _World, cfg: GeneratorConfig, persona: _Persona, side: str, pid: str,
             network: str, rng, noisy: bool) -> Profile:
    """One network's view of a persona; the target side carries the noise."""
    edit = cfg.name_edit_rate if noisy else 0.0
    display = f"{persona.first.capitalize()} {persona.last.capitalize()}"
    if side == "aux":
        names = [("screen_name", _edit(persona.handle, edit, rng)), ("given_name", persona.first.capitalize())]
    else:
        names = [("username", _edit(persona.handle, edit, rng))]
    if rng.random() >= cfg.missing("display_name"):
        names.append(("display_name", _edit(display, edit, rng)))

    location = None
    if rng.random() >= cfg.missing("location"):
        location = _title(_displace(world, persona, cfg.location_jitter_km if noisy else 0.0, rng))

    gender = None
    if rng.random() >= cfg.missing("gender"):
        gender = persona.gender
        if noisy and rng.random() < cfg.gender_flip_rate:
            gender = "female" if gender == "male" else "male"

    photo = None
    alternates = ()
    if rng.random() >= cfg.missing("photo"):
        photo = _embed(persona.face, cfg.photo_noise_sigma if noisy else 0.0, rng)
        if side == "target":
            alternates = tuple(_embed(persona.face, cfg.alternate_photo_sigma, rng)
                               for _ in range(cfg.n_alternate_photos))

    bio = None
    if rng.random() >= cfg.missing("freetext"):
        bio = _bio(persona, cfg.freetext_swap_rate if noisy else 0.0, rng)

    posts = []
    if rng.random() >= cfg.missing("posts"):
        for (ts, topic, positive), words in zip(persona.events, persona.words):
            if noisy and rng.random() < cfg.independent_post_rate:
                ts = START_TS + int(rng.integers(WINDOW_S))
                topic = _draw(np.cumsum(persona.mixture), rng)
                text = " ".join(_post_text(world, cfg, topic, rng.random() < persona.positivity, rng))
            elif noisy:
                ts = max(0, ts + int(round(rng.normal(scale=cfg.activity_jitter_s)))) \
                    if cfg.activity_jitter_s > 0 else ts
                text = _drift_text(world, cfg, words, rng)
            else:
                text = " ".join(words)
            posts.append(Post(ts, text))
        posts.sort(key=lambda p: p.timestamp)

    return Profile(pid, network, tuple(names), location, gender, photo, bio, tuple(posts), alternates)


def generate(config: GeneratorConfig, gaz: Gazetteer, lexicon: SentimentLexicon, vocab_spec: dict | None = None,
             names: NameGenderTable | None = None) -> tuple[Corpus, Corpus, list[PairLabel]]:
    """Aux and target corpora plus labels; coupled labels first, then uncoupled."""
    if names is None:
        from .reference import load_name_table
        names = load_name_table(data_path("names.csv"))
    world = _World(gaz, names, lexicon, vocab_spec or load_vocab_spec())
    rng = np.random.default_rng(config.seed)
    n_c, n_u = config.n_coupled, config.n_uncoupled_per_side

    personas = [_persona(world, config, rng) for _ in range(n_c + 2 * n_u)]
    for p in personas:
        p.words = [_post_text(world, config, topic, positive, rng) for _, topic, positive in p.events]

    aux_order = rng.permutation(n_c + n_u)
    tgt_order = rng.permutation(n_c + n_u)
    aux_ids = [f"a{int(k):05d}" for k in range(n_c + n_u)]
    tgt_ids = [f"t{int(k):05d}" for k in range(n_c + n_u)]
    # personas 0..n_c-1 are coupled, then n_u aux-only and n_u target-only ones
    aux_persona = [0] * (n_c + n_u)
    tgt_persona = [0] * (n_c + n_u)
    for slot, k in enumerate(aux_order):
        aux_persona[k] = slot
    for slot, k in enumerate(tgt_order):
        tgt_persona[k] = slot if slot < n_c else slot + n_u

    aux_profiles = [_project(world, config, personas[aux_persona[k]], "aux", aux_ids[k], "aux", rng, False)
                    for k in range(n_c + n_u)]
    tgt_profiles = [_project(world, config, personas[tgt_persona[k]], "target", tgt_ids[k], "target", rng, True)
                    for k in range(n_c + n_u)]

    aux_slot = {aux_persona[k]: k for k in range(n_c + n_u)}
    tgt_slot = {tgt_persona[k]: k for k in range(n_c + n_u)}
    labels = [PairLabel(aux_ids[aux_slot[i]], tgt_ids[tgt_slot[i]], True) for i in range(n_c)]
    labels += [PairLabel(aux_ids[aux_slot[n_c + i]], tgt_ids[tgt_slot[n_c + n_u + i]], False) for i in range(n_u)]
    return make_corpus("aux", aux_profiles), make_corpus("target", tgt_profiles), labels


def with_noise(config: GeneratorConfig, **changes) -> GeneratorConfig:
    return replace(config, **changes)
