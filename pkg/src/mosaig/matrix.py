"""Demographic prompt matrix: canonical vocabulary, enumeration, simple captions.

The vocabulary (3 age groups x 2 genders x 5 countries x 25 landmarks x 5
languages) ships as a versioned data file; one run enumerates the full cross
product per caption language.  Everything here is a pure function of that
seed data.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import ConfigError


class AgeGroup(Enum):
    CHILD = "Child"
    ADULT = "Adult"
    ELDER = "Elder"

    @property
    def order(self) -> int:
        return _AGE_ORDER[self]

    def __lt__(self, other: "AgeGroup") -> bool:
        return self.order < other.order


_AGE_ORDER = {AgeGroup.CHILD: 0, AgeGroup.ADULT: 1, AgeGroup.ELDER: 2}


class Gender(Enum):
    FEMALE = "Female"
    MALE = "Male"


# Age-gendered noun for the simple-caption template.  The child nouns are
# fixed by the worked caption examples; the adult/elder nouns are a
# documented choice (see README).
PERSON_NOUNS = {
    (AgeGroup.CHILD, Gender.FEMALE): "girl",
    (AgeGroup.CHILD, Gender.MALE): "boy",
    (AgeGroup.ADULT, Gender.FEMALE): "woman",
    (AgeGroup.ADULT, Gender.MALE): "man",
    (AgeGroup.ELDER, Gender.FEMALE): "elderly woman",
    (AgeGroup.ELDER, Gender.MALE): "elderly man",
}


@dataclass(frozen=True)
class Language:
    code: str
    display_name: str

    def __str__(self) -> str:
        return self.display_name


@dataclass(frozen=True)
class Country:
    name: str
    demonym: str
    language_codes: tuple[str, ...]


@dataclass(frozen=True)
class Landmark:
    name: str
    country: Country


@dataclass(frozen=True)
class PromptSpec:
    """One cell of the demographic matrix plus its rendered caption(s)."""

    id: str
    age: AgeGroup
    gender: Gender
    person_country: Country
    landmark: Landmark
    language: Language
    simple_caption: str
    agentic_caption: str | None = None

    @property
    def person_noun(self) -> str:
        return PERSON_NOUNS[(self.age, self.gender)]

    def with_agentic_caption(self, caption: str) -> "PromptSpec":
        return replace(self, agentic_caption=caption)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "age": self.age.value,
            "gender": self.gender.value,
            "person_country": self.person_country.name,
            "landmark": self.landmark.name,
            "landmark_country": self.landmark.country.name,
            "language": self.language.code,
            "simple_caption": self.simple_caption,
            "agentic_caption": self.agentic_caption,
        }


class Vocabulary:
    """Seed demographics loaded from the versioned data file."""

    def __init__(self, raw: dict):
        self.version = raw["version"]
        self.languages = {
            code: Language(code=code, display_name=name)
            for code, name in raw["languages"].items()
        }
        countries: dict[str, Country] = {}
        for rec in raw["landmarks"]:
            name = rec["country"]
            if name not in countries:
                countries[name] = Country(
                    name=name,
                    demonym=rec["demonym"],
                    language_codes=tuple(rec["language_codes"]),
                )
        self.countries = dict(sorted(countries.items()))
        self.landmarks = [
            Landmark(name=rec["name"], country=self.countries[rec["country"]])
            for rec in raw["landmarks"]
        ]
        self._check()

    def _check(self) -> None:
        names = [lm.name for lm in self.landmarks]
        if len(set(names)) != len(names):
            raise ConfigError("landmark names must be unique")
        for country in self.countries.values():
            if not country.demonym:
                raise ConfigError(f"country {country.name} has an empty demonym")
            owned = [lm for lm in self.landmarks if lm.country is country]
            if len(owned) != 5:
                raise ConfigError(f"country {country.name} must own exactly 5 landmarks")

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Vocabulary":
        if path is not None:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        else:
            raw = json.loads(
                resources.files("mosaig.data").joinpath("vocabulary.json").read_text("utf-8")
            )
        return cls(raw)

    def language(self, key: str) -> Language:
        """Resolve a language by code or display name."""
        if key in self.languages:
            return self.languages[key]
        for lang in self.languages.values():
            if lang.display_name.lower() == key.lower():
                return lang
        raise ConfigError(f"unknown language: {key!r}")

    def english(self) -> Language:
        return self.languages["en"]

    def landmark(self, name: str) -> Landmark:
        for lm in self.landmarks:
            if lm.name == name:
                return lm
        raise ConfigError(f"unknown landmark: {name!r}")

    def country(self, name: str) -> Country:
        try:
            return self.countries[name]
        except KeyError:
            raise ConfigError(f"unknown country: {name!r}") from None


def spec_id(age: AgeGroup, gender: Gender, person_country: Country,
            landmark: Landmark, language: Language) -> str:
    """Stable 16-hex-digit id; a pure function of the demographic tuple."""
    key = "|".join(
        [age.value, gender.value, person_country.name, landmark.name, language.code]
    )
    return hashlib.blake2b(key.encode("utf-8"), digest_size=8).hexdigest()


SIMPLE_CAPTION_TEMPLATE = (
    "A {demonym} {noun} wearing traditional attire, standing in front of the {landmark}."
)


def render_simple_caption(age: AgeGroup, gender: Gender, person_country: Country,
                          landmark: Landmark) -> str:
    """Fill the fixed English template; deterministic and total over the matrix."""
    return SIMPLE_CAPTION_TEMPLATE.format(
        demonym=person_country.demonym,
        noun=PERSON_NOUNS[(age, gender)],
        landmark=landmark.name,
    )


def make_spec(age: AgeGroup, gender: Gender, person_country: Country,
              landmark: Landmark, language: Language) -> PromptSpec:
    return PromptSpec(
        id=spec_id(age, gender, person_country, landmark, language),
        age=age,
        gender=gender,
        person_country=person_country,
        landmark=landmark,
        language=language,
        simple_caption=render_simple_caption(age, gender, person_country, landmark),
    )


def enumerate_matrix(vocab: Vocabulary, languages: list[Language],
                     cross_cultural_only: bool = False) -> list[PromptSpec]:
    """Enumerate the full demographic cross product for the given languages.

    Ordering is deterministic: lexicographic over (language, person country,
    landmark country, landmark, age, gender), with ages in Child < Adult <
    Elder order.  750 specs per language; 600 with cross_cultural_only, which
    drops person-country == landmark-country cells.
    """
    if not languages:
        raise ConfigError("at least one caption language is required")
    for lang in languages:
        if vocab.languages.get(lang.code) != lang:
            raise ConfigError(f"unknown language: {lang.code!r}")
    ordered_languages = sorted({lang.code: lang for lang in languages}.values(),
                               key=lambda lang: lang.code)

    landmarks = sorted(vocab.landmarks, key=lambda lm: (lm.country.name, lm.name))
    specs = []
    for lang in ordered_languages:
        for country in vocab.countries.values():
            for lm in landmarks:
                if cross_cultural_only and lm.country.name == country.name:
                    continue
                for age in AgeGroup:
                    for gender in Gender:
                        specs.append(make_spec(age, gender, country, lm, lang))
    return specs


def spec_to_jsonl_line(spec: PromptSpec) -> str:
    return json.dumps(spec.to_json(), sort_keys=True, ensure_ascii=False)


def spec_from_json(rec: dict, vocab: Vocabulary) -> PromptSpec:
    spec = make_spec(
        age=AgeGroup(rec["age"]),
        gender=Gender(rec["gender"]),
        person_country=vocab.country(rec["person_country"]),
        landmark=vocab.landmark(rec["landmark"]),
        language=vocab.language(rec["language"]),
    )
    if rec.get("agentic_caption"):
        spec = spec.with_agentic_caption(rec["agentic_caption"])
    return spec
