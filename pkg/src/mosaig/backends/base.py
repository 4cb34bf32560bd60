"""Pluggable external-model interfaces.

Every model the pipeline touches (chat, image generation, translation,
scoring) sits behind one of these interfaces so the whole pipeline runs
offline under deterministic stubs; real deployments plug in through the
remote HTTP clients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from ..matrix import Language


@dataclass(frozen=True)
class GenParams:
    guidance_scale: float
    inference_steps: int
    seed: int
    width: int = 768
    height: int = 768

    def __post_init__(self):
        if self.inference_steps < 1:
            raise ValueError("inference_steps must be >= 1")

    def to_json(self) -> dict:
        return {
            "guidance_scale": self.guidance_scale,
            "inference_steps": self.inference_steps,
            "seed": self.seed,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "GenParams":
        return cls(
            guidance_scale=rec["guidance_scale"],
            inference_steps=rec["inference_steps"],
            seed=rec["seed"],
            width=rec["width"],
            height=rec["height"],
        )


# Generator presets match the published deployment settings.
FLUX_PRESET = GenParams(guidance_scale=4, inference_steps=30, seed=11)
ALT_PRESET = GenParams(guidance_scale=11, inference_steps=110, seed=11000)

PRESETS = {"flux": FLUX_PRESET, "alt": ALT_PRESET}

# The flux generator is an English-prompt model; the pipeline refuses to
# send it non-English captions rather than silently degrading.
PRESET_LANGUAGE_CODES = {"flux": frozenset({"en"}), "alt": None}  # None = all


@runtime_checkable
class ChatModel(Protocol):
    """Stateless chat completion; messages are [{"role": ..., "text": ...}]."""

    fingerprint: str

    def send(self, messages: list[dict]) -> str: ...


class ImageGenerator(Protocol):
    fingerprint: str
    supported_languages: frozenset[str] | None  # language codes; None = all

    def generate(self, caption: str, params: GenParams) -> bytes:
        """Return PNG bytes with exactly params.width x params.height pixels."""
        ...


class Translator(Protocol):
    fingerprint: str

    def translate(self, text: str, source: Language, target: Language) -> str: ...


class ScoreBackend(Protocol):
    fingerprint: str

    def embed_text(self, text: str) -> np.ndarray: ...

    def embed_image(self, image: bytes) -> np.ndarray: ...

    def classify(self, image: bytes) -> np.ndarray: ...

    def aesthetic(self, image: bytes) -> float: ...


def generator_supports(generator: ImageGenerator, language: Language) -> bool:
    supported = generator.supported_languages
    return supported is None or language.code in supported
