"""Deterministic in-process backends.

The stubs make the full pipeline runnable and testable offline: every reply,
embedding, and pixel is a pure seeded function of its inputs, so repeated
runs are byte-identical.
"""

from __future__ import annotations

import hashlib
import io
import json
import re
from typing import Callable

import numpy as np
from PIL import Image

from ..matrix import Language
from .base import GenParams

Reply = str | Callable[[re.Match, str], str]


def _digest_seed(data: bytes, seed: int) -> int:
    h = hashlib.blake2b(data, digest_size=8, key=seed.to_bytes(8, "little"))
    return int.from_bytes(h.digest(), "little")


class StubChat:
    """Pattern-scripted chat backend.

    ``script`` maps regex patterns to replies; the first pattern found in the
    rendered conversation wins.  A reply may be a callable taking the regex
    match and the full prompt, which lets tests compose replies from prompt
    content or inject failures.
    """

    def __init__(self, script: dict[str, Reply] | None = None,
                 default_reply: str = "Understood."):
        self.script = dict(script or {})
        self.default_reply = default_reply
        key = json.dumps(sorted(self.script), sort_keys=True) + default_reply
        self.fingerprint = "stub-chat/v1#" + hashlib.blake2b(
            key.encode(), digest_size=6).hexdigest()

    def send(self, messages: list[dict]) -> str:
        prompt = "\n".join(m["text"] for m in messages)
        for pattern, reply in self.script.items():
            match = re.search(pattern, prompt, flags=re.DOTALL)
            if match:
                if callable(reply):
                    return reply(match, prompt)
                return reply
        return self.default_reply


def stub_chat(script: dict[str, Reply] | None = None,
              default_reply: str = "Understood.") -> StubChat:
    return StubChat(script, default_reply)


# --- protocol-aware script -------------------------------------------------
# These patterns anchor on fixed phrases of the shipped prompt pack, so the
# stub can fill persona values back into its replies and the final caption
# contains the demonym, person noun, and landmark name.

_RE_DEMONYM = r"traditional attire of a person of (.+?) culture"
_RE_PERSON = r"Describe a (.+?) posing for a photograph"
_RE_LANDMARK = r"Describe the (.+?), a historical landmark of (.+?), as it appears"


def _extract(prompt: str, pattern: str, group: int = 1) -> str:
    match = re.search(pattern, prompt)
    return match.group(group) if match else "subject"


def _initial_reply(match: re.Match, prompt: str) -> str:
    if re.search(_RE_DEMONYM, prompt):
        demonym = _extract(prompt, _RE_DEMONYM)
        return (f"A person of {demonym} culture wearing traditional {demonym} "
                f"attire with distinctive garments and colors.")
    if re.search(_RE_PERSON, prompt):
        noun = _extract(prompt, _RE_PERSON)
        return f"The person is a {noun} with a natural, relaxed posture."
    landmark = _extract(prompt, _RE_LANDMARK, 1)
    country = _extract(prompt, _RE_LANDMARK, 2)
    return (f"The {landmark} in {country} rises in the background with its "
            f"distinctive architecture.")


def _summary_reply(match: re.Match, prompt: str) -> str:
    parts = re.findall(r"^\d\. (.+)$", prompt, flags=re.MULTILINE)
    return " ".join(parts)


def protocol_script() -> dict[str, Reply]:
    """Scripted replies for the agent conversation under the default prompt pack."""
    return {
        r"Combine the following three descriptions": _summary_reply,
        r"Give your initial description\.": _initial_reply,
        r"whether the attire suits the person you represent": lambda m, p: (
            f"Is this attire suitable for a {_extract(p, _RE_PERSON)}?"),
        r"how visitors of your culture typically interact": lambda m, p: (
            f"How do {_extract(p, _RE_DEMONYM)} visitors typically interact "
            f"with this landmark?"),
        r"cross-check that their accessories": lambda m, p: (
            f"Are the accessories and mannerisms appropriate for "
            f"{_extract(p, _RE_DEMONYM)} culture?"),
        r"Answer the question\.": (
            "Yes; the details suit the subject, and small adjustments keep "
            "the style authentic."),
        r"Refine your own description": lambda m, p: _refine_reply(p),
    }


def _refine_reply(prompt: str) -> str:
    match = re.search(r"Your current description:\n(.+?)\n\n", prompt, flags=re.DOTALL)
    description = match.group(1).strip() if match else "The scene."
    marker = " Every detail is culturally consistent."
    if description.endswith(marker):
        return description
    return description + marker


def protocol_stub_chat() -> StubChat:
    return stub_chat(protocol_script())


# --- scorer ------------------------------------------------------------------


class StubScorer:
    """Seeded pure-function scorer: same bytes in, same numbers out."""

    def __init__(self, seed: int = 7, dim: int = 64, n_classes: int = 16):
        self.seed = seed
        self.dim = dim
        self.n_classes = n_classes
        self.fingerprint = f"stub-scorer/v1/seed={seed}/dim={dim}/classes={n_classes}"

    def _rng(self, data: bytes) -> np.random.Generator:
        return np.random.default_rng(_digest_seed(data, self.seed))

    def _unit(self, data: bytes) -> np.ndarray:
        vec = self._rng(data).standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed_text(self, text: str) -> np.ndarray:
        return self._unit(b"text:" + text.encode("utf-8"))

    def embed_image(self, image: bytes) -> np.ndarray:
        return self._unit(b"image:" + image)

    def classify(self, image: bytes) -> np.ndarray:
        logits = self._rng(b"class:" + image).standard_normal(self.n_classes)
        probs = np.exp(logits - logits.max())
        return probs / probs.sum()

    def aesthetic(self, image: bytes) -> float:
        return float(1.0 + 9.0 * self._rng(b"aes:" + image).random())


def stub_scorer(seed: int = 7, **kwargs) -> StubScorer:
    return StubScorer(seed=seed, **kwargs)


# --- image generator ---------------------------------------------------------


class StubImageGenerator:
    """PNG generator: a pure function of (caption bytes, params)."""

    def __init__(self, supported_languages: frozenset[str] | None = None,
                 seed: int = 0, tile: int = 16):
        self.supported_languages = supported_languages
        self.seed = seed
        self.tile = tile
        self.fingerprint = f"stub-image/v1/seed={seed}"

    def generate(self, caption: str, params: GenParams) -> bytes:
        key = caption.encode("utf-8") + json.dumps(
            params.to_json(), sort_keys=True).encode()
        rng = np.random.default_rng(_digest_seed(key, self.seed))
        tile = rng.integers(0, 256, size=(self.tile, self.tile, 3), dtype=np.uint8)
        fh = -(-params.height // self.tile)
        fw = -(-params.width // self.tile)
        arr = np.repeat(np.repeat(tile, fh, axis=0), fw, axis=1)
        arr = arr[: params.height, : params.width]
        buf = io.BytesIO()
        Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
        return buf.getvalue()


def stub_image_generator(**kwargs) -> StubImageGenerator:
    return StubImageGenerator(**kwargs)


# --- translator ----------------------------------------------------------------


class StubTranslator:
    """Marks translated text with the target language code; identity on same-language."""

    fingerprint = "stub-translate/v1"

    def translate(self, text: str, source: Language, target: Language) -> str:
        if source.code == target.code:
            return text
        return f"[{target.code}] {text}"


def stub_translator() -> StubTranslator:
    return StubTranslator()
