"""Thin HTTP JSON clients for deployed model services.

Wire protocol (all POST, JSON bodies):
    /v1/chat        {messages: [{role, text}]}                  -> {text}
    /v1/generate    {caption, guidance_scale, steps, seed,
                     width, height}                             -> {png_base64}
    /v1/translate   {text, source, target}                     -> {text}
    /v1/embed_text  {text}                                     -> {vector}
    /v1/embed_image {png_base64}                               -> {vector}
    /v1/classify    {png_base64}                               -> {probabilities}
    /v1/aesthetic   {png_base64}                               -> {value}

Endpoints come from explicit config or the MOSAIG_<ROLE>_URL /
MOSAIG_<ROLE>_TOKEN environment variables (roles CHAT, IMAGE, TRANSLATE,
SCORER).  Transient failures (connection errors, 429, 5xx) retry with
exponential backoff up to three times; anything else is a backend error.
"""

from __future__ import annotations

import base64
import io
import os
import threading
import time
from dataclasses import dataclass, field

import numpy as np
import requests
from PIL import Image

from ..errors import BackendError, ConfigError, ProtocolError, TransportError
from ..matrix import Language
from .base import GenParams

RETRIABLE_STATUS = frozenset({429, 500, 502, 503, 504})


@dataclass
class EndpointConfig:
    url: str
    token: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 0.25
    concurrency: int = 4

    @classmethod
    def from_env(cls, role: str) -> "EndpointConfig":
        url = os.environ.get(f"MOSAIG_{role.upper()}_URL")
        if not url:
            raise ConfigError(f"MOSAIG_{role.upper()}_URL is not set")
        return cls(url=url, token=os.environ.get(f"MOSAIG_{role.upper()}_TOKEN"))


class _JsonClient:
    def __init__(self, config: EndpointConfig):
        self.config = config
        self.session = requests.Session()
        self.retries_total = 0
        self._gate = threading.Semaphore(config.concurrency)

    def post(self, path: str, payload: dict) -> dict:
        url = self.config.url.rstrip("/") + path
        headers = {}
        if self.config.token:
            headers["Authorization"] = f"Bearer {self.config.token}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self.retries_total += 1
                time.sleep(self.config.backoff * (2 ** (attempt - 1)))
            try:
                with self._gate:
                    response = self.session.post(
                        url, json=payload, headers=headers, timeout=self.config.timeout
                    )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code in RETRIABLE_STATUS:
                last_error = TransportError(
                    f"{url} returned {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendError(
                    f"{url} returned {response.status_code}: {response.text[:200]}",
                    endpoint=url,
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{url} returned non-JSON body") from exc
        raise TransportError(f"{url} failed after {self.config.max_retries} retries: {last_error}")


def _field(reply: dict, key: str, endpoint: str):
    if key not in reply:
        raise ProtocolError(f"{endpoint} reply is missing {key!r}")
    return reply[key]


class RemoteChat:
    def __init__(self, config: EndpointConfig):
        self._client = _JsonClient(config)
        self.fingerprint = f"remote-chat@{config.url}"

    @property
    def retries_total(self) -> int:
        return self._client.retries_total

    def send(self, messages: list[dict]) -> str:
        reply = self._client.post("/v1/chat", {"messages": messages})
        return str(_field(reply, "text", "/v1/chat"))


class RemoteImageGenerator:
    def __init__(self, config: EndpointConfig,
                 supported_languages: frozenset[str] | None = None):
        self._client = _JsonClient(config)
        self.supported_languages = supported_languages
        self.fingerprint = f"remote-image@{config.url}"

    @property
    def retries_total(self) -> int:
        return self._client.retries_total

    def generate(self, caption: str, params: GenParams) -> bytes:
        reply = self._client.post("/v1/generate", {
            "caption": caption,
            "guidance_scale": params.guidance_scale,
            "steps": params.inference_steps,
            "seed": params.seed,
            "width": params.width,
            "height": params.height,
        })
        png = base64.b64decode(_field(reply, "png_base64", "/v1/generate"))
        with Image.open(io.BytesIO(png)) as img:
            if img.size != (params.width, params.height):
                raise ProtocolError(
                    f"/v1/generate returned {img.size[0]}x{img.size[1]} pixels, "
                    f"expected {params.width}x{params.height}"
                )
        return png


class RemoteTranslator:
    def __init__(self, config: EndpointConfig):
        self._client = _JsonClient(config)
        self.fingerprint = f"remote-translate@{config.url}"

    def translate(self, text: str, source: Language, target: Language) -> str:
        if source.code == target.code:  # identity is a client-side no-op
            return text
        reply = self._client.post("/v1/translate", {
            "text": text, "source": source.code, "target": target.code,
        })
        return str(_field(reply, "text", "/v1/translate"))


class RemoteScorer:
    def __init__(self, config: EndpointConfig):
        self._client = _JsonClient(config)
        self.fingerprint = f"remote-scorer@{config.url}"

    def _vector(self, path: str, payload: dict) -> np.ndarray:
        vec = np.asarray(_field(self._client.post(path, payload), "vector", path),
                         dtype=float)
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-3:
            raise ProtocolError(f"{path} returned a non-unit embedding (norm={norm:.6f})")
        return vec / norm

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector("/v1/embed_text", {"text": text})

    def embed_image(self, image: bytes) -> np.ndarray:
        return self._vector("/v1/embed_image",
                            {"png_base64": base64.b64encode(image).decode()})

    def classify(self, image: bytes) -> np.ndarray:
        reply = self._client.post("/v1/classify",
                                  {"png_base64": base64.b64encode(image).decode()})
        probs = np.asarray(_field(reply, "probabilities", "/v1/classify"), dtype=float)
        if probs.ndim != 1 or abs(float(probs.sum()) - 1.0) > 1e-6 or (probs < 0).any():
            raise ProtocolError("/v1/classify returned an invalid distribution")
        return probs

    def aesthetic(self, image: bytes) -> float:
        reply = self._client.post("/v1/aesthetic",
                                  {"png_base64": base64.b64encode(image).decode()})
        value = float(_field(reply, "value", "/v1/aesthetic"))
        if not 1.0 <= value <= 10.0:
            raise ProtocolError(f"/v1/aesthetic returned {value}, outside [1, 10]")
        return value


def remote_chat(config: EndpointConfig) -> RemoteChat:
    return RemoteChat(config)


def remote_image(config: EndpointConfig, **kwargs) -> RemoteImageGenerator:
    return RemoteImageGenerator(config, **kwargs)


def remote_translate(config: EndpointConfig) -> RemoteTranslator:
    return RemoteTranslator(config)


def remote_scorer(config: EndpointConfig) -> RemoteScorer:
    return RemoteScorer(config)
