from .base import (
    ALT_PRESET,
    FLUX_PRESET,
    PRESET_LANGUAGE_CODES,
    PRESETS,
    ChatModel,
    GenParams,
    ImageGenerator,
    ScoreBackend,
    Translator,
    generator_supports,
)
from .remote import (
    EndpointConfig,
    remote_chat,
    remote_image,
    remote_scorer,
    remote_translate,
)
from .stubs import (
    StubChat,
    StubImageGenerator,
    StubScorer,
    StubTranslator,
    protocol_script,
    protocol_stub_chat,
    stub_chat,
    stub_image_generator,
    stub_scorer,
    stub_translator,
)

__all__ = [
    "ALT_PRESET",
    "FLUX_PRESET",
    "PRESETS",
    "PRESET_LANGUAGE_CODES",
    "ChatModel",
    "GenParams",
    "ImageGenerator",
    "ScoreBackend",
    "Translator",
    "generator_supports",
    "EndpointConfig",
    "remote_chat",
    "remote_image",
    "remote_scorer",
    "remote_translate",
    "StubChat",
    "StubImageGenerator",
    "StubScorer",
    "StubTranslator",
    "protocol_script",
    "protocol_stub_chat",
    "stub_chat",
    "stub_image_generator",
    "stub_scorer",
    "stub_translator",
]
