"""Five-agent caption synthesis.

A predefined moderator function hands each of three persona agents (culture,
age+gender, landmark) a task; the personas emit initial descriptions, then
converse over a fixed question schedule for a configurable number of rounds;
a summarizer condenses the three refined descriptions into a caption within
the token budget.

The schedule is fixed so transcripts have a testable shape; the content of
every turn still comes from the chat backend.  Each persona is seeded only
with its own slice of the demographic tuple: the culture agent never sees
age or gender, and symmetrically.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

from .backends.base import ChatModel
from .errors import AgentProtocolError, ConfigError, MosaigError, TransportError
from .matrix import PromptSpec
from .tokenizer import DEFAULT_TOKENIZER, Tokenizer

TOKEN_BUDGET = 77
EMPTY_REPLY_RETRIES = 2


class Role(Enum):
    COUNTRY = "CountryAgent"
    AGE_GENDER = "AgeGenderAgent"
    LANDMARK = "LandmarkAgent"
    SUMMARIZER = "Summarizer"


SOCIAL_ROLES = (Role.COUNTRY, Role.AGE_GENDER, Role.LANDMARK)

_PACK_KEYS = {
    Role.COUNTRY: "country",
    Role.AGE_GENDER: "age_gender",
    Role.LANDMARK: "landmark",
    Role.SUMMARIZER: "summarizer",
}

_TITLES = {
    Role.COUNTRY: "culture expert",
    Role.AGE_GENDER: "person expert",
    Role.LANDMARK: "landmark expert",
    Role.SUMMARIZER: "summarizer",
}

# Which PromptSpec fields each persona is seeded with.
BOUND_FIELDS = {
    Role.COUNTRY: ("person_country",),
    Role.AGE_GENDER: ("age", "gender"),
    Role.LANDMARK: ("landmark", "landmark_country"),
    Role.SUMMARIZER: (),
}

# One conversation round: (questioner, questioned, question template key).
QUESTION_SCHEDULE = (
    (Role.AGE_GENDER, Role.COUNTRY, "turn.question.attire"),
    (Role.COUNTRY, Role.LANDMARK, "turn.question.interaction"),
    (Role.COUNTRY, Role.AGE_GENDER, "turn.question.accessories"),
)


class TurnKind(Enum):
    INITIAL = "InitialDescription"
    QUESTION = "Question"
    ANSWER = "Answer"
    REFINEMENT = "Refinement"
    SUMMARY = "Summary"


@dataclass(frozen=True)
class Turn:
    speaker: Role
    addressee: Role | None  # None means addressed to all
    kind: TurnKind
    text: str
    round_index: int

    def to_json(self) -> dict:
        return {
            "type": "turn",
            "speaker": self.speaker.value,
            "addressee": self.addressee.value if self.addressee else "all",
            "kind": self.kind.value,
            "text": self.text,
            "round_index": self.round_index,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "Turn":
        addressee = None if rec["addressee"] == "all" else Role(rec["addressee"])
        return cls(
            speaker=Role(rec["speaker"]),
            addressee=addressee,
            kind=TurnKind(rec["kind"]),
            text=rec["text"],
            round_index=rec["round_index"],
        )


@dataclass
class Transcript:
    spec_id: str
    turns: list[Turn]
    final_caption: str
    token_count: int
    truncated: bool
    backend_fingerprint: str

    def to_json_lines(self) -> list[str]:
        lines = [json.dumps(t.to_json(), sort_keys=True, ensure_ascii=False)
                 for t in self.turns]
        trailer = {
            "type": "trailer",
            "spec_id": self.spec_id,
            "final_caption": self.final_caption,
            "token_count": self.token_count,
            "truncated": self.truncated,
            "backend_fingerprint": self.backend_fingerprint,
        }
        lines.append(json.dumps(trailer, sort_keys=True, ensure_ascii=False))
        return lines

    @classmethod
    def from_json_lines(cls, lines: list[str]) -> "Transcript":
        records = [json.loads(line) for line in lines if line.strip()]
        if not records or records[-1].get("type") != "trailer":
            raise ValueError("transcript is missing its trailer record")
        trailer = records[-1]
        turns = [Turn.from_json(rec) for rec in records[:-1]]
        return cls(
            spec_id=trailer["spec_id"],
            turns=turns,
            final_caption=trailer["final_caption"],
            token_count=trailer["token_count"],
            truncated=trailer["truncated"],
            backend_fingerprint=trailer["backend_fingerprint"],
        )


@dataclass(frozen=True)
class AgentPersona:
    role: Role
    system_prompt: str
    bound_fields: tuple[str, ...]


@dataclass(frozen=True)
class TaskAssignment:
    target_role: Role
    instruction: str
    spec_id: str


class PromptPack:
    """Versioned persona/turn templates loaded from a sectioned text file."""

    def __init__(self, sections: dict[str, str]):
        self.sections = sections
        self.version = sections.get("version", "prompt-pack/unversioned").strip()

    @classmethod
    def parse(cls, text: str) -> "PromptPack":
        sections: dict[str, str] = {}
        name: str | None = None
        body: list[str] = []
        for line in text.splitlines():
            if name is None and line.startswith("#"):
                continue
            if line.startswith("[") and line.rstrip().endswith("]"):
                if name is not None:
                    sections[name] = "\n".join(body).strip("\n")
                name = line.strip()[1:-1]
                body = []
            elif name is not None:
                body.append(line)
        if name is not None:
            sections[name] = "\n".join(body).strip("\n")
        return cls(sections)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "PromptPack":
        if path is not None:
            text = Path(path).read_text(encoding="utf-8")
        else:
            text = resources.files("mosaig.data").joinpath("prompt_pack.txt").read_text("utf-8")
        return cls.parse(text)

    def render(self, key: str, **values: str) -> str:
        try:
            template = self.sections[key]
        except KeyError:
            raise ConfigError(f"prompt pack has no section {key!r}") from None
        try:
            return template.format(**values)
        except (KeyError, IndexError) as exc:
            raise ConfigError(f"unresolved placeholder in {key!r}: {exc}") from exc


def _persona_values(spec: PromptSpec, role: Role) -> dict[str, str]:
    if role is Role.COUNTRY:
        return {"demonym": spec.person_country.demonym}
    if role is Role.AGE_GENDER:
        return {"person_noun": spec.person_noun}
    if role is Role.LANDMARK:
        return {"landmark": spec.landmark.name,
                "landmark_country": spec.landmark.country.name}
    return {}


def build_personas(spec: PromptSpec, pack: PromptPack) -> dict[Role, AgentPersona]:
    personas = {}
    for role in Role:
        system_prompt = pack.render(f"{_PACK_KEYS[role]}.system",
                                    **_persona_values(spec, role))
        personas[role] = AgentPersona(
            role=role, system_prompt=system_prompt, bound_fields=BOUND_FIELDS[role]
        )
    return personas


def moderate(spec: PromptSpec, pack: PromptPack | None = None) -> list[TaskAssignment]:
    """Predefined moderator: three deterministic task assignments, no model call."""
    pack = pack or PromptPack.load()
    return [
        TaskAssignment(
            target_role=role,
            instruction=pack.render(f"assignment.{_PACK_KEYS[role]}",
                                    **_persona_values(spec, role)),
            spec_id=spec.id,
        )
        for role in SOCIAL_ROLES
    ]


@dataclass
class SummaryResult:
    text: str
    token_count: int
    truncated: bool
    attempts: int


def _send(chat: ChatModel, persona: AgentPersona, assignment: str | None,
          body: str, role: Role, round_index: int) -> str:
    messages = [{"role": "system", "text": persona.system_prompt}]
    if assignment:
        messages.append({"role": "user", "text": assignment})
    messages.append({"role": "user", "text": body})
    for _ in range(EMPTY_REPLY_RETRIES + 1):
        reply = chat.send(messages).strip()
        if reply:
            return reply
    raise AgentProtocolError(
        f"{role.value} returned an empty reply in round {round_index}",
        role=role.value, round_index=round_index,
    )


def summarize(descriptions: tuple[str, str, str], chat: ChatModel,
              token_budget: int = TOKEN_BUDGET,
              tokenizer: Tokenizer = DEFAULT_TOKENIZER,
              pack: PromptPack | None = None) -> SummaryResult:
    """Condense three persona descriptions into a caption within the budget.

    Over-budget output triggers re-prompts with a tighter budget (three
    attempts in total); if the model never complies, the last reply is
    hard-truncated at a token boundary and the result flagged.
    """
    if len(descriptions) != 3 or not all(d.strip() for d in descriptions):
        raise ValueError("summarize requires three non-empty descriptions")
    pack = pack or PromptPack.load()
    persona = AgentPersona(Role.SUMMARIZER,
                           pack.render("summarizer.system"),
                           BOUND_FIELDS[Role.SUMMARIZER])
    budgets = [token_budget, (token_budget * 3) // 4, token_budget // 2]
    caption = ""
    attempts = 0
    for budget in budgets:
        body = pack.render(
            "turn.summarize",
            budget=str(budget),
            country_description=descriptions[0],
            age_gender_description=descriptions[1],
            landmark_description=descriptions[2],
        )
        reply = chat.send([
            {"role": "system", "text": persona.system_prompt},
            {"role": "user", "text": body},
        ]).strip()
        attempts += 1
        if reply:
            caption = reply
            if tokenizer.count(caption) <= token_budget:
                return SummaryResult(caption, tokenizer.count(caption), False, attempts)
    if not caption:
        raise AgentProtocolError("summarizer returned empty output on every attempt",
                                 role=Role.SUMMARIZER.value)
    truncated = tokenizer.truncate(caption, token_budget)
    return SummaryResult(truncated, tokenizer.count(truncated), True, attempts)


def run_conversation(spec: PromptSpec, chat: ChatModel, rounds: int = 2,
                     pack: PromptPack | None = None,
                     tokenizer: Tokenizer = DEFAULT_TOKENIZER,
                     token_budget: int = TOKEN_BUDGET) -> Transcript:
    """Run the full protocol for one spec and return its transcript.

    Turn count is 3 + rounds * 9 + 1: three initial descriptions, then per
    round three (question, answer, refinement) triples, then one summary.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    pack = pack or PromptPack.load()
    personas = build_personas(spec, pack)
    assignments = {a.target_role: a for a in moderate(spec, pack)}
    turns: list[Turn] = []
    descriptions: dict[Role, str] = {}

    def call(role: Role, body: str, round_index: int) -> str:
        try:
            return _send(chat, personas[role], assignments[role].instruction,
                         body, role, round_index)
        except TransportError as exc:
            exc.partial = list(turns)
            raise

    try:
        for role in SOCIAL_ROLES:
            text = call(role, pack.render("turn.initial",
                                          assignment=assignments[role].instruction), 0)
            descriptions[role] = text
            turns.append(Turn(role, None, TurnKind.INITIAL, text, 0))

        for round_index in range(1, rounds + 1):
            for asker, answerer, question_key in QUESTION_SCHEDULE:
                question = call(asker, pack.render(
                    question_key, description=descriptions[asker]), round_index)
                turns.append(Turn(asker, answerer, TurnKind.QUESTION,
                                  question, round_index))

                answer = call(answerer, pack.render(
                    "turn.answer",
                    description=descriptions[answerer],
                    questioner=_TITLES[asker],
                    question=question,
                ), round_index)
                turns.append(Turn(answerer, asker, TurnKind.ANSWER,
                                  answer, round_index))

                refined = call(asker, pack.render(
                    "turn.refine",
                    description=descriptions[asker],
                    question=question,
                    answerer=_TITLES[answerer],
                    answer=answer,
                ), round_index)
                descriptions[asker] = refined
                turns.append(Turn(asker, None, TurnKind.REFINEMENT,
                                  refined, round_index))

        summary = summarize(
            (descriptions[Role.COUNTRY], descriptions[Role.AGE_GENDER],
             descriptions[Role.LANDMARK]),
            chat, token_budget=token_budget, tokenizer=tokenizer, pack=pack,
        )
    except TransportError as exc:
        if getattr(exc, "partial", None) is None:
            exc.partial = list(turns)
        raise
    turns.append(Turn(Role.SUMMARIZER, None, TurnKind.SUMMARY, summary.text, rounds))

    return Transcript(
        spec_id=spec.id,
        turns=turns,
        final_caption=summary.text,
        token_count=summary.token_count,
        truncated=summary.truncated,
        backend_fingerprint=f"{chat.fingerprint}+{pack.version}",
    )


@dataclass
class BatchSummary:
    completed: int = 0
    skipped: int = 0
    failed: int = 0
    failures: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"completed": self.completed, "skipped": self.skipped,
                "failed": self.failed, "failures": self.failures}


def caption_matrix(specs: list[PromptSpec], chat: ChatModel, store,
                   rounds: int = 2, pack: PromptPack | None = None,
                   tokenizer: Tokenizer = DEFAULT_TOKENIZER,
                   workers: int = 1) -> BatchSummary:
    """Caption every spec, skipping those with persisted transcripts.

    Per-spec failures are collected rather than aborting the batch, so a
    rerun picks up exactly the missing work.
    """
    pack = pack or PromptPack.load()
    summary = BatchSummary()
    pending = []
    for spec in specs:
        if store.has_transcript(spec.id):
            summary.skipped += 1
        else:
            pending.append(spec)

    def work(spec: PromptSpec) -> tuple[str, Transcript | None, str | None]:
        try:
            transcript = run_conversation(spec, chat, rounds=rounds, pack=pack,
                                          tokenizer=tokenizer)
            return spec.id, transcript, None
        except MosaigError as exc:
            return spec.id, None, str(exc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, pending))
    else:
        results = [work(spec) for spec in pending]

    for spec_id, transcript, error in results:
        if transcript is not None:
            store.put_transcript(transcript)
            summary.completed += 1
        else:
            summary.failed += 1
            summary.failures[spec_id] = error or "unknown error"
    return summary
