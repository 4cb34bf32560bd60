"""Durable flat-file persistence for one evaluation run.

Layout under <root>/<run-id>/:
    manifest.json           run identity + immutable config snapshot
    specs.jsonl             one PromptSpec per line
    transcripts/<id>.jsonl  one agent transcript per spec (turns + trailer)
    captions.jsonl          generation-ready caption per spec (post-translation)
    images/<id>.png|.json   PNG blob + its provenance record
    classifications.jsonl   per-image class distributions (for set statistics)
    scores.jsonl            metric records
    tasks.jsonl             annotation tasks
    annotations.jsonl       human ratings

Everything is write-once: blobs and per-spec files go through
write-temp-then-rename, JSONL indexes take whole-line appends and tolerate a
torn trailing line by truncating it on open.  Re-puts of identical content
are no-ops; differing content is a conflict.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

from .agents import Transcript
from .backends.base import GenParams
from .errors import ConflictError, CorruptionError, NotFoundError
from .matrix import PromptSpec, Vocabulary, spec_from_json, spec_to_jsonl_line

log = logging.getLogger(__name__)

STAGES = ("transcripts", "captions", "images")


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write(path: Path, data: bytes) -> None:
    """Write-temp-then-rename so readers see either the old or the new file."""
    tmp = path.with_name(f".{path.name}.{uuid.uuid4().hex}.tmp")
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


@dataclass(frozen=True)
class ImageRecord:
    spec_id: str
    caption: str
    caption_mode: str
    generator_fingerprint: str
    params: GenParams
    path: str  # relative to the run directory
    content_hash: str

    def to_json(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "caption": self.caption,
            "caption_mode": self.caption_mode,
            "generator_fingerprint": self.generator_fingerprint,
            "params": self.params.to_json(),
            "path": self.path,
            "content_hash": self.content_hash,
        }

    @classmethod
    def from_json(cls, rec: dict) -> "ImageRecord":
        return cls(
            spec_id=rec["spec_id"],
            caption=rec["caption"],
            caption_mode=rec["caption_mode"],
            generator_fingerprint=rec["generator_fingerprint"],
            params=GenParams.from_json(rec["params"]),
            path=rec["path"],
            content_hash=rec["content_hash"],
        )


class _JsonlIndex:
    """Append-only keyed JSONL file with idempotent re-puts."""

    def __init__(self, path: Path, key_fields: tuple[str, ...]):
        self.path = path
        self.key_fields = key_fields
        self.records: dict[tuple, dict] = {}
        self._load()

    def _key(self, rec: dict) -> tuple:
        return tuple(rec.get(field) for field in self.key_fields)

    def _load(self) -> None:
        if not self.path.exists():
            return
        good_end = 0
        with open(self.path, "rb") as fh:
            raw = fh.read()
        for line in raw.splitlines(keepends=True):
            stripped = line.strip()
            if not stripped:
                good_end += len(line)
                continue
            try:
                rec = json.loads(stripped)
            except json.JSONDecodeError:
                if good_end + len(line) < len(raw):
                    raise CorruptionError(
                        f"unparseable record mid-file in {self.path}",
                        path=str(self.path))
                log.warning("dropping torn trailing record in %s", self.path)
                break
            if not line.endswith(b"\n"):
                # complete JSON but no newline: a write was cut mid-flush
                log.warning("dropping unterminated trailing record in %s", self.path)
                break
            self.records[self._key(rec)] = rec
            good_end += len(line)
        if good_end < len(raw):
            with open(self.path, "ab") as fh:
                fh.truncate(good_end)

    def put(self, rec: dict) -> bool:
        """Returns True if the record was new, False for an identical re-put."""
        key = self._key(rec)
        existing = self.records.get(key)
        if existing is not None:
            if existing == rec:
                return False
            raise ConflictError(
                f"conflicting re-put for key {key} in {self.path.name}")
        line = json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n"
        with open(self.path, "ab") as fh:
            fh.write(line.encode("utf-8"))
            fh.flush()
            os.fsync(fh.fileno())
        self.records[key] = rec
        return True

    def get(self, key: tuple) -> dict | None:
        return self.records.get(key)

    def values(self) -> list[dict]:
        return list(self.records.values())

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class RunManifest:
    run_id: str
    created_at: str
    config: dict

    def to_json(self) -> dict:
        return {"run_id": self.run_id, "created_at": self.created_at,
                "config": self.config}


class RunStore:
    """Persistence for one run; all mutation goes through a single lock."""

    def __init__(self, root: str | Path, run_id: str, config: dict | None = None):
        self.root = Path(root)
        self.run_id = run_id
        self.dir = self.root / run_id
        self._lock = threading.RLock()
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "transcripts").mkdir(exist_ok=True)
        (self.dir / "images").mkdir(exist_ok=True)

        manifest_path = self.dir / "manifest.json"
        if manifest_path.exists():
            raw = json.loads(manifest_path.read_text("utf-8"))
            self.manifest = RunManifest(raw["run_id"], raw["created_at"], raw["config"])
            if config is not None and config != self.manifest.config:
                raise ConflictError(
                    f"run {run_id} already exists with a different config snapshot")
        else:
            self.manifest = RunManifest(
                run_id=run_id,
                created_at=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                config=config or {},
            )
            atomic_write(manifest_path, json.dumps(
                self.manifest.to_json(), sort_keys=True, indent=2).encode())

        self._captions = _JsonlIndex(self.dir / "captions.jsonl", ("spec_id",))
        self._scores = _JsonlIndex(
            self.dir / "scores.jsonl",
            ("spec_id", "metric", "swap_kind", "counterpart_spec_id", "swap_target"),
        )
        self._classifications = _JsonlIndex(
            self.dir / "classifications.jsonl", ("spec_id",))
        self._tasks = _JsonlIndex(self.dir / "tasks.jsonl", ("task_id",))
        self._annotations = _JsonlIndex(
            self.dir / "annotations.jsonl", ("task_id", "annotator_id"))

    # --- specs ---------------------------------------------------------

    def put_specs(self, specs: list[PromptSpec]) -> bool:
        data = ("\n".join(spec_to_jsonl_line(s) for s in specs) + "\n").encode()
        path = self.dir / "specs.jsonl"
        with self._lock:
            if path.exists():
                if path.read_bytes() == data:
                    return False
                raise ConflictError(f"specs.jsonl already exists for run {self.run_id} "
                                    f"with different content")
            atomic_write(path, data)
            return True

    def load_specs(self, vocab: Vocabulary) -> list[PromptSpec]:
        path = self.dir / "specs.jsonl"
        if not path.exists():
            return []
        specs = []
        for line in path.read_text("utf-8").splitlines():
            if line.strip():
                specs.append(spec_from_json(json.loads(line), vocab))
        return specs

    def has_specs(self) -> bool:
        return (self.dir / "specs.jsonl").exists()

    # --- transcripts -----------------------------------------------------

    def _transcript_path(self, spec_id: str) -> Path:
        return self.dir / "transcripts" / f"{spec_id}.jsonl"

    def has_transcript(self, spec_id: str) -> bool:
        return self._transcript_path(spec_id).exists()

    def put_transcript(self, transcript: Transcript) -> bool:
        data = ("\n".join(transcript.to_json_lines()) + "\n").encode()
        path = self._transcript_path(transcript.spec_id)
        with self._lock:
            if path.exists():
                if path.read_bytes() == data:
                    return False
                raise ConflictError(
                    f"transcript for {transcript.spec_id} already exists "
                    f"with different content")
            atomic_write(path, data)
            return True

    def get_transcript(self, spec_id: str) -> Transcript:
        path = self._transcript_path(spec_id)
        if not path.exists():
            raise NotFoundError(f"no transcript for spec {spec_id}")
        return Transcript.from_json_lines(path.read_text("utf-8").splitlines())

    # --- captions (post-translation, generation-ready) -------------------

    def put_caption(self, spec_id: str, text: str, source_text: str,
                    translator_fingerprint: str) -> bool:
        rec = {"spec_id": spec_id, "text": text, "source_text": source_text,
               "translator_fingerprint": translator_fingerprint}
        with self._lock:
            return self._captions.put(rec)

    def get_caption(self, spec_id: str) -> dict | None:
        return self._captions.get((spec_id,))

    # --- images -------------------------------------------------------------

    def _image_blob_path(self, spec_id: str) -> Path:
        return self.dir / "images" / f"{spec_id}.png"

    def _image_record_path(self, spec_id: str) -> Path:
        return self.dir / "images" / f"{spec_id}.json"

    def has_image(self, spec_id: str) -> bool:
        return self._image_record_path(spec_id).exists()

    def put_image(self, spec_id: str, png: bytes, caption: str, caption_mode: str,
                  generator_fingerprint: str, params: GenParams) -> ImageRecord:
        record = ImageRecord(
            spec_id=spec_id,
            caption=caption,
            caption_mode=caption_mode,
            generator_fingerprint=generator_fingerprint,
            params=params,
            path=f"images/{spec_id}.png",
            content_hash=content_hash(png),
        )
        rec_json = json.dumps(record.to_json(), sort_keys=True, indent=2).encode()
        with self._lock:
            rec_path = self._image_record_path(spec_id)
            if rec_path.exists():
                existing = rec_path.read_bytes()
                if existing == rec_json:
                    return record
                raise ConflictError(
                    f"image record for {spec_id} already exists with different content")
            # Blob lands first; the record is the commit point, so a crash in
            # between leaves the spec listed as missing, never torn.
            atomic_write(self._image_blob_path(spec_id), png)
            atomic_write(rec_path, rec_json)
        return record

    def get_image_record(self, spec_id: str) -> ImageRecord:
        path = self._image_record_path(spec_id)
        if not path.exists():
            raise NotFoundError(f"no image record for spec {spec_id}")
        return ImageRecord.from_json(json.loads(path.read_text("utf-8")))

    def get_image(self, spec_id: str) -> tuple[ImageRecord, bytes]:
        record = self.get_image_record(spec_id)
        blob_path = self.dir / record.path
        if not blob_path.exists():
            raise NotFoundError(f"image blob missing for spec {spec_id}")
        data = blob_path.read_bytes()
        if content_hash(data) != record.content_hash:
            raise CorruptionError(
                f"content hash mismatch for {blob_path}", path=str(blob_path))
        return record, data

    def image_records(self) -> list[ImageRecord]:
        records = []
        for path in sorted((self.dir / "images").glob("*.json")):
            records.append(ImageRecord.from_json(json.loads(path.read_text("utf-8"))))
        return records

    def find_image_by_hash(self, digest: str) -> tuple[ImageRecord, bytes]:
        for record in self.image_records():
            if record.content_hash == digest:
                return record, self.get_image(record.spec_id)[1]
        raise NotFoundError(f"no image with content hash {digest}")

    # --- scores / classifications --------------------------------------------

    def put_score(self, rec: dict) -> bool:
        defaults = {"spec_id": None, "swap_kind": None,
                    "counterpart_spec_id": None, "swap_target": None}
        rec = {**defaults, **rec}
        with self._lock:
            return self._scores.put(rec)

    def has_score(self, spec_id: str | None, metric: str, swap_kind: str | None = None,
                  counterpart_spec_id: str | None = None,
                  swap_target: str | None = None) -> bool:
        key = (spec_id, metric, swap_kind, counterpart_spec_id, swap_target)
        return self._scores.get(key) is not None

    def scores(self) -> list[dict]:
        return self._scores.values()

    def put_classification(self, spec_id: str, probabilities: list[float],
                           scorer_fingerprint: str) -> bool:
        rec = {"spec_id": spec_id, "probabilities": probabilities,
               "scorer_fingerprint": scorer_fingerprint}
        with self._lock:
            return self._classifications.put(rec)

    def classifications(self) -> dict[str, list[float]]:
        return {rec["spec_id"]: rec["probabilities"]
                for rec in self._classifications.values()}

    # --- annotation tasks / records ----------------------------------------

    def put_task(self, rec: dict) -> bool:
        with self._lock:
            return self._tasks.put(rec)

    def tasks(self) -> list[dict]:
        return sorted(self._tasks.values(), key=lambda rec: rec["index"])

    def put_annotation(self, rec: dict) -> bool:
        with self._lock:
            return self._annotations.put(rec)

    def get_annotation(self, task_id: str, annotator_id: str) -> dict | None:
        return self._annotations.get((task_id, annotator_id))

    def annotations(self) -> list[dict]:
        return self._annotations.values()

    # --- stage accounting ------------------------------------------------------

    def missing(self, stage: str, specs: list[PromptSpec]) -> list[str]:
        """Spec ids lacking a record at the given stage, in spec order."""
        has = {
            "transcripts": self.has_transcript,
            "captions": lambda sid: self.get_caption(sid) is not None,
            "images": self.has_image,
        }.get(stage)
        if has is None:
            raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
        return [spec.id for spec in specs if not has(spec.id)]

    def counts(self) -> dict[str, int]:
        return {
            "specs": sum(1 for line in (self.dir / "specs.jsonl").read_text("utf-8").splitlines() if line.strip()) if self.has_specs() else 0,
            "transcripts": len(list((self.dir / "transcripts").glob("*.jsonl"))),
            "captions": len(self._captions),
            "images": len(list((self.dir / "images").glob("*.json"))),
            "scores": len(self._scores),
            "classifications": len(self._classifications),
            "tasks": len(self._tasks),
            "annotations": len(self._annotations),
        }


def open_run(root: str | Path, run_id: str, config: dict | None = None) -> RunStore:
    return RunStore(root, run_id, config)


def list_runs(root: str | Path) -> list[str]:
    root = Path(root)
    if not root.exists():
        return []
    return sorted(p.name for p in root.iterdir() if (p / "manifest.json").exists())
