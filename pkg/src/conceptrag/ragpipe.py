"""Prompt assembly, LLM backends, and the end-to-end evaluation pipeline.

Prompts are deterministic functions of their inputs; backends are pluggable
behind one spec (an OpenAI-compatible chat endpoint or a deterministic stub),
so swapping the backend never changes the prompts and swapping the
compression mode never changes which documents are consulted.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

import requests

from . import metrics
from .corpus import QadPair
from .distill import ConceptSet, DistillConfig, TraversalMode, build_idf_index, distill_concepts
from .penman import parse_amr

FACT_PROMPT_PREFIX = "Refer to the following facts to answer the question. Facts: "
BASELINE_INSTRUCTIONS = {
    "keywords": "Extract a few keywords from the following content.",
    "summary": "Generate a short summary of the following content.",
}
_FACTS_SEGMENT_RE = re.compile(r"Facts: (.*)\. Question:", re.S)
_INPUT_SEGMENT_RE = re.compile(r"### Input: \{(.*)\}\n### Response: \Z", re.S)


class BackendError(RuntimeError):
    """Base class for backend failures; ``retryable`` marks transient ones."""

    retryable = False


BACKEND_ERROR_NAMES = ("BackendError", "BackendTimeout", "BackendHttpError", "BackendProtocolError")


class BackendTimeout(BackendError):
    """The request timed out or the endpoint was unreachable."""

    retryable = True


class BackendHttpError(BackendError):
    """The endpoint answered with a non-2xx status."""

    def __init__(self, status: int, body: str = ""):
        super().__init__(f"backend returned HTTP {status}: {body[:200]}")
        self.status = status
        self.retryable = status == 429 or status >= 500


class BackendProtocolError(BackendError):
    """The response body did not follow the chat-completions schema."""

    retryable = False


@dataclass(frozen=True)
class LlmBackendSpec:
    """Declarative description of an answer-producing backend.

    ``http-chat`` posts to an OpenAI-compatible chat-completions endpoint
    (bearer token read from the environment variable named by ``auth_env``).
    ``stub`` answers deterministically: the ``echo-facts`` policy returns the
    prompt's facts segment, ``oracle-substring`` returns the first gold
    answer found verbatim in the prompt, else "unknown".
    """

    kind: str  # 'http-chat' | 'stub'
    endpoint_url: str = ""
    model: str = ""
    auth_env: str = ""
    timeout_s: float = 30.0
    max_parallel: int = 1
    temperature: float = 0.0
    max_tokens: int = 64
    retries: int = 0
    policy: str = "oracle-substring"
    stub_delay_ms: float = 0.0
    stub_jitter_seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("http-chat", "stub"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "http-chat" and not self.endpoint_url:
            raise ValueError("http-chat backend requires an endpoint_url")
        if self.kind == "stub" and self.policy not in ("echo-facts", "oracle-substring"):
            raise ValueError(f"unknown stub policy {self.policy!r}")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")

    @property
    def label(self) -> str:
        if self.kind == "stub":
            return f"stub:{self.policy}"
        return f"http:{self.model or self.endpoint_url}"

    @classmethod
    def from_dict(cls, data: dict) -> "LlmBackendSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown backend spec keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "LlmBackendSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def redacted_dict(self) -> dict:
        """Spec as written to run manifests: names the auth variable, never
        its value."""
        data = {
            "kind": self.kind,
            "max_parallel": self.max_parallel,
            "timeout_s": self.timeout_s,
            "retries": self.retries,
        }
        if self.kind == "http-chat":
            data.update(
                endpoint_url=self.endpoint_url,
                model=self.model,
                auth_env=self.auth_env or None,
                temperature=self.temperature,
                max_tokens=self.max_tokens,
            )
        else:
            data.update(policy=self.policy)
        return data


@dataclass(frozen=True)
class CompressionMode:
    """Which representation of the documents reaches the model."""

    kind: str  # 'vanilla' | 'concepts' | 'keywords' | 'summary'
    traversal: TraversalMode = TraversalMode("dfs")

    def __post_init__(self):
        if self.kind not in ("vanilla", "concepts", "keywords", "summary"):
            raise ValueError(f"unknown compression mode {self.kind!r}")


@dataclass
class PipelineRecord:
    """Outcome of one question: the prompt sent, the raw answer, latency, and
    whether the answer matched a gold answer."""

    pair: QadPair
    k: int
    mode: str
    backend: str
    prompt: str
    raw_answer: str
    latency_ms: float
    correct: bool
    compressed_docs: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "question": self.pair.question,
            "gold_answers": list(self.pair.gold_answers),
            "k": self.k,
            "mode": self.mode,
            "backend": self.backend,
            "prompt": self.prompt,
            "raw_answer": self.raw_answer,
            "latency_ms": self.latency_ms,
            "correct": self.correct,
            "original_words": sum(len(d.text.split()) for d in self.pair.documents),
            "compressed_words": sum(len(c.split()) for c in self.compressed_docs),
            "error": self.error,
        }


# --- prompts -----------------------------------------------------------------


def fact_prompt_from_strings(doc_facts: list[str], question: str) -> str:
    """The faithful-intensive template over per-document fact strings:
    documents joined with a single space."""
    if not doc_facts or any(not f for f in doc_facts):
        raise ValueError("every document must contribute a non-empty facts string")
    if not question:
        raise ValueError("question must be non-empty")
    return f"{FACT_PROMPT_PREFIX}{' '.join(doc_facts)}. Question: {question}"


def build_fact_prompt(concept_sets: list[ConceptSet], question: str) -> str:
    """Fact prompt over distilled concepts, one ConceptSet per document;
    within a document, sentence groups join with '. ' and concepts with ', '."""
    if not concept_sets or any(not cs.concepts for cs in concept_sets):
        raise ValueError("every document must contribute a non-empty concept set")
    return fact_prompt_from_strings([cs.facts_string() for cs in concept_sets], question)


def build_baseline_prompt(kind: str, doc: str) -> str:
    """The keyword-extraction / summarization instruction template."""
    if kind not in BASELINE_INSTRUCTIONS:
        raise ValueError(f"unknown baseline prompt kind {kind!r}")
    if not doc:
        raise ValueError("document must be non-empty")
    return (
        "Below is an instruction that describes a task, paired with an input "
        "that provides content.\n"
        f"### Instruction: {{{BASELINE_INSTRUCTIONS[kind]}}}\n"
        f"### Input: {{{doc}}}\n"
        "### Response: "
    )


def _facts_segment(prompt: str) -> str:
    match = _FACTS_SEGMENT_RE.search(prompt)
    if match:
        return match.group(1)
    match = _INPUT_SEGMENT_RE.search(prompt)
    if match:
        return match.group(1)
    return prompt


# --- backends ----------------------------------------------------------------


def query_llm(
    backend: LlmBackendSpec, prompt: str, gold_answers: tuple[str, ...] = ()
) -> tuple[str, float]:
    """Send one prompt; returns (answer text, latency in ms). Retryable
    failures are retried up to ``backend.retries`` times."""
    start = time.perf_counter()
    attempt = 0
    while True:
        try:
            if backend.kind == "stub":
                answer = _query_stub(backend, prompt, gold_answers)
            else:
                answer = _query_http(backend, prompt)
            return answer, (time.perf_counter() - start) * 1000.0
        except BackendError as exc:
            if not exc.retryable or attempt >= backend.retries:
                raise
            attempt += 1


def _query_stub(backend: LlmBackendSpec, prompt: str, gold_answers: tuple[str, ...]) -> str:
    if backend.stub_delay_ms > 0:
        jitter = Random((backend.stub_jitter_seed or 0) ^ zlib.crc32(prompt.encode("utf-8")))
        time.sleep(jitter.uniform(0, backend.stub_delay_ms) / 1000.0)
    if backend.policy == "echo-facts":
        return _facts_segment(prompt)
    for gold in gold_answers:
        if gold and gold in prompt:
            return gold
    return "unknown"


def _query_http(backend: LlmBackendSpec, prompt: str) -> str:
    headers = {"Content-Type": "application/json"}
    if backend.auth_env:
        token = os.environ.get(backend.auth_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    payload = {
        "model": backend.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": backend.temperature,
        "max_tokens": backend.max_tokens,
    }
    try:
        response = requests.post(
            backend.endpoint_url, json=payload, headers=headers, timeout=backend.timeout_s
        )
    except requests.Timeout as exc:
        raise BackendTimeout(f"backend timed out after {backend.timeout_s}s") from exc
    except requests.ConnectionError as exc:
        raise BackendTimeout(f"backend unreachable: {exc}") from exc
    except requests.RequestException as exc:
        raise BackendError(f"request failed: {exc}") from exc
    if not 200 <= response.status_code < 300:
        raise BackendHttpError(response.status_code, response.text)
    try:
        body = response.json()
        content = body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendProtocolError(f"malformed chat-completions response: {exc}") from exc
    if not isinstance(content, str):
        raise BackendProtocolError("message content is not a string")
    return content


class AmrParseClient:
    """Client for a user-supplied text-to-AMR parse endpoint, consulted when
    a document ships without inline PENMAN.

    Wire format: POST JSON ``{"text": <document>}``; the endpoint answers
    200 with ``{"amr": <penman string>}``.
    """

    def __init__(self, endpoint_url: str, timeout_s: float = 60.0):
        self.endpoint_url = endpoint_url
        self.timeout_s = timeout_s

    def parse(self, text: str) -> str:
        try:
            response = requests.post(
                self.endpoint_url, json={"text": text}, timeout=self.timeout_s
            )
        except requests.Timeout as exc:
            raise BackendTimeout(f"parse endpoint timed out after {self.timeout_s}s") from exc
        except requests.ConnectionError as exc:
            raise BackendTimeout(f"parse endpoint unreachable: {exc}") from exc
        except requests.RequestException as exc:
            raise BackendError(f"parse request failed: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise BackendHttpError(response.status_code, response.text)
        try:
            amr = response.json()["amr"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendProtocolError(f"malformed parse response: {exc}") from exc
        if not isinstance(amr, str) or not amr:
            raise BackendProtocolError("parse response 'amr' is not a non-empty string")
        return amr


# --- pipeline ----------------------------------------------------------------


def run_pipeline(
    pairs: list[QadPair],
    mode: CompressionMode,
    backend: LlmBackendSpec,
    config: DistillConfig | None = None,
    parse_client: AmrParseClient | None = None,
) -> list[PipelineRecord]:
    """Answer every pair under one compression mode.

    Per pair: compress the documents per ``mode``, build the prompt, query
    the backend, and score the answer. Two-pass modes (keywords/summary)
    first ask the backend to compress each document, then ask the question
    over the compressed text. Failures are recorded per pair, never fatal;
    output order equals input order regardless of completion order.
    """
    config = config or DistillConfig()

    def answer_one(pair: QadPair) -> PipelineRecord:
        try:
            return _answer_pair(pair, mode, backend, config, parse_client)
        except (BackendError, ValueError) as exc:
            return PipelineRecord(
                pair=pair,
                k=pair.k,
                mode=mode.kind,
                backend=backend.label,
                prompt="",
                raw_answer="",
                latency_ms=0.0,
                correct=False,
                compressed_docs=[],
                error=f"{type(exc).__name__}: {exc}",
            )

    if backend.max_parallel > 1:
        with ThreadPoolExecutor(max_workers=backend.max_parallel) as pool:
            return list(pool.map(answer_one, pairs))
    return [answer_one(pair) for pair in pairs]


def _answer_pair(
    pair: QadPair,
    mode: CompressionMode,
    backend: LlmBackendSpec,
    config: DistillConfig,
    parse_client: AmrParseClient | None,
) -> PipelineRecord:
    compress_latency = 0.0
    if mode.kind == "vanilla":
        doc_strings = [doc.text for doc in pair.documents]
    elif mode.kind == "concepts":
        idf = None
        if config.idf_enabled:
            idf = build_idf_index([doc.text for doc in pair.documents])
        doc_strings = []
        for doc in pair.documents:
            penman_text = doc.amr
            if penman_text is None:
                if parse_client is None:
                    raise ValueError(
                        "document has no inline AMR and no parse client was supplied"
                    )
                penman_text = parse_client.parse(doc.text)
            concept_set = distill_concepts(
                parse_amr(penman_text), doc.text, idf=idf, mode=mode.traversal, config=config
            )
            doc_strings.append(concept_set.facts_string())
    else:  # keywords / summary: two-pass compression through the backend
        doc_strings = []
        for doc in pair.documents:
            compressed, latency = query_llm(
                backend, build_baseline_prompt(mode.kind, doc.text), pair.gold_answers
            )
            compress_latency += latency
            doc_strings.append(compressed)

    prompt = fact_prompt_from_strings(doc_strings, pair.question)
    answer, latency = query_llm(backend, prompt, pair.gold_answers)
    return PipelineRecord(
        pair=pair,
        k=pair.k,
        mode=mode.kind,
        backend=backend.label,
        prompt=prompt,
        raw_answer=answer,
        latency_ms=latency + compress_latency,
        correct=metrics.answer_match(answer, list(pair.gold_answers)),
        compressed_docs=doc_strings,
    )


# --- run manifest ------------------------------------------------------------


def dataset_content_hash(path: str | Path) -> str:
    """Git-style blob hash of the dataset file."""
    data = Path(path).read_bytes()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def config_hash(mode: CompressionMode, backend: LlmBackendSpec, config: DistillConfig) -> str:
    payload = json.dumps(
        {
            "mode": mode.kind,
            "traversal": {"kind": mode.traversal.kind, "seed": mode.traversal.seed},
            "backend": backend.redacted_dict(),
            "distill": config.to_dict(),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def build_run_manifest(
    mode: CompressionMode,
    backend: LlmBackendSpec,
    config: DistillConfig,
    dataset_path: str | Path,
) -> dict:
    """Everything needed to reproduce a run bit-for-bit with stub backends."""
    return {
        "mode": mode.kind,
        "traversal": {"kind": mode.traversal.kind, "seed": mode.traversal.seed},
        "distill_config": config.to_dict(),
        "backend": backend.redacted_dict(),
        "config_hash": config_hash(mode, backend, config),
        "dataset_path": str(dataset_path),
        "dataset_hash": dataset_content_hash(dataset_path),
    }
