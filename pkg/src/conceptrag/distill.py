"""Concept distillation over AMR graphs.

Converts a document's AMR into an ordered list of concept strings:
per-sentence traversal with buffered handling of ``:name``, ``:wiki`` and
``date-entity`` constructs, stoplist/IDF formatting, and a backtrace step
that restores each concept to the surface form used in the source document.
"""

from __future__ import annotations

import calendar
import json
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .penman import AmrGraph, AmrNode, dfs_nodes, split_sentences

_SENSE_RE = re.compile(r"-[0-9]{2}\Z")
_TOKEN_RE = re.compile(r"[A-Za-z0-9]+(?:'[A-Za-z0-9]+)*")
_OP_ROLE_RE = re.compile(r":op([0-9]+)\Z")


class DistillError(ValueError):
    """A node violates the contract of its role handler."""


# AMR's canonical entity-type and structural labels. These nodes type an
# entity rather than carry content from the source document, so they are
# filtered out of the concept set by default. User-extensible via
# DistillConfig.stoplist_add / stoplist_remove.
_ENTITY_TYPE_LABELS = (
    # people and groups
    "person", "family", "animal", "language", "nationality", "ethnic-group",
    "regional-group", "religious-group", "political-movement",
    # organizations
    "organization", "company", "government-organization", "military",
    "criminal-organization", "political-party", "market-sector", "school",
    "university", "research-institute", "team", "league",
    # locations
    "location", "city", "city-district", "county", "state", "province",
    "territory", "country", "local-region", "country-region", "world-region",
    "continent", "ocean", "sea", "lake", "river", "gulf", "bay", "strait",
    "canal", "peninsula", "mountain", "volcano", "valley", "canyon", "island",
    "desert", "forest", "moon", "planet", "star", "constellation",
    # facilities
    "facility", "airport", "station", "port", "tunnel", "bridge", "road",
    "railway-line", "building", "theater", "theatre", "museum", "palace",
    "hotel", "worship-place", "market", "sports-facility", "park", "zoo",
    "amusement-park",
    # events
    "event", "incident", "natural-disaster", "earthquake", "war",
    "conference", "game", "festival",
    # products and works
    "product", "vehicle", "ship", "aircraft", "aircraft-type", "spaceship",
    "car-make", "work-of-art", "picture", "music", "show",
    "broadcast-program", "publication", "book", "newspaper", "magazine",
    "journal",
    # other named-entity types
    "natural-object", "award", "law", "court-decision", "treaty", "music-key",
    "musical-note", "food-dish", "writing-script", "variable", "program",
    "molecular-physical-entity", "small-molecule", "protein",
    "protein-family", "protein-segment", "amino-acid",
    "macro-molecular-complex", "enzyme", "nucleic-acid", "pathway", "gene",
    "dna-sequence", "cell", "cell-line", "species", "organism", "disease",
    "medical-condition",
)

_STRUCTURAL_LABELS = (
    "multi-sentence", "name", "date-entity", "date-interval", "thing",
    "amr-unknown", "amr-choice", "truth-value", "string-entity",
    "url-entity", "percentage-entity", "phone-number-entity", "email-address-entity",
)

# Bare pronouns parse to their own instance nodes; they carry no retrievable
# content, so they join the default stoplist.
_PRONOUN_LABELS = ("he", "she", "it", "they", "i", "you", "we")

DEFAULT_STOPLIST = frozenset(_ENTITY_TYPE_LABELS + _STRUCTURAL_LABELS + _PRONOUN_LABELS)


@dataclass(frozen=True)
class TraversalMode:
    """How nodes are ordered within the traversal: depth-first, shuffled per
    sentence, or shuffled across the whole document. Random modes are fully
    determined by their seed."""

    kind: str  # 'dfs' | 'local-random' | 'global-random'
    seed: int | None = None

    _KINDS = ("dfs", "local-random", "global-random")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown traversal kind {self.kind!r}")
        if self.kind != "dfs" and self.seed is None:
            raise ValueError(f"{self.kind} traversal requires a seed")

    @classmethod
    def dfs(cls) -> "TraversalMode":
        return cls("dfs")

    @classmethod
    def local_random(cls, seed: int) -> "TraversalMode":
        return cls("local-random", seed)

    @classmethod
    def global_random(cls, seed: int) -> "TraversalMode":
        return cls("global-random", seed)


@dataclass(frozen=True)
class Concept:
    """One distilled concept with its provenance and, after backtrace, the
    character span of its source-document match."""

    text: str
    provenance: str  # 'instance' | 'name' | 'wiki' | 'date'
    sentence_index: int
    source_span: tuple[int, int] | None = None
    label: str | None = None  # originating instance label, for stoplisting


@dataclass(frozen=True)
class ConceptSet:
    """Ordered concepts distilled from one supporting document."""

    concepts: tuple[Concept, ...]
    source_doc: str

    def texts(self) -> list[str]:
        return [c.text for c in self.concepts]

    def word_count(self) -> int:
        return sum(len(c.text.split()) for c in self.concepts)

    def sentence_groups(self) -> list[list[Concept]]:
        """Consecutive runs of concepts sharing a sentence index."""
        groups: list[list[Concept]] = []
        for concept in self.concepts:
            if groups and groups[-1][-1].sentence_index == concept.sentence_index:
                groups[-1].append(concept)
            else:
                groups.append([concept])
        return groups

    def facts_string(self) -> str:
        """Sentence groups joined with '. ', concepts within a group with ', '."""
        return ". ".join(
            ", ".join(c.text for c in group) for group in self.sentence_groups()
        )


@dataclass(frozen=True)
class IdfIndex:
    """Document frequencies for normalized terms over an indexed corpus."""

    doc_count: int
    term_doc_freq: dict[str, int] = field(hash=False)

    def document_fraction(self, text: str) -> float:
        term = normalize_term(text)
        if not term or not self.doc_count:
            return 0.0
        return self.term_doc_freq.get(term, 0) / self.doc_count


@dataclass(frozen=True)
class DistillConfig:
    """Tunable knobs for distillation, loadable from a JSON file."""

    stoplist_add: tuple[str, ...] = ()
    stoplist_remove: tuple[str, ...] = ()
    idf_threshold: float = 0.5
    idf_enabled: bool = False
    min_backtrace_overlap: int = 4
    traversal: str = "dfs"
    seed: int | None = None

    def stoplist(self) -> frozenset[str]:
        return (DEFAULT_STOPLIST | set(self.stoplist_add)) - set(self.stoplist_remove)

    def traversal_mode(self) -> TraversalMode:
        return TraversalMode(self.traversal, self.seed)

    @classmethod
    def from_dict(cls, data: dict) -> "DistillConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown distill config keys: {sorted(unknown)}")
        data = dict(data)
        for key in ("stoplist_add", "stoplist_remove"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "DistillConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "stoplist_add": list(self.stoplist_add),
            "stoplist_remove": list(self.stoplist_remove),
            "idf_threshold": self.idf_threshold,
            "idf_enabled": self.idf_enabled,
            "min_backtrace_overlap": self.min_backtrace_overlap,
            "traversal": self.traversal,
            "seed": self.seed,
        }


def normalize_term(text: str) -> str:
    """Lowercase and strip punctuation for IDF lookups."""
    return " ".join(_TOKEN_RE.findall(text.lower()))


def build_idf_index(docs: list[str]) -> IdfIndex:
    """Count, per normalized term, how many documents contain it."""
    if not docs:
        raise ValueError("cannot build an IDF index over an empty corpus")
    freq: dict[str, int] = {}
    for doc in docs:
        for term in set(_TOKEN_RE.findall(doc.lower())):
            freq[term] = freq.get(term, 0) + 1
    return IdfIndex(doc_count=len(docs), term_doc_freq=freq)


# --- role handlers


def _wiki_value(node: AmrNode) -> str | None:
    """The node's :wiki string, or None when absent or the '-' no-link marker."""
    literal = node.attribute(":wiki")
    if literal is None or literal.text == "-":
        return None
    return literal.text


def handle_name(node: AmrNode, sentence_index: int = 1) -> Concept:
    """Join a name node's :opN literals (ascending N) into one concept."""
    ops: dict[int, str] = {}
    for role, literal in node.attributes:
        match = _OP_ROLE_RE.match(role)
        if match:
            ops[int(match.group(1))] = literal.text
    if 1 not in ops:
        raise DistillError(f"name node {node.variable!r} is missing :op1")
    if sorted(ops) != list(range(1, len(ops) + 1)):
        raise DistillError(
            f"name node {node.variable!r} has non-contiguous op indices {sorted(ops)}"
        )
    text = " ".join(ops[i] for i in range(1, len(ops) + 1))
    return Concept(text, "name", sentence_index)


def handle_wiki(node: AmrNode, sentence_index: int = 1) -> Concept | None:
    """The node's Wikipedia reference with underscores as spaces, or None for
    the '-' no-link marker."""
    value = _wiki_value(node)
    if value is None:
        return None
    return Concept(value.replace("_", " "), "wiki", sentence_index)


def handle_date(node: AmrNode, sentence_index: int = 1) -> Concept | None:
    """Render a date-entity's day/month/year as e.g. '19 April 2024'; bare
    years stay numeric. Returns None when no component is present."""
    parts: list[str] = []
    day = _int_attribute(node, ":day")
    month = _int_attribute(node, ":month")
    year = _int_attribute(node, ":year")
    if day is not None:
        if not 1 <= day <= 31:
            raise DistillError(f"date-entity {node.variable!r} has day {day} outside 1-31")
        parts.append(str(day))
    if month is not None:
        if not 1 <= month <= 12:
            raise DistillError(f"date-entity {node.variable!r} has month {month} outside 1-12")
        parts.append(calendar.month_name[month])
    if year is not None:
        parts.append(str(year))
    if not parts:
        return None
    return Concept(" ".join(parts), "date", sentence_index)


def _int_attribute(node: AmrNode, role: str) -> int | None:
    literal = node.attribute(role)
    if literal is None:
        return None
    try:
        return int(literal.text)
    except ValueError:
        raise DistillError(
            f"{node.variable!r} has non-numeric {role} value {literal.text!r}"
        ) from None


# --- traversal state machine


def _is_role_node(graph: AmrGraph, node: AmrNode) -> bool:
    return (
        node.instance == "name"
        or node.instance == "date-entity"
        or _wiki_value(node) is not None
    )


def _role_contributions(graph: AmrGraph, node: AmrNode, sentence_index: int) -> list[Concept]:
    """Concepts a special-role node adds to the role buffer.

    A name child of a wiki-linked entity contributes nothing: the wiki string
    is the standardized form of the same entity, so it replaces the name and
    duplicates never arise. The decision is structural, which keeps the
    emitted multiset identical under every traversal order.
    """
    out: list[Concept] = []
    if node.instance == "name":
        parent = graph.defining_parent(node.variable)
        parent_wiki = parent is not None and _wiki_value(graph.nodes[parent]) is not None
        if not parent_wiki:
            out.append(handle_name(node, sentence_index))
    wiki = handle_wiki(node, sentence_index)
    if wiki is not None:
        out.append(wiki)
    if node.instance == "date-entity":
        date = handle_date(node, sentence_index)
        if date is not None:
            out.append(date)
    return out


def _run_stream(graph: AmrGraph, stream: list[tuple[int, str]]) -> list[Concept]:
    """Feed (sentence_index, variable) items through the role-buffering loop:
    special-role nodes accumulate, any other node flushes the buffer before
    appending its own instance, and the stream end flushes the remainder."""
    concepts: list[Concept] = []
    role_buffer: list[Concept] = []
    for sentence_index, variable in stream:
        node = graph.nodes[variable]
        if _is_role_node(graph, node):
            role_buffer.extend(_role_contributions(graph, node, sentence_index))
        else:
            if role_buffer:
                concepts.extend(role_buffer)
                role_buffer = []
            concepts.append(
                Concept(node.instance, "instance", sentence_index, label=node.instance)
            )
    concepts.extend(role_buffer)
    return concepts


def _traversal_streams(
    graph: AmrGraph, mode: TraversalMode
) -> list[list[tuple[int, str]]]:
    per_sentence = [
        [(sub.index, variable) for variable in dfs_nodes(sub)]
        for sub in split_sentences(graph)
    ]
    if mode.kind == "dfs":
        return per_sentence
    rng = random.Random(mode.seed)
    if mode.kind == "local-random":
        for sentence in per_sentence:
            rng.shuffle(sentence)
        return per_sentence
    # global-random: one stream over the whole document
    merged = [item for sentence in per_sentence for item in sentence]
    rng.shuffle(merged)
    return [merged]


def concept_format(
    concepts: list[Concept],
    idf: IdfIndex | None = None,
    stoplist: frozenset[str] = DEFAULT_STOPLIST,
    idf_threshold: float = 0.5,
) -> list[Concept]:
    """Drop stoplisted canonical nodes and (with an index) overly common
    concepts; strip sense suffixes like '-01' from instance concepts."""
    out: list[Concept] = []
    for concept in concepts:
        text = concept.text
        if concept.provenance == "instance":
            label = concept.label if concept.label is not None else concept.text
            base = strip_sense(label)
            if label in stoplist or base in stoplist:
                continue
            text = base
        if idf is not None and idf.document_fraction(text) > idf_threshold:
            continue
        out.append(replace(concept, text=text))
    return out


def strip_sense(label: str) -> str:
    """Remove trailing AMR sense tags: 'work-01' -> 'work'."""
    while _SENSE_RE.search(label):
        label = label[:-3]
    return label


def concept_backtrace(
    concepts: list[Concept], source_doc: str, min_overlap: int = 4
) -> list[Concept]:
    """Restore concepts to the source document's surface forms.

    Instance concepts are replaced word-by-word with the source token sharing
    the longest common prefix (at least ``min_overlap`` characters, ties
    broken by earliest position); unmatched concepts keep their AMR form.
    Name/wiki/date concepts pass through, taking the source casing and span
    when an exact case-insensitive match exists. Never drops or adds.
    """
    tokens = [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(source_doc)]
    lowered = source_doc.lower()
    out: list[Concept] = []
    for concept in concepts:
        if concept.provenance == "instance":
            out.append(_backtrace_instance(concept, tokens, min_overlap))
        else:
            at = lowered.find(concept.text.lower())
            if at >= 0:
                end = at + len(concept.text)
                out.append(replace(concept, text=source_doc[at:end], source_span=(at, end)))
            else:
                out.append(concept)
    return out


def _backtrace_instance(
    concept: Concept, tokens: list[tuple[str, int, int]], min_overlap: int
) -> Concept:
    spans: list[tuple[int, int]] = []
    matched_all = True

    def substitute(match: re.Match) -> str:
        nonlocal matched_all
        best = _best_token_match(match.group(0), tokens, min_overlap)
        if best is None:
            matched_all = False
            return match.group(0)
        text, start, end = best
        spans.append((start, end))
        return text

    new_text = _TOKEN_RE.sub(substitute, concept.text)
    if not spans:
        return concept
    span = (min(s for s, _ in spans), max(e for _, e in spans)) if matched_all else None
    return replace(concept, text=new_text, source_span=span)


def _best_token_match(
    word: str, tokens: list[tuple[str, int, int]], min_overlap: int
) -> tuple[str, int, int] | None:
    word_lower = word.lower()
    best: tuple[str, int, int] | None = None
    best_len = 0
    for text, start, end in tokens:
        overlap = _common_prefix_len(word_lower, text.lower())
        if overlap >= min_overlap and overlap > best_len:
            best, best_len = (text, start, end), overlap
    return best


def _common_prefix_len(a: str, b: str) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def distill_concepts(
    graph: AmrGraph,
    source_doc: str,
    idf: IdfIndex | None = None,
    mode: TraversalMode = TraversalMode("dfs"),
    config: DistillConfig | None = None,
) -> ConceptSet:
    """Run the full distillation over one document's AMR graph.

    Sentences are traversed in ``mode`` order, the role buffer consolidates
    name/wiki/date constructs, and the result is formatted and backtraced
    against ``source_doc``. An empty graph yields an empty set.
    """
    config = config or DistillConfig()
    concepts: list[Concept] = []
    for stream in _traversal_streams(graph, mode):
        concepts.extend(_run_stream(graph, stream))
    concepts = concept_format(
        concepts,
        idf=idf,
        stoplist=config.stoplist(),
        idf_threshold=config.idf_threshold,
    )
    concepts = concept_backtrace(concepts, source_doc, config.min_backtrace_overlap)
    return ConceptSet(concepts=tuple(concepts), source_doc=source_doc)
