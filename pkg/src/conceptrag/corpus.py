"""Question-answer-document datasets: JSONL ingestion, screening, grouping.

One record per line:
``{"question": str, "answers": [str], "s_pop": int?, "docs":
[{"text": str, "hasanswer": bool, "amr": str?}]}``; unknown fields are
ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class DatasetError(ValueError):
    """A dataset file or record is malformed; messages carry line numbers."""


@dataclass(frozen=True)
class SupportDoc:
    text: str
    hasanswer: bool
    amr: str | None = None


@dataclass(frozen=True)
class QadPair:
    """One question with its gold answers and K supporting documents."""

    question: str
    gold_answers: tuple[str, ...]
    documents: tuple[SupportDoc, ...]
    s_pop: int | None = None

    @property
    def k(self) -> int:
        return len(self.documents)

    def to_dict(self) -> dict:
        record: dict = {
            "question": self.question,
            "answers": list(self.gold_answers),
            "docs": [
                {"text": d.text, "hasanswer": d.hasanswer, **({"amr": d.amr} if d.amr else {})}
                for d in self.documents
            ],
        }
        if self.s_pop is not None:
            record["s_pop"] = self.s_pop
        return record


def _pair_from_dict(data: dict, where: str) -> QadPair:
    for key in ("question", "answers", "docs"):
        if key not in data:
            raise DatasetError(f"{where}: missing required field {key!r}")
    answers = tuple(str(a) for a in data["answers"])
    if not answers or any(not a for a in answers):
        raise DatasetError(f"{where}: answers must be a non-empty list of non-empty strings")
    docs = []
    for i, doc in enumerate(data["docs"], start=1):
        if "text" not in doc or "hasanswer" not in doc:
            raise DatasetError(f"{where}: doc {i} needs 'text' and 'hasanswer'")
        if not doc["text"]:
            raise DatasetError(f"{where}: doc {i} has empty text")
        docs.append(SupportDoc(doc["text"], bool(doc["hasanswer"]), doc.get("amr")))
    if not docs:
        raise DatasetError(f"{where}: at least one supporting document is required")
    s_pop = data.get("s_pop")
    return QadPair(str(data["question"]), answers, tuple(docs), s_pop)


def load_dataset(path: str | Path) -> list[QadPair]:
    """Read a JSONL dataset; blank lines are skipped, malformed lines are
    reported with their 1-based line number."""
    pairs: list[QadPair] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            pairs.append(_pair_from_dict(data, f"line {lineno}"))
    return pairs


def save_dataset(pairs: list[QadPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for pair in pairs:
            handle.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")


def screen_pairs(
    pairs: list[QadPair],
    require_all_hasanswer: bool = True,
    s_pop_max: int | None = None,
) -> list[QadPair]:
    """Keep pairs whose documents all contain an answer and, when a cap is
    given, whose subject is long-tail (s_pop below the cap). Pairs without an
    s_pop value are retained under any cap."""
    kept = []
    for pair in pairs:
        if require_all_hasanswer and not all(d.hasanswer for d in pair.documents):
            continue
        if s_pop_max is not None and pair.s_pop is not None and pair.s_pop >= s_pop_max:
            continue
        kept.append(pair)
    return kept


def group_by_k(pairs: list[QadPair]) -> tuple[dict[int, list[QadPair]], list[tuple[str, int]]]:
    """Partition pairs by document count. Returns the groups and a stats
    table of counts for K=1..10 plus a '>10' overflow bucket."""
    groups: dict[int, list[QadPair]] = {}
    for pair in pairs:
        groups.setdefault(pair.k, []).append(pair)
    rows: list[tuple[str, int]] = [(str(k), len(groups.get(k, []))) for k in range(1, 11)]
    overflow = sum(len(v) for k, v in groups.items() if k > 10)
    rows.append((">10", overflow))
    return groups, rows


def format_stats_tsv(rows: list[tuple[str, int]]) -> str:
    lines = ["K\tpairs"]
    lines.extend(f"{label}\t{count}" for label, count in rows)
    return "\n".join(lines) + "\n"
