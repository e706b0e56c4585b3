"""Episodic trajectory and long-term knowledge store.

The trajectory is the append-only per-run history fed back to the planner;
the knowledge store is an immutable document collection queried once per
run by deterministic token-overlap retrieval.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, IO

from .errors import LabgateError

_TOKEN_RE = re.compile(r"[0-9a-z]+")


class NonMonotonicStep(LabgateError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"trajectory step must be {expected}, got {got}")


@dataclass(frozen=True)
class TrajectoryEntry:
    t: int
    state: str
    action_summary: str
    observation: str
    signal_after: dict[str, Any]


class Trajectory:
    """Append-only run history with strictly increasing step indices."""

    def __init__(self) -> None:
        self._entries: list[TrajectoryEntry] = []

    def append(self, entry: TrajectoryEntry) -> None:
        expected = self._entries[-1].t + 1 if self._entries else 0
        if entry.t != expected:
            raise NonMonotonicStep(expected, entry.t)
        self._entries.append(entry)

    def window(self, n: int) -> list[TrajectoryEntry]:
        """Most recent min(n, len) entries, oldest first."""
        if n <= 0:
            return []
        return list(self._entries[-n:])

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, idx: int) -> TrajectoryEntry:
        return self._entries[idx]


@dataclass(frozen=True)
class KnowledgeDoc:
    id: str
    title: str
    body: str
    tags: tuple[str, ...] = ()


def _normalize(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


class KnowledgeStore:
    """Immutable after load; safe for concurrent read-only access."""

    def __init__(self, docs: list[KnowledgeDoc] | None = None):
        self._docs: dict[str, KnowledgeDoc] = {}
        for doc in docs or []:
            if doc.id in self._docs:
                raise LabgateError(f"duplicate knowledge doc id {doc.id!r}")
            self._docs[doc.id] = doc

    @classmethod
    def load(cls, source: str | bytes | IO) -> "KnowledgeStore":
        if hasattr(source, "read"):
            source = source.read()
        data = json.loads(source)
        return cls(
            [
                KnowledgeDoc(
                    id=str(d["id"]),
                    title=str(d.get("title", "")),
                    body=str(d.get("body", "")),
                    tags=tuple(d.get("tags", [])),
                )
                for d in data.get("docs", [])
            ]
        )

    def get(self, doc_id: str) -> KnowledgeDoc | None:
        return self._docs.get(doc_id)

    def subset(self, doc_ids: list[str]) -> "KnowledgeStore":
        return KnowledgeStore([self._docs[i] for i in doc_ids if i in self._docs])

    def retrieve(self, query: str, k: int) -> list[KnowledgeDoc]:
        """Top-k docs by descending token overlap, ties by ascending doc id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query_tokens = _normalize(query)
        scored = []
        for doc in self._docs.values():
            doc_tokens = _normalize(f"{doc.title} {' '.join(doc.tags)} {doc.body}")
            score = len(query_tokens & doc_tokens)
            scored.append((-score, doc.id, doc))
        scored.sort(key=lambda item: (item[0], item[1]))
        return [doc for _, _, doc in scored[:k]]

    def __len__(self) -> int:
        return len(self._docs)


def retrieve(store: KnowledgeStore, query: str, k: int) -> list[KnowledgeDoc]:
    return store.retrieve(query, k)


def window(trajectory: Trajectory, n: int) -> list[TrajectoryEntry]:
    return trajectory.window(n)
