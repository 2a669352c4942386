"""Exchange-then-reflection event and relation extraction.

Round 0 is independent extraction. Each exchange round broadcasts every
peer's latest response to every agent, which then refines its answer. One
configured agent reflects over the collected insights until it signals done,
repeats itself, or hits the iteration cap. Events and relations run as two
separate phases; the relation phase sees the final events as prior input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .agents import TASK_EVENTS, TASK_RELATIONS, AgentReply
from .errors import AgentUnavailable, ExtractionFailed, MalformedAgentReply
from .jsonl import iter_records, write_records
from .textutil import first_content_token, split_sentences

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Event:
    event_id: str
    doc_id: str
    trigger: str
    mention: str


@dataclass(frozen=True)
class EventRelation:
    doc_id: str
    head_event_id: str
    tail_event_id: str
    relation: str = "Causal"


@dataclass
class AgentResponse:
    agent_id: str
    round: int
    payload: list
    done: bool = False


@dataclass
class ExrConfig:
    exchange_rounds: int = 1
    max_reflect_iters: int = 3
    reflector_agent_id: str = "rule"


@dataclass
class ExtractionRecord:
    doc_id: str
    events: list[Event]
    relations: list[EventRelation]
    transcript: list[AgentResponse] = field(default_factory=list)


def _reply_to_payload(reply: AgentReply, task: str, doc_id: str) -> list:
    if task == TASK_EVENTS:
        return [
            Event(event_id=f"e{i}", doc_id=doc_id, trigger=trigger, mention=mention)
            for i, (trigger, mention) in enumerate(reply.events, start=1)
            if trigger and mention
        ]
    return [
        EventRelation(doc_id=doc_id, head_event_id=head, tail_event_id=tail)
        for head, tail in reply.relations
    ]


def agent_extract(agent, doc, peers, *, task=TASK_EVENTS, prior_events=(), round_no=0):
    """Run one agent call and wrap the reply in an AgentResponse.

    AgentUnavailable and MalformedAgentReply propagate; the caller decides
    whether to retry or drop the agent for the round.
    """
    reply = agent.extract(task, doc, prior_events=prior_events, peers=list(peers))
    payload = _reply_to_payload(reply, task, doc.doc_id)
    return AgentResponse(agent_id=agent.agent_id, round=round_no, payload=payload, done=reply.done)


def exchange(doc, agents, rounds, *, task=TASK_EVENTS, prior_events=(), transcript=None):
    """Round 0 independent extraction, then `rounds` broadcast-and-refine rounds.

    Returns the latest response per agent, sorted by agent_id. An agent that
    fails (or answers malformed) in a round keeps its previous response; if no
    agent ever answers, raises ExtractionFailed.
    """
    if not agents:
        raise ExtractionFailed(f"doc {doc.doc_id!r}: no agents configured")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")

    latest: dict[str, AgentResponse] = {}
    for round_no in range(rounds + 1):
        current = sorted(latest.values(), key=lambda r: r.agent_id)
        for agent in agents:
            peers = [r for r in current if r.agent_id != agent.agent_id] if round_no else []
            try:
                response = agent_extract(
                    agent, doc, peers, task=task, prior_events=prior_events, round_no=round_no
                )
            except (AgentUnavailable, MalformedAgentReply) as exc:
                logger.warning("doc %s round %d: dropping %s (%s)", doc.doc_id, round_no, agent.agent_id, exc)
                continue
            latest[agent.agent_id] = response
            if transcript is not None:
                transcript.append(response)
        if round_no == 0 and not latest:
            raise ExtractionFailed(f"doc {doc.doc_id!r}: every agent failed round 0")
    return sorted(latest.values(), key=lambda r: r.agent_id)


def _payload_key(item):
    if isinstance(item, Event):
        return ("event", item.trigger.lower(), item.mention.lower())
    return ("relation", item.head_event_id, item.tail_event_id, item.relation)


def dedupe_events(events, doc_id) -> list[Event]:
    """Drop duplicate (trigger, mention) pairs and renumber e1, e2, ..."""
    seen = set()
    out = []
    for event in events:
        key = (event.trigger.lower(), event.mention.lower())
        if key in seen:
            continue
        seen.add(key)
        out.append(
            Event(event_id=f"e{len(out) + 1}", doc_id=doc_id, trigger=event.trigger, mention=event.mention)
        )
    return out


def _dedupe_payload(payload, task, doc_id):
    if task == TASK_EVENTS:
        return dedupe_events(payload, doc_id)
    seen = set()
    out = []
    for rel in payload:
        key = (rel.head_event_id, rel.tail_event_id, rel.relation)
        if key in seen:
            continue
        seen.add(key)
        out.append(rel)
    return out


def reflect(doc, insights, config: ExrConfig, *, agents_by_id, task=TASK_EVENTS,
            prior_events=(), start_round=1, transcript=None):
    """Iterate the reflector over the insights until done or the cap.

    "Done" means the agent signaled it, or two consecutive iterations returned
    identical payloads. The last payload is returned de-duplicated and, for
    events, renumbered.
    """
    if not insights:
        raise ValueError("reflect needs at least one insight response")
    reflector = agents_by_id.get(config.reflector_agent_id)
    if reflector is None:
        raise ValueError(f"reflector {config.reflector_agent_id!r} is not a configured agent")

    previous: AgentResponse | None = None
    for iteration in range(config.max_reflect_iters):
        peers = list(insights) + ([previous] if previous is not None else [])
        try:
            response = agent_extract(
                reflector, doc, peers, task=task, prior_events=prior_events,
                round_no=start_round + iteration,
            )
        except (AgentUnavailable, MalformedAgentReply) as exc:
            logger.warning("doc %s reflect iter %d: %s", doc.doc_id, iteration, exc)
            continue
        if transcript is not None:
            transcript.append(response)
        keys = [_payload_key(item) for item in response.payload]
        if response.done:
            previous = response
            break
        if previous is not None and keys == [_payload_key(i) for i in previous.payload]:
            previous = response
            break
        previous = response
    if previous is None:
        raise ExtractionFailed(
            f"doc {doc.doc_id!r}: reflector failed all {config.max_reflect_iters} attempts"
        )
    return _dedupe_payload(previous.payload, task, doc.doc_id)


def _fallback_event(doc) -> Event:
    trigger = first_content_token(doc.text) or "event"
    sentences = split_sentences(doc.text)
    mention = sentences[0] if sentences else doc.text.strip()
    return Event(event_id="e1", doc_id=doc.doc_id, trigger=trigger, mention=mention)


def extract_document(doc, agents, config: ExrConfig) -> ExtractionRecord:
    """Full ExR extraction of one document: events phase then relations phase.

    Relations with endpoints that do not resolve to extracted events are
    dropped with a warning. A document that yields zero events gets one
    fallback pseudo-event so it stays representable downstream.
    """
    agents_by_id = {a.agent_id: a for a in agents}
    transcript: list[AgentResponse] = []

    insights = exchange(doc, agents, config.exchange_rounds, task=TASK_EVENTS, transcript=transcript)
    events = reflect(
        doc, insights, config, agents_by_id=agents_by_id, task=TASK_EVENTS,
        start_round=config.exchange_rounds + 1, transcript=transcript,
    )
    if not events:
        events = [_fallback_event(doc)]
        logger.warning("doc %s: no events extracted, using fallback pseudo-event", doc.doc_id)

    rel_insights = exchange(
        doc, agents, config.exchange_rounds, task=TASK_RELATIONS,
        prior_events=events, transcript=transcript,
    )
    relations = reflect(
        doc, rel_insights, config, agents_by_id=agents_by_id, task=TASK_RELATIONS,
        prior_events=events, start_round=config.exchange_rounds + 1, transcript=transcript,
    )

    known = {e.event_id for e in events}
    kept = []
    for rel in relations:
        if rel.head_event_id == rel.tail_event_id:
            logger.warning("doc %s: dropping self-relation on %s", doc.doc_id, rel.head_event_id)
            continue
        if rel.head_event_id not in known or rel.tail_event_id not in known:
            logger.warning(
                "doc %s: dropping relation with unknown endpoint (%s -> %s)",
                doc.doc_id, rel.head_event_id, rel.tail_event_id,
            )
            continue
        kept.append(rel)

    return ExtractionRecord(doc_id=doc.doc_id, events=events, relations=kept, transcript=transcript)


def extract_corpus(corpus, agents, config: ExrConfig) -> list[ExtractionRecord]:
    return [extract_document(doc, agents, config) for doc in corpus.documents]


def write_extraction_records(path, records) -> None:
    """One record per line, keyed by doc_id. Transcripts are not persisted."""
    write_records(
        path,
        [
            {
                "doc_id": r.doc_id,
                "events": [
                    {"event_id": e.event_id, "trigger": e.trigger, "mention": e.mention}
                    for e in r.events
                ],
                "relations": [
                    {"head": rel.head_event_id, "tail": rel.tail_event_id, "relation": rel.relation}
                    for rel in r.relations
                ],
            }
            for r in records
        ],
    )


def read_extraction_records(path) -> list[ExtractionRecord]:
    records = []
    for _, raw in iter_records(path):
        doc_id = raw["doc_id"]
        events = [
            Event(event_id=e["event_id"], doc_id=doc_id, trigger=e["trigger"], mention=e["mention"])
            for e in raw.get("events", [])
        ]
        relations = [
            EventRelation(
                doc_id=doc_id,
                head_event_id=rel["head"],
                tail_event_id=rel["tail"],
                relation=rel.get("relation", "Causal"),
            )
            for rel in raw.get("relations", [])
        ]
        records.append(ExtractionRecord(doc_id=doc_id, events=events, relations=relations))
    return records
