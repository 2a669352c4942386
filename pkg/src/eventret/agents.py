"""Extraction agents: rule-based (offline), scripted (tests), and remote HTTP.

Every agent answers the same two tasks, "events" and "relations", and returns
an :class:`AgentReply` of raw candidates. The orchestrator in
:mod:`eventret.extraction` turns candidates into numbered events.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import requests

from .errors import AgentUnavailable, ConfigError, MalformedAgentReply
from .textutil import STOPWORDS, begins_with_cue, is_cjk, split_sentences, strip_asides, tokenize

logger = logging.getLogger(__name__)

TASK_EVENTS = "events"
TASK_RELATIONS = "relations"


@dataclass
class AgentReply:
    """Raw candidates from one agent call.

    events are (trigger, mention) pairs; relations are (head_event_id,
    tail_event_id) pairs referring to the prior events the agent was shown.
    """

    events: list[tuple[str, str]] = field(default_factory=list)
    relations: list[tuple[str, str]] = field(default_factory=list)
    done: bool = False


class Agent(Protocol):
    agent_id: str

    def extract(self, task, doc, prior_events=(), peers=()) -> AgentReply:
        ...


def _trigger_for(sentence: str) -> str | None:
    # CJK tokens are single characters, so the length-3 floor only applies to
    # alphabetic words.
    for token in tokenize(sentence):
        if token.lower() in STOPWORDS:
            continue
        if is_cjk(token) or len(token) >= 3:
            return token
    return None


class RuleBasedAgent:
    """Deterministic offline extractor.

    One event per sentence: the trigger is the first non-stopword token of
    length >= 3 (any CJK character qualifies), the mention is the sentence
    with bracketed asides removed. A causal relation links adjacent events
    when the later sentence opens with a cue word, directed cause -> effect.
    """

    def __init__(self, agent_id: str = "rule"):
        self.agent_id = agent_id

    def extract(self, task, doc, prior_events=(), peers=()) -> AgentReply:
        if task == TASK_EVENTS:
            events = []
            for sentence in split_sentences(doc.text):
                trigger = _trigger_for(sentence)
                mention = strip_asides(sentence)
                if trigger and mention:
                    events.append((trigger, mention))
            return AgentReply(events=events, done=True)
        relations = []
        ordered = list(prior_events)
        for head, tail in zip(ordered, ordered[1:]):
            if begins_with_cue(tail.mention):
                relations.append((head.event_id, tail.event_id))
        return AgentReply(relations=relations, done=True)


class ScriptedAgent:
    """Test double with a fixed payload.

    behavior="constant" always answers the configured payload;
    behavior="union" answers the configured payload merged with everything
    the peers reported, preserving first-seen order.
    """

    def __init__(self, agent_id, events=(), relations=(), behavior="constant", done=False):
        if behavior not in ("constant", "union"):
            raise ValueError(f"unknown scripted behavior {behavior!r}")
        self.agent_id = agent_id
        self.events = [tuple(e) for e in events]
        self.relations = [tuple(r) for r in relations]
        self.behavior = behavior
        self.done = done
        self.calls = 0

    def extract(self, task, doc, prior_events=(), peers=()) -> AgentReply:
        self.calls += 1
        events = list(self.events)
        relations = list(self.relations)
        if self.behavior == "union":
            for response in peers:
                for item in response.payload:
                    if hasattr(item, "trigger"):
                        candidate = (item.trigger, item.mention)
                        if candidate not in events:
                            events.append(candidate)
                    else:
                        candidate = (item.head_event_id, item.tail_event_id)
                        if candidate not in relations:
                            relations.append(candidate)
        if task == TASK_EVENTS:
            return AgentReply(events=events, done=self.done)
        return AgentReply(relations=relations, done=self.done)


class ReplayAgent:
    """Test double that replays a canned sequence of replies, one per call."""

    def __init__(self, agent_id, replies: Sequence[AgentReply]):
        if not replies:
            raise ValueError("ReplayAgent needs at least one reply")
        self.agent_id = agent_id
        self.replies = list(replies)
        self.calls = 0

    def extract(self, task, doc, prior_events=(), peers=()) -> AgentReply:
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


class RemoteAgent:
    """Chat-style agent behind an HTTP endpoint.

    Request body: {task, document, prior_events?, peer_responses?}.
    Response body: {events: [{trigger, mention}], relations:
    [{head, tail, relation?}], done: bool}. Transport failures raise
    AgentUnavailable; schema violations raise MalformedAgentReply, which the
    orchestrator treats as "discard this response for the round".
    """

    def __init__(self, agent_id, url, api_key_env=None, model_name=None, timeout=30.0):
        self.agent_id = agent_id
        self.url = url
        self.api_key_env = api_key_env
        self.model_name = model_name
        self.timeout = timeout

    def extract(self, task, doc, prior_events=(), peers=()) -> AgentReply:
        body = {
            "task": task,
            "document": {"doc_id": doc.doc_id, "title": doc.title, "text": doc.text},
        }
        if self.model_name:
            body["model"] = self.model_name
        if prior_events:
            body["prior_events"] = [
                {"event_id": e.event_id, "trigger": e.trigger, "mention": e.mention}
                for e in prior_events
            ]
        if peers:
            body["peer_responses"] = [_response_payload_json(r) for r in peers]
        headers = {}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        try:
            response = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
            response.raise_for_status()
            payload = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise AgentUnavailable(f"agent {self.agent_id!r} at {self.url}: {exc}") from exc
        return _parse_remote_reply(self.agent_id, payload)


def _response_payload_json(response) -> dict:
    events = []
    relations = []
    for item in response.payload:
        if hasattr(item, "trigger"):
            events.append({"trigger": item.trigger, "mention": item.mention})
        else:
            relations.append({"head": item.head_event_id, "tail": item.tail_event_id})
    return {"agent_id": response.agent_id, "events": events, "relations": relations}


def _parse_remote_reply(agent_id, payload) -> AgentReply:
    if not isinstance(payload, dict):
        raise MalformedAgentReply(f"agent {agent_id!r}: reply is not an object")
    events = []
    for item in payload.get("events", []) or []:
        if not isinstance(item, dict) or "trigger" not in item or "mention" not in item:
            raise MalformedAgentReply(f"agent {agent_id!r}: bad event entry {item!r}")
        events.append((str(item["trigger"]), str(item["mention"])))
    relations = []
    for item in payload.get("relations", []) or []:
        if not isinstance(item, dict) or "head" not in item or "tail" not in item:
            raise MalformedAgentReply(f"agent {agent_id!r}: bad relation entry {item!r}")
        relations.append((str(item["head"]), str(item["tail"])))
    return AgentReply(events=events, relations=relations, done=bool(payload.get("done", False)))


def build_agents(specs: Sequence[dict]) -> list:
    """Instantiate agents from config records {agent_id, kind, url?, ...}.

    Credentials are only ever named via api_key_env; a raw api_key value in
    the config is rejected.
    """
    agents = []
    seen = set()
    for spec in specs:
        agent_id = spec.get("agent_id")
        kind = spec.get("kind")
        if not agent_id or not kind:
            raise ConfigError(f"agent spec needs agent_id and kind: {spec!r}")
        if agent_id in seen:
            raise ConfigError(f"duplicate agent_id {agent_id!r}")
        seen.add(agent_id)
        if "api_key" in spec:
            raise ConfigError(
                f"agent {agent_id!r}: put the key in an environment variable and "
                "reference it with api_key_env"
            )
        if kind == "rule":
            agents.append(RuleBasedAgent(agent_id))
        elif kind == "scripted":
            agents.append(
                ScriptedAgent(
                    agent_id,
                    events=[tuple(e) for e in spec.get("events", [])],
                    relations=[tuple(r) for r in spec.get("relations", [])],
                    behavior=spec.get("behavior", "constant"),
                    done=bool(spec.get("done", False)),
                )
            )
        elif kind == "remote":
            url = spec.get("url")
            if not url:
                raise ConfigError(f"remote agent {agent_id!r} needs a url")
            agents.append(
                RemoteAgent(
                    agent_id,
                    url,
                    api_key_env=spec.get("api_key_env"),
                    model_name=spec.get("model_name"),
                    timeout=float(spec.get("timeout", 30.0)),
                )
            )
        else:
            raise ConfigError(f"unknown agent kind {kind!r}")
    return agents
