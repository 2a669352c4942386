import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from conftest import make_doc
from eventret.agents import (
    AgentReply,
    RemoteAgent,
    ReplayAgent,
    RuleBasedAgent,
    ScriptedAgent,
    build_agents,
)
from eventret.errors import AgentUnavailable, ConfigError, MalformedAgentReply
from eventret.extraction import Event, agent_extract


def test_rule_agent_two_sentences():
    # Hand-run of the rule extractor: one event per sentence, trigger is the
    # first non-stopword token of length >= 3, asides are stripped.
    doc = make_doc(text="The army attacked the fort (at dawn). Therefore the town fell quickly.")
    reply = RuleBasedAgent().extract("events", doc)
    assert reply.events == [
        ("army", "The army attacked the fort"),
        ("town", "Therefore the town fell quickly"),
    ]


def test_rule_agent_relations_need_cue():
    doc = make_doc(text="The army attacked the fort. Therefore the town fell. The king slept.")
    agent = RuleBasedAgent()
    events = [
        Event("e1", "d1", "army", "The army attacked the fort"),
        Event("e2", "d1", "town", "Therefore the town fell"),
        Event("e3", "d1", "king", "The king slept"),
    ]
    reply = agent.extract("relations", doc, prior_events=events)
    assert reply.relations == [("e1", "e2")]


def test_rule_agent_is_deterministic():
    doc = make_doc()
    a, b = RuleBasedAgent().extract("events", doc), RuleBasedAgent().extract("events", doc)
    assert a.events == b.events


def test_agent_extract_wraps_response():
    doc = make_doc()
    response = agent_extract(RuleBasedAgent(), doc, peers=[], round_no=0)
    assert response.agent_id == "rule"
    assert response.round == 0
    assert [e.event_id for e in response.payload] == ["e1", "e2"]
    assert all(e.doc_id == doc.doc_id for e in response.payload)


def test_scripted_agent_constant():
    agent = ScriptedAgent("s1", events=[("boom", "It boomed")])
    reply = agent.extract("events", make_doc(), peers=["ignored"])
    assert reply.events == [("boom", "It boomed")]


def test_replay_agent_sequence():
    agent = ReplayAgent("r1", [AgentReply(events=[("a", "A")]), AgentReply(events=[("b", "B")])])
    assert agent.extract("events", make_doc()).events == [("a", "A")]
    assert agent.extract("events", make_doc()).events == [("b", "B")]
    assert agent.extract("events", make_doc()).events == [("b", "B")]  # repeats last
    assert agent.calls == 3


class _Handler(BaseHTTPRequestHandler):
    payload: dict = {}
    requests: list = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        _Handler.requests.append(json.loads(self.rfile.read(length)))
        body = json.dumps(_Handler.payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def http_agent_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Handler.requests = []
    yield f"http://127.0.0.1:{server.server_address[1]}/"
    server.shutdown()


def test_remote_agent_round_trip(http_agent_server):
    _Handler.payload = {
        "events": [{"trigger": "flood", "mention": "The flood came"}],
        "relations": [],
        "done": True,
    }
    agent = RemoteAgent("remote1", http_agent_server, timeout=5.0)
    reply = agent.extract("events", make_doc(), peers=[])
    assert reply.events == [("flood", "The flood came")]
    assert reply.done is True
    sent = _Handler.requests[-1]
    assert sent["task"] == "events"
    assert sent["document"]["doc_id"] == "d1"


def test_remote_agent_sends_prior_events(http_agent_server):
    _Handler.payload = {"events": [], "relations": [{"head": "e1", "tail": "e2"}], "done": False}
    agent = RemoteAgent("remote1", http_agent_server, timeout=5.0)
    prior = [Event("e1", "d1", "a", "A"), Event("e2", "d1", "b", "B")]
    reply = agent.extract("relations", make_doc(), prior_events=prior)
    assert reply.relations == [("e1", "e2")]
    assert _Handler.requests[-1]["prior_events"][0]["event_id"] == "e1"


def test_remote_agent_malformed_reply(http_agent_server):
    _Handler.payload = {"events": [{"oops": 1}]}
    agent = RemoteAgent("remote1", http_agent_server, timeout=5.0)
    with pytest.raises(MalformedAgentReply):
        agent.extract("events", make_doc())


def test_remote_agent_unreachable():
    agent = RemoteAgent("remote1", "http://127.0.0.1:1/", timeout=0.2)
    with pytest.raises(AgentUnavailable):
        agent.extract("events", make_doc())


def test_build_agents_from_specs():
    agents = build_agents([
        {"agent_id": "rule", "kind": "rule"},
        {"agent_id": "s", "kind": "scripted", "events": [["t", "m"]]},
        {"agent_id": "r", "kind": "remote", "url": "http://example.invalid/"},
    ])
    assert [a.agent_id for a in agents] == ["rule", "s", "r"]


def test_build_agents_rejects_inline_api_key():
    with pytest.raises(ConfigError):
        build_agents([{"agent_id": "r", "kind": "remote", "url": "http://x/", "api_key": "nope"}])


def test_build_agents_rejects_duplicates_and_unknown_kind():
    with pytest.raises(ConfigError):
        build_agents([{"agent_id": "a", "kind": "rule"}, {"agent_id": "a", "kind": "rule"}])
    with pytest.raises(ConfigError):
        build_agents([{"agent_id": "a", "kind": "psychic"}])
