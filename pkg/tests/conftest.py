from __future__ import annotations

import random

import pytest
from hypothesis import strategies as st

from multiparse.agents import Agent, AgentDescriptor, AgentRegistry, StubAgent


def stub(agent_id, scores=None, default=0.0, intent=None, has_preview=True) -> StubAgent:
    return StubAgent(AgentDescriptor(agent_id, intent or agent_id, has_preview), scores or {}, default)


class HashAgent(Agent):
    """Pseudo-random but reproducible confidence per (seed, agent, fragment)."""

    def __init__(self, agent_id: str, seed, scale: float = 1.0):
        super().__init__(AgentDescriptor(agent_id, agent_id))
        self.seed = seed
        self.scale = scale

    def confidence(self, u):
        return self.scale * random.Random(f"{self.seed}|{self.id}|{u.normalized}").random()


def hash_registry(seed, n_agents: int = 3, scale: float = 1.0) -> AgentRegistry:
    return AgentRegistry(HashAgent(f"agent{i}", seed, scale) for i in range(n_agents))


WORDS = [
    "book", "a", "hotel", "flight", "to", "nyc", "list", "flights", "fares", "from",
    "boston", "show", "me", "the", "cab", "plot", "it", "data", "send", "email",
]
CONNECTORS = [" and ", ", ", " then ", ". ", " and then ", ", and ", " when ", " before ", "; "]

clauses = st.lists(st.sampled_from(WORDS), min_size=1, max_size=4).map(" ".join)


@st.composite
def utterance_texts(draw, max_clauses: int = 3):
    parts = draw(st.lists(clauses, min_size=1, max_size=max_clauses))
    text = parts[0]
    for part in parts[1:]:
        text += draw(st.sampled_from(CONNECTORS)) + part
    if draw(st.booleans()):
        text = "first " + text
    if draw(st.booleans()):
        text += draw(st.sampled_from([".", "?", "!"]))
    return text


def random_utterance_text(rng: random.Random, max_clauses: int = 3, min_clauses: int = 1) -> str:
    n = rng.randint(min_clauses, max_clauses)
    parts = [" ".join(rng.choice(WORDS) for _ in range(rng.randint(1, 4))) for _ in range(n)]
    text = parts[0]
    for part in parts[1:]:
        text += rng.choice(CONNECTORS) + part
    if rng.random() < 0.3:
        text = "first " + text
    if rng.random() < 0.5:
        text += rng.choice([".", "?", "!"])
    return text


# -- acceptance summary -------------------------------------------------------

_acceptance: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(id, title): exit criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_acceptance", None)
    if marker is None:
        return
    ac_id, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _acceptance[ac_id] = (title, report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report._acceptance = (marker.kwargs["id"], marker.kwargs["title"])


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for ac_id in sorted(_acceptance, key=lambda k: int(k[2:])):
        title, outcome = _acceptance[ac_id]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {ac_id}  {title}")
