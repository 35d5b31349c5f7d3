from __future__ import annotations

import hashlib
import json
import math
import re
import sys
from pathlib import Path

import pytest

from pot import game24
from pot.oracles import LmOracle, LmOracleConfig, ResponseCache

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


def final_input(prompt: str) -> str:
    """The puzzle the prompt asks about: text after the last Input:/Numbers: marker."""
    matches = re.findall(r"(?:Input|Numbers):\s*([^\n]*)", prompt)
    return matches[-1].strip() if matches else ""


def prompt_kind(prompt: str) -> str:
    if "Judge:" in prompt:
        return "judge"
    if prompt.rstrip().endswith("Step:"):
        return "propose"
    return "value"


def request_prompt(payload: dict) -> str:
    if "messages" in payload:
        return payload["messages"][-1]["content"]
    return payload["prompt"]


class FixtureTransport:
    """Serves recorded transcripts keyed by prompt kind and final input; counts calls."""

    def __init__(self, transcripts):
        self.transcripts = transcripts
        self.calls = 0
        self.requests = []

    def __call__(self, url, headers, body):
        self.calls += 1
        payload = json.loads(body)
        self.requests.append((url, headers, payload))
        prompt = request_prompt(payload)
        kind, key = prompt_kind(prompt), final_input(prompt)
        if kind == "value" and url.endswith("/completions") and "chat" not in url:
            kind = "value_completions"
        for fx in self.transcripts:
            if fx["kind"] == kind and fx["input"] == key:
                return 200, json.dumps(fx["response"]).encode()
        return 404, b'{"error": "no fixture"}'


class SolverBackedTransport:
    """Synthetic OpenAI-compatible server whose answers come from the exact solver.

    Thoughts: a legal move picked from the request digest (greedy requests
    get the first solvable move). Value/judge: fixed token probabilities
    favouring the true label. Used to drive whole planning runs offline.
    """

    def __init__(self):
        self.calls = 0

    def __call__(self, url, headers, body):
        self.calls += 1
        payload = json.loads(body)
        prompt = request_prompt(payload)
        kind = prompt_kind(prompt)
        chat = "messages" in payload
        if kind == "propose":
            state = game24.parse_puzzle(final_input(prompt))
            moves = game24.legal_moves(state)
            good = [m for m in moves if game24.solvable(game24.apply_move(state, m))]
            if payload["temperature"] == 0 or not moves:
                pick = (good or moves)[0]
            else:
                h = int.from_bytes(hashlib.sha256(body).digest()[:8], "big")
                pool = good if good and h % 4 else moves
                pick = pool[(h >> 8) % len(pool)]
            text = f" {pick} (left: {game24.apply_move(state, pick)})"
            return 200, _completion(text, chat)
        if kind == "judge":
            steps = prompt.rsplit("Steps:", 1)[1].rsplit("Judge:", 1)[0].strip().splitlines()
            from pot.bench import verify_trajectory

            ok = verify_trajectory(game24.parse_puzzle(final_input(prompt)), steps)
            probs = [(" sure", 0.9), (" impossible", 0.1)] if ok else [(" impossible", 0.95), (" sure", 0.05)]
            return 200, _logprob_body(probs, chat)
        state = game24.parse_puzzle(final_input(prompt))
        if game24.solvable(state):
            probs = [(" sure", 0.7), (" likely", 0.2), (" impossible", 0.1)]
        else:
            probs = [(" impossible", 0.7), (" likely", 0.2), (" sure", 0.1)]
        return 200, _logprob_body(probs, chat)


def _completion(text: str, chat: bool) -> bytes:
    choice = {"index": 0, "finish_reason": "stop"}
    if chat:
        choice["message"] = {"role": "assistant", "content": text}
    else:
        choice["text"] = text
    return json.dumps({"choices": [choice]}).encode()


def _logprob_body(probs, chat: bool) -> bytes:
    if chat:
        top = [{"token": t, "logprob": math.log(p)} for t, p in probs]
        choice = {
            "index": 0,
            "message": {"role": "assistant", "content": probs[0][0]},
            "logprobs": {"content": [{"token": probs[0][0], "logprob": top[0]["logprob"], "top_logprobs": top}]},
        }
    else:
        choice = {"index": 0, "text": probs[0][0], "logprobs": {"top_logprobs": [{t: math.log(p) for t, p in probs}]}}
    return json.dumps({"choices": [choice]}).encode()


@pytest.fixture
def transcripts():
    return json.loads((FIXTURES / "lm_transcripts.json").read_text())


@pytest.fixture
def fixture_transport(transcripts):
    return FixtureTransport(transcripts)


@pytest.fixture
def lm_oracle(fixture_transport, tmp_path):
    cfg = LmOracleConfig(cache_dir=str(tmp_path / "cache"), max_retries=1)
    return LmOracle(cfg, send=fixture_transport, cache=ResponseCache(cfg.cache_dir))


# One line per acceptance criterion, printed at the end of the run whatever
# the capture mode.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
