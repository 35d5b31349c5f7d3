"""Oracle backed by an OpenAI-compatible API.

Thoughts come from a completion model; value labels and trajectory judgments
are single-token requests to a second model, read off the returned token
probabilities. Every response body goes through :class:`ResponseCache`.
"""
from __future__ import annotations

import json
import math
import os
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .. import game24
from ..errors import InvalidThought, MalformedOracleResponse
from ..game24 import PuzzleState
from ..pomdp import LABELS, Thought, ValueLabel
from .cache import ResponseCache, request_digest
from .transport import OpenAICompatClient, Send

PROMPT_NAMES = ("propose", "value", "judge")


def load_prompts(directory: str | Path | None = None) -> dict[str, str]:
    """Bundled templates, with any same-named ``.txt`` in ``directory`` taking over."""
    bundled = resources.files("pot.oracles") / "prompts"
    prompts = {name: (bundled / f"{name}.txt").read_text(encoding="utf-8") for name in PROMPT_NAMES}
    if directory is not None:
        for name in PROMPT_NAMES:
            p = Path(directory) / f"{name}.txt"
            if p.exists():
                prompts[name] = p.read_text(encoding="utf-8")
    return prompts


@dataclass
class LmOracleConfig:
    api_base: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    thought_model: str = "gpt-3.5-turbo-instruct"
    value_model: str = "gpt-4-1106-preview"
    eval_model: str = "gpt-4-1106-preview"
    # "completions" (legacy prompt endpoint) or "chat".
    thought_endpoint: str = "completions"
    judge_endpoint: str = "chat"
    temperature: float = 0.7
    top_logprobs: int = 20
    prompt_dir: str | None = None
    cache_dir: str = ".pot-cache"
    max_retries: int = 3
    timeout: float = 60.0
    debug: bool = False
    prompts: dict = field(default_factory=dict)

    def validate(self) -> None:
        for name in ("thought_model", "value_model", "eval_model"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        for name in ("thought_endpoint", "judge_endpoint"):
            if getattr(self, name) not in ("completions", "chat"):
                raise ValueError(f"{name} must be 'completions' or 'chat'")


def top_token_probs(body: Mapping, endpoint: str) -> dict[str, float]:
    """Probabilities of the alternatives for the first generated token."""
    try:
        choice = body["choices"][0]
        if endpoint == "chat":
            entries = choice["logprobs"]["content"][0]["top_logprobs"]
            pairs = [(e["token"], e["logprob"]) for e in entries]
        else:
            pairs = list(choice["logprobs"]["top_logprobs"][0].items())
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedOracleResponse(f"response has no token logprobs: {exc!r}") from None
    return {tok: math.exp(lp) for tok, lp in pairs}


def response_text(body: Mapping, endpoint: str) -> str:
    try:
        choice = body["choices"][0]
        return choice["message"]["content"] if endpoint == "chat" else choice["text"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedOracleResponse(f"response has no text: {exc!r}") from None


def label_distribution(
    token_probs: Mapping[str, float], labels: Sequence[ValueLabel] = LABELS
) -> dict[ValueLabel, float]:
    """Merge case and whitespace variants of each label token, then renormalize."""
    wanted = {label.value: label for label in labels}
    mass = {label: 0.0 for label in labels}
    for tok, p in token_probs.items():
        label = wanted.get(tok.strip().lower())
        if label is not None:
            mass[label] += p
    total = sum(mass.values())
    if not total > 0:
        raise MalformedOracleResponse(
            f"none of {sorted(wanted)} among top tokens {sorted(token_probs)}"
        )
    return {label: m / total for label, m in mass.items()}


def parse_thought(subproblem: PuzzleState, text: str) -> Thought:
    """Turn one generated line into a validated thought, or raise InvalidThought."""
    line = next((ln for ln in text.strip().splitlines() if ln.strip()), "")
    try:
        claimed, left = game24.parse_move_line(line)
    except ValueError as exc:
        raise InvalidThought(str(exc)) from None
    actual = game24.compute(claimed.a, claimed.op, claimed.b)
    if actual is None or actual != claimed.result:
        raise InvalidThought(f"wrong arithmetic: {line!r}")
    thought = Thought.apply(subproblem, claimed)
    if left is not None and left != thought.result:
        raise InvalidThought(f"claimed left {{{left}}} but the move leaves {{{thought.result}}}")
    return thought


class LmOracle:
    def __init__(
        self,
        config: LmOracleConfig | None = None,
        send: Send | None = None,
        cache: ResponseCache | None = None,
    ):
        self.config = config or LmOracleConfig()
        self.config.validate()
        self.prompts = {**load_prompts(self.config.prompt_dir), **self.config.prompts}
        self.client = OpenAICompatClient(
            self.config.api_base,
            os.environ.get(self.config.api_key_env),
            send=send,
            max_retries=self.config.max_retries,
            timeout=self.config.timeout,
            debug=self.config.debug,
        )
        self.cache = cache or ResponseCache(self.config.cache_dir)

    def _request(
        self, endpoint: str, model: str, prompt: str, max_tokens: int, temperature: float, logprobs: bool,
        sample_index: int = 0, stop: list[str] | None = None,
    ) -> dict:
        if endpoint == "chat":
            payload = {
                "model": model,
                "messages": [{"role": "user", "content": prompt}],
                "max_tokens": max_tokens,
                "temperature": temperature,
            }
            if logprobs:
                payload.update(logprobs=True, top_logprobs=min(self.config.top_logprobs, 20))
            path = "chat/completions"
        else:
            payload = {"model": model, "prompt": prompt, "max_tokens": max_tokens, "temperature": temperature}
            if logprobs:
                payload["logprobs"] = min(self.config.top_logprobs, 5)
            path = "completions"
        if stop:
            payload["stop"] = stop
        digest = request_digest(
            api_base=self.client.api_base, path=path, payload=payload, sample_index=sample_index
        )
        body = self.cache.get_or_fetch(
            digest, lambda: self.client.post(path, payload), meta={"model": model, "path": path}
        )
        try:
            return json.loads(body)
        except ValueError as exc:
            raise MalformedOracleResponse(f"non-JSON response: {exc}") from None

    def propose_thought(
        self, subproblem: PuzzleState, mode: str = "greedy", rng: random.Random | None = None, attempt: int = 0
    ) -> Thought:
        greedy = mode == "greedy" and attempt == 0
        temperature = 0.0 if greedy else self.config.temperature
        # Sampled calls get a fresh key so repeated samples are not collapsed
        # by the cache; the index comes from the caller's seeded generator.
        sample_index = 0 if greedy else (rng or random.Random()).getrandbits(32)
        prompt = self.prompts["propose"].format(input=subproblem)
        body = self._request(
            self.config.thought_endpoint, self.config.thought_model, prompt, 40, temperature, False,
            sample_index=sample_index, stop=["\n"],
        )
        return parse_thought(subproblem, response_text(body, self.config.thought_endpoint))

    def value_label(self, subproblem: PuzzleState) -> dict[ValueLabel, float]:
        prompt = self.prompts["value"].format(input=subproblem)
        body = self._request(self.config.judge_endpoint, self.config.value_model, prompt, 1, 0.0, True)
        return label_distribution(top_token_probs(body, self.config.judge_endpoint))

    def evaluate_trajectory(self, problem: PuzzleState, trajectory: Sequence[Thought]) -> float:
        steps = "\n".join(t.text for t in trajectory)
        prompt = self.prompts["judge"].format(input=problem, steps=steps)
        body = self._request(self.config.judge_endpoint, self.config.eval_model, prompt, 1, 0.0, True)
        dist = label_distribution(
            top_token_probs(body, self.config.judge_endpoint), (ValueLabel.SURE, ValueLabel.IMPOSSIBLE)
        )
        return dist[ValueLabel.SURE]
