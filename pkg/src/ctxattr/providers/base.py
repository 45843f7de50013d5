"""The scored-generation abstraction: sample a response, score a forced one.

Everything downstream needs exactly two capabilities from a language model:
generating a continuation and returning per-token log-probabilities for a
continuation it is forced to produce. All probabilities travel in natural-log
space end to end; long continuations underflow linear space.
"""

from __future__ import annotations

import abc
import math
import re
from dataclasses import dataclass

from ..ablation import render_prompt

MERGE_PROMPT_TEMPLATE = (
    "Please merge the following question and answer into a single statement. "
    'For example, if the question is "What is the capital of France?" and the '
    'answer is "Paris", you should say: "The capital of France is Paris.\n'
    "Question: {question}\n"
    "Answer: {answer}"
)

_MERGE_SLOTS = re.compile(r"\{question\}|\{answer\}")


def fill_merge_prompt(question: str, answer: str, template: str = MERGE_PROMPT_TEMPLATE) -> str:
    return _MERGE_SLOTS.sub(
        lambda m: question if m.group() == "{question}" else answer,
        template,
    )


@dataclass(frozen=True)
class Prompt:
    """A renderable (context, query, template) triple."""

    context_text: str
    query_text: str
    template: str

    def render(self) -> str:
        return render_prompt(self.template, self.context_text, self.query_text)


def rendered(prompt: "Prompt | str") -> str:
    return prompt if isinstance(prompt, str) else prompt.render()


@dataclass(frozen=True)
class ScoredContinuation:
    """Tokens with their log-probabilities, natural-log units."""

    tokens: tuple[str, ...]
    token_log_probs: tuple[float, ...]
    total_log_prob: float

    def __post_init__(self):
        if len(self.tokens) != len(self.token_log_probs):
            raise ValueError("one log-prob per token required")
        if any(lp > 0 or math.isnan(lp) for lp in self.token_log_probs):
            raise ValueError("token log-probs must be finite and <= 0")
        if abs(self.total_log_prob - sum(self.token_log_probs)) > 1e-9:
            raise ValueError("total log-prob must equal the sum of token log-probs")

    @property
    def text(self) -> str:
        return "".join(self.tokens)

    @classmethod
    def from_token_log_probs(cls, tokens, token_log_probs) -> "ScoredContinuation":
        lps = tuple(float(lp) for lp in token_log_probs)
        return cls(tuple(tokens), lps, sum(lps))

    @classmethod
    def spread_total(cls, tokens, total_log_prob: float) -> "ScoredContinuation":
        """Distribute a total evenly over tokens (synthetic providers)."""
        tokens = tuple(tokens)
        if not tokens:
            raise ValueError("need at least one token")
        per = float(total_log_prob) / len(tokens)
        return cls(tokens, tuple([per] * len(tokens)), per * len(tokens))


_TOKEN_CHUNKS = re.compile(r"\S+\s*|\s+")


class ScoredGenerationProvider(abc.ABC):
    """Abstract autoregressive model with generation and echo scoring."""

    @property
    @abc.abstractmethod
    def provider_id(self) -> str:
        """Stable identifier; part of every cache key."""

    @abc.abstractmethod
    def generate(
        self, prompt: Prompt | str, max_tokens: int = 256, seed: int | None = None
    ) -> ScoredContinuation:
        """Sample a continuation of the (rendered) prompt.

        Deterministic for synthetic oracles given the seed; the remote
        implementation decodes greedily when seed is omitted.
        """

    @abc.abstractmethod
    def score_forced(
        self, prompt: Prompt | str, prefix: list[str], continuation: list[str]
    ) -> ScoredContinuation:
        """Log-probabilities of each continuation token after prompt + prefix."""

    def tokenize_response(self, text: str) -> list[str]:
        """Token units for a response that arrived as plain text.

        Used only to define statement boundaries for externally supplied
        responses; scoring sends text over the wire, so any consistent
        whitespace-preserving chunking works.
        """
        return _TOKEN_CHUNKS.findall(text)

    def merge_question_answer(
        self, question: str, answer: str, max_tokens: int = 64, seed: int | None = None
    ) -> str:
        """Produce a self-contained statement from a question/answer pair."""
        merged = self.generate(
            fill_merge_prompt(question, answer), max_tokens=max_tokens, seed=seed
        )
        return merged.text
