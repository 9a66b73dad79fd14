"""LLM-judge scoring for multi-ECG answers.

The judge sees only the question, the source reports, and the answer being
scored; reference answers from any generation model are never sent, so the
judge cannot be anchored on them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..client import ChatCompletionClient

JUDGE_PROMPT = (
    "For the given question {question} about multiple ECG-QA, and the report "
    "{reports} corresponding to each ECG, score the answer below, where 0 "
    "means completely incorrect and 5 means completely correct. The answer "
    "is: <{prediction}>."
)

_INT = re.compile(r"-?\d+")


@dataclass(frozen=True)
class JudgeVerdict:
    """score is an integer 0-5, or None when the judge's reply carried no
    usable integer even after one retry."""

    score: int | None
    rationale: str
    model: str

    def __post_init__(self):
        if self.score is not None and not 0 <= self.score <= 5:
            raise ValueError(f"judge score must be in 0..5, got {self.score}")

    @property
    def valid(self) -> bool:
        return self.score is not None


def build_judge_prompt(question: str, reports: list[str], prediction: str) -> str:
    return JUDGE_PROMPT.format(question=question, reports=repr(list(reports)),
                               prediction=prediction)


def _extract_score(reply: str) -> int | None:
    for match in _INT.finditer(reply):
        value = int(match.group())
        if 0 <= value <= 5:
            return value
    return None


def judge_score(question: str, reports: list[str], prediction: str,
                client: ChatCompletionClient, model: str = "judge") -> JudgeVerdict:
    """Score one answer 0-5 with a chat-completion judge.

    A reply without an in-range integer is retried once; a second failure
    yields an invalid verdict (score None) rather than an exception.
    """
    prompt = build_judge_prompt(question, reports, prediction)
    reply = client.complete(prompt, temperature=0.0)
    score = _extract_score(reply)
    if score is None:
        reply = client.complete(prompt, temperature=0.0)
        score = _extract_score(reply)
    return JudgeVerdict(score=score, rationale=reply, model=model)
