"""Chat-completion client and the offline template generator."""

import json
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import httpx

from ..exceptions import ConfigurationError, GenerationError
from .prompt import MAX_MESSAGE_WORDS, parse_prompt

CALL_TO_ACTION = {
    "email": "Open this email's link to review the details at your convenience.",
    "push": "Tap this notification to see how it works for you.",
    "sms": "Reply YES or visit our site to learn more today.",
    "in_app": "Find it under Offers in the app to get started.",
}
_SENTENCE = re.compile(r"(.+?[.!?])(\s|$)")


@dataclass
class ClientConfig:
    mode: str = "offline"
    base_url: str = "http://localhost:8000/v1"
    model: str = "local-model"
    temperature: float = 0.2
    timeout: float = 30.0
    max_retries: int = 2
    api_key_env: str = "FINPERSONA_API_KEY"
    max_concurrency: int = 4

    def __post_init__(self):
        if self.mode not in ("offline", "http"):
            raise ConfigurationError(f"mode must be 'offline' or 'http', got {self.mode!r}")
        if self.max_retries < 0 or self.timeout <= 0 or self.max_concurrency < 1:
            raise ConfigurationError("max_retries >= 0, timeout > 0 and max_concurrency >= 1 are required")


def first_sentence(text):
    m = _SENTENCE.match(text.strip())
    return m.group(1) if m else text.strip()


def offline_generate(prompt):
    """Fill the JSON template from the top-ranked chunk in the prompt."""
    fields, context = parse_prompt(prompt)
    if not context:
        raise GenerationError("prompt has no context chunks")
    cid, text = context[0]
    channel = fields.get("channel", "email")
    words = f"{first_sentence(text)} {CALL_TO_ACTION.get(channel, CALL_TO_ACTION['email'])}".split()
    body = {
        "message": " ".join(words[:MAX_MESSAGE_WORDS]),
        "citations": [cid],
        "product": fields.get("product", ""),
        "channel": channel,
    }
    return json.dumps(body, ensure_ascii=False)


def http_generate(prompt, config, client=None):
    """POST to ``<base_url>/chat/completions``; retries transport failures."""
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(config.api_key_env)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    payload = {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
    }
    url = config.base_url.rstrip("/") + "/chat/completions"
    own = client is None
    client = client or httpx.Client(timeout=config.timeout)
    try:
        last = None
        for attempt in range(config.max_retries + 1):
            try:
                resp = client.post(url, json=payload, headers=headers)
                if resp.status_code >= 500:
                    raise httpx.HTTPStatusError("server error", request=resp.request, response=resp)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last = exc
                if isinstance(exc, httpx.HTTPStatusError) and exc.response.status_code < 500:
                    break
                if attempt < config.max_retries:
                    time.sleep(0.1 * (attempt + 1))
            except (KeyError, IndexError, ValueError) as exc:
                raise GenerationError(f"malformed completion response: {exc}") from exc
        raise GenerationError(f"request failed after {config.max_retries + 1} attempts: {last}")
    finally:
        if own:
            client.close()


def generate(prompt, config=None):
    config = config or ClientConfig()
    if config.mode == "offline":
        return offline_generate(prompt)
    return http_generate(prompt, config)


def generate_many(prompts, config=None):
    """Generate for every prompt, preserving order.

    Returns a list of raw strings or :class:`GenerationError` instances.
    HTTP requests run with at most ``max_concurrency`` in flight.
    """
    config = config or ClientConfig()

    def one(p):
        try:
            return generate(p, config)
        except GenerationError as exc:
            return exc

    if config.mode == "offline" or config.max_concurrency == 1:
        return [one(p) for p in prompts]
    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        return list(pool.map(one, prompts))
