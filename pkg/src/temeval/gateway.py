"""OpenAI-compatible chat-completion client with a content-addressed cache.

POSTs ``{base_url}/chat/completions`` with deterministic decoding requested
(temperature 0; servers may ignore it). Replies are cached on disk keyed by
a hash of (model, template identity, filled prompt) so re-running an
unchanged evaluation performs zero network calls. Retries apply only to
429/5xx/timeouts, with exponential backoff plus jitter; auth and other 4xx
failures surface immediately. The API key is read from the environment at
request time and never written to logs or cache records.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"


class GatewayError(Exception):
    """Base class for gateway transport and protocol failures."""


class AuthError(GatewayError):
    """401/403 from the server; never retried."""


class RateLimited(GatewayError):
    """429 persisted beyond the retry budget."""


class ServerError(GatewayError):
    """5xx persisted beyond the retry budget."""


class Timeout(GatewayError):
    """Request timed out beyond the retry budget."""


class MalformedReply(GatewayError):
    """Reply body was not the expected chat-completion JSON shape."""


class ProtocolError(GatewayError):
    """Unexpected non-retryable status (e.g. 400 validation)."""


@dataclass
class GatewayConfig:
    base_url: str
    model_name: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_retries: int = 3
    backoff_base: float = 0.5
    max_in_flight: int = 4
    cache_dir: Path = Path(".temeval_cache")

    def __post_init__(self) -> None:
        self.cache_dir = Path(self.cache_dir)
        if self.timeout <= 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be >= 0, got {self.max_retries}")


@dataclass(frozen=True)
class CacheRecord:
    key: str
    reply: str
    created_at: float
    protocol_status: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "key": self.key,
                "reply": self.reply,
                "created_at": self.created_at,
                "protocol_status": self.protocol_status,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> CacheRecord:
        data = json.loads(text)
        return cls(
            key=data["key"],
            reply=data["reply"],
            created_at=data["created_at"],
            protocol_status=data["protocol_status"],
        )


def cache_key(
    model_name: str, template_name: str, template_version: str, prompt: str
) -> str:
    payload = json.dumps(
        [model_name, template_name, template_version, prompt], ensure_ascii=False
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _record_path(cache_dir: Path, key: str) -> Path:
    return Path(cache_dir) / f"{key}.json"


def _write_record_atomic(cache_dir: Path, record: CacheRecord) -> None:
    cache_dir.mkdir(parents=True, exist_ok=True)
    final = _record_path(cache_dir, record.key)
    tmp = final.with_name(f"{record.key}.{os.getpid()}.{threading.get_ident()}.tmp")
    tmp.write_text(record.to_json(), encoding="utf-8")
    os.replace(tmp, final)


class GatewayClient:
    """Thread-safe client; at most ``max_in_flight`` requests are outstanding."""

    def __init__(self, config: GatewayConfig):
        self.config = config
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)
        self._client = httpx.Client(timeout=config.timeout)
        self._rng = random.Random()

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> GatewayClient:
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def complete(
        self,
        prompt: str,
        template_name: str = "raw",
        template_version: str = "0",
    ) -> str:
        """Return the first choice's message content, from cache if possible."""
        key = cache_key(
            self.config.model_name, template_name, template_version, prompt
        )
        path = _record_path(self.config.cache_dir, key)
        if path.exists():
            return CacheRecord.from_json(path.read_text(encoding="utf-8")).reply
        reply = self._post_with_retries(prompt)
        record = CacheRecord(
            key=key, reply=reply, created_at=time.time(), protocol_status=200
        )
        _write_record_atomic(self.config.cache_dir, record)
        return reply

    def _post_with_retries(self, prompt: str) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        headers = {}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        attempt = 0
        while True:
            failure: GatewayError | None = None
            try:
                with self._semaphore:
                    response = self._client.post(url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                failure = Timeout(f"request to {url} timed out: {exc}")
            except httpx.HTTPError as exc:
                # Transport failures other than timeouts are not retried.
                raise GatewayError(f"request to {url} failed: {exc}") from exc

            if failure is None:
                status = response.status_code
                if status == 200:
                    return _extract_content(response)
                if status in (401, 403):
                    raise AuthError(f"server returned {status}")
                if status == 429:
                    failure = RateLimited("server returned 429")
                elif status >= 500:
                    failure = ServerError(f"server returned {status}")
                else:
                    raise ProtocolError(f"server returned {status}")

            if attempt >= self.config.max_retries:
                raise failure
            delay = self.config.backoff_base * (2**attempt)
            delay += self._rng.uniform(0, self.config.backoff_base)
            logger.debug(
                "retrying after %s (attempt %d/%d, sleeping %.2fs)",
                type(failure).__name__,
                attempt + 1,
                self.config.max_retries,
                delay,
            )
            time.sleep(delay)
            attempt += 1


def _extract_content(response: httpx.Response) -> str:
    try:
        data = response.json()
    except ValueError as exc:
        raise MalformedReply(f"reply body is not JSON: {exc}") from exc
    try:
        content = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedReply("reply JSON lacks choices[0].message.content") from exc
    if not isinstance(content, str):
        raise MalformedReply("choices[0].message.content is not a string")
    return content


def complete(prompt: str, config: GatewayConfig) -> str:
    """One-shot convenience wrapper around :class:`GatewayClient`."""
    with GatewayClient(config) as client:
        return client.complete(prompt)


def purge_cache(cache_dir: Path, older_than: float) -> int:
    """Delete records created strictly more than ``older_than`` seconds ago.

    Non-record files are left alone. Returns the number of removed records;
    raises OSError if ``cache_dir`` does not exist.
    """
    cache_dir = Path(cache_dir)
    if not cache_dir.is_dir():
        raise FileNotFoundError(f"cache directory does not exist: {cache_dir}")
    cutoff = time.time() - older_than
    removed = 0
    for path in sorted(cache_dir.glob("*.json")):
        try:
            record = CacheRecord.from_json(path.read_text(encoding="utf-8"))
        except (ValueError, KeyError):
            continue
        if record.created_at < cutoff:
            path.unlink()
            removed += 1
    return removed
