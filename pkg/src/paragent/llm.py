"""Chat-completion providers with tool calling.

Two implementations behind one duck-typed interface (`complete(request)`):
an HTTP client speaking the OpenAI-compatible wire format, and a scripted
provider that replays canned responses for offline, reproducible runs.
"""
from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import requests

from .graph import Message, ToolCall


class ProviderError(Exception):
    """Base class for provider failures."""


class InvalidRequest(ProviderError):
    pass


class ProviderUnreachable(ProviderError):
    pass


class SchemaViolation(ProviderError):
    """The provider emitted a tool call not matching any bound schema."""


class NoScriptMatch(ProviderError):
    """The scripted provider found no entry matching the request."""


PARAM_TYPES = ("string", "number", "integer", "boolean")


@dataclass
class ParamSpec:
    type: str
    description: str = ""
    required: bool = False


@dataclass
class ToolSchema:
    """The binding contract for one callable tool."""

    name: str
    description: str
    parameters: dict[str, ParamSpec] = field(default_factory=dict)


@dataclass
class ProviderRequest:
    model: str
    messages: list[Message]
    tools: list[ToolSchema] = field(default_factory=list)
    max_parallel_tool_calls: Optional[int] = None


def validate_request(request: ProviderRequest) -> None:
    if not request.messages:
        raise InvalidRequest("request has no messages")
    non_system = [m for m in request.messages if m.role != "system"]
    if not non_system or non_system[0].role != "user":
        raise InvalidRequest("first non-system message must have role=user")
    names = [t.name for t in request.tools]
    if len(names) != len(set(names)):
        raise InvalidRequest("tool names must be unique per request")
    for schema in request.tools:
        if not schema.name:
            raise InvalidRequest("tool schema with empty name")
        for pname, spec in schema.parameters.items():
            if spec.type not in PARAM_TYPES:
                raise InvalidRequest(f"tool {schema.name!r} param {pname!r} has bad type {spec.type!r}")
    if request.max_parallel_tool_calls is not None and request.max_parallel_tool_calls < 1:
        raise InvalidRequest("max_parallel_tool_calls must be positive when set")


def check_arguments(schema: ToolSchema, arguments: dict) -> list[str]:
    """Return a list of problems with `arguments` against `schema` (empty = valid)."""
    problems = []
    for pname, spec in schema.parameters.items():
        if spec.required and pname not in arguments:
            problems.append(f"missing required argument {pname!r}")
    for pname, value in arguments.items():
        spec = schema.parameters.get(pname)
        if spec is None:
            problems.append(f"unexpected argument {pname!r}")
            continue
        if not _type_ok(spec.type, value):
            problems.append(f"argument {pname!r} should be {spec.type}, got {type(value).__name__}")
    return problems


def _type_ok(expected: str, value) -> bool:
    if expected == "string":
        return isinstance(value, str)
    if expected == "boolean":
        return isinstance(value, bool)
    if expected == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if expected == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return False


# ---------------------------------------------------------------------------
# Wire format (OpenAI-compatible chat-completions JSON body)

def encode_wire(request: ProviderRequest) -> bytes:
    """Encode a validated request as a chat-completions JSON body."""
    validate_request(request)
    body: dict = {
        "model": request.model,
        "messages": [_message_to_wire(m) for m in request.messages],
    }
    if request.tools:
        body["tools"] = [_schema_to_wire(t) for t in request.tools]
    if request.max_parallel_tool_calls is not None:
        body["max_parallel_tool_calls"] = request.max_parallel_tool_calls
    return json.dumps(body).encode("utf-8")


def decode_wire(data: bytes) -> ProviderRequest:
    body = json.loads(data.decode("utf-8"))
    return ProviderRequest(
        model=body["model"],
        messages=[_message_from_wire(m) for m in body["messages"]],
        tools=[_schema_from_wire(t) for t in body.get("tools", [])],
        max_parallel_tool_calls=body.get("max_parallel_tool_calls"),
    )


def _message_to_wire(message: Message) -> dict:
    obj: dict = {"role": message.role, "content": message.content}
    if message.tool_calls:
        obj["tool_calls"] = [
            {
                "id": call.id,
                "type": "function",
                "function": {
                    "name": call.name,
                    # arguments ride the wire as a JSON-encoded string
                    "arguments": json.dumps(call.arguments, separators=(",", ":")),
                },
            }
            for call in message.tool_calls
        ]
    if message.tool_call_id is not None:
        obj["tool_call_id"] = message.tool_call_id
    if message.agent_name is not None:
        obj["name"] = message.agent_name
    return obj


def _message_from_wire(obj: dict) -> Message:
    calls = [
        ToolCall(
            id=c["id"],
            name=c["function"]["name"],
            arguments=json.loads(c["function"]["arguments"] or "{}"),
        )
        for c in obj.get("tool_calls") or []
    ]
    return Message(
        role=obj["role"],
        content=obj.get("content") or "",
        tool_calls=calls,
        tool_call_id=obj.get("tool_call_id"),
        agent_name=obj.get("name"),
    )


def _schema_to_wire(schema: ToolSchema) -> dict:
    properties = {
        pname: {"type": spec.type, "description": spec.description}
        for pname, spec in schema.parameters.items()
    }
    required = [pname for pname, spec in schema.parameters.items() if spec.required]
    return {
        "type": "function",
        "function": {
            "name": schema.name,
            "description": schema.description,
            "parameters": {"type": "object", "properties": properties, "required": required},
        },
    }


def _schema_from_wire(obj: dict) -> ToolSchema:
    fn = obj["function"]
    params = fn.get("parameters", {})
    required = set(params.get("required", []))
    return ToolSchema(
        name=fn["name"],
        description=fn.get("description", ""),
        parameters={
            pname: ParamSpec(
                type=prop.get("type", "string"),
                description=prop.get("description", ""),
                required=pname in required,
            )
            for pname, prop in params.get("properties", {}).items()
        },
    )


# ---------------------------------------------------------------------------
# Scripted provider

@dataclass
class ScriptEntry:
    """One canned response plus the predicate that selects it.

    Predicates: `contains` matches against the content of the last user or
    tool message; `system_contains` against the system message (distinguishes
    agents sharing one provider); `step` against the 0-based call index. All
    present predicates must hold. Entries are tried in order; first match wins.
    """

    response: Message
    contains: Optional[str] = None
    system_contains: Optional[str] = None
    step: Optional[int] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScriptEntry":
        match = data.get("match", {})
        resp = data["response"]
        calls = [
            ToolCall(id=c.get("id", ""), name=c["name"], arguments=dict(c.get("arguments", {})))
            for c in resp.get("tool_calls", [])
        ]
        return cls(
            response=Message(role="assistant", content=resp.get("content", ""), tool_calls=calls),
            contains=match.get("contains"),
            system_contains=match.get("system_contains"),
            step=match.get("step"),
        )


def load_script(path) -> list[ScriptEntry]:
    """Load an ordered script file (UTF-8 JSON array of entries)."""
    raw = Path(path).read_text(encoding="utf-8")
    return parse_script(raw)


def parse_script(text: str) -> list[ScriptEntry]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("script must be a JSON array of entries")
    return [ScriptEntry.from_dict(entry) for entry in data]


class ScriptedProvider:
    """Deterministic provider replaying an ordered script.

    Safe for concurrent complete() calls: the step cursor is the only shared
    state and is guarded by a lock; content predicates do not depend on call
    order. When max_parallel_tool_calls is set, responses are truncated to at
    most that many calls, reproducing provider-side call caps offline.
    """

    def __init__(self, entries: list[ScriptEntry], max_parallel_tool_calls: Optional[int] = None,
                 model: str = "scripted"):
        self.entries = list(entries)
        self.max_parallel_tool_calls = max_parallel_tool_calls
        self.model = model
        self._step = 0
        self._lock = threading.Lock()

    def complete(self, request: ProviderRequest) -> Message:
        validate_request(request)
        with self._lock:
            step = self._step
            self._step += 1
        entry = self._find(request, step)
        if entry is None:
            raise NoScriptMatch(f"no script entry matches call #{step}")
        calls = [
            replace(call, id=call.id or f"call{step}_{i}")
            for i, call in enumerate(entry.response.tool_calls)
        ]
        cap = request.max_parallel_tool_calls or self.max_parallel_tool_calls
        if cap is not None and len(calls) > cap:
            calls = calls[:cap]
        message = Message(role="assistant", content=entry.response.content, tool_calls=calls)
        _check_response(message, request)
        return message

    def _find(self, request: ProviderRequest, step: int) -> Optional[ScriptEntry]:
        last = next((m for m in reversed(request.messages) if m.role in ("user", "tool")), None)
        system = next((m for m in request.messages if m.role == "system"), None)
        for entry in self.entries:
            if entry.step is not None and entry.step != step:
                continue
            if entry.contains is not None and entry.contains not in (last.content if last else ""):
                continue
            if entry.system_contains is not None and entry.system_contains not in (
                system.content if system else ""
            ):
                continue
            return entry
        return None


def _check_response(message: Message, request: ProviderRequest) -> None:
    schemas = {t.name: t for t in request.tools}
    for call in message.tool_calls:
        schema = schemas.get(call.name)
        if schema is None:
            raise SchemaViolation(f"tool call {call.name!r} matches no bound schema")
        problems = check_arguments(schema, call.arguments)
        if problems:
            raise SchemaViolation(f"tool call {call.name!r}: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# HTTP provider

class HttpProvider:
    """Client for an OpenAI-compatible chat-completions endpoint.

    The base URL and bearer token come from AGENT_BASE_URL / AGENT_API_KEY
    when not given explicitly. No retries: a flaky endpoint should surface as
    a failure, not a silent slowdown.
    """

    def __init__(self, base_url: Optional[str] = None, model: str = "gpt-4o-mini",
                 api_key: Optional[str] = None, timeout: float = 120.0,
                 max_parallel_tool_calls: Optional[int] = None):
        self.base_url = os.environ.get("AGENT_BASE_URL", base_url)
        if not self.base_url:
            raise InvalidRequest("http provider requires a base URL")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("AGENT_API_KEY")
        self.timeout = timeout
        self.max_parallel_tool_calls = max_parallel_tool_calls

    def complete(self, request: ProviderRequest) -> Message:
        body = encode_wire(request)
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = self.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = requests.post(url, data=body, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            payload = resp.json()
        except requests.RequestException as exc:
            raise ProviderUnreachable(f"POST {url} failed: {exc}") from exc
        except ValueError as exc:
            raise ProviderUnreachable(f"POST {url} returned non-JSON body") from exc
        try:
            message = _message_from_wire(payload["choices"][0]["message"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnreachable(f"malformed completion payload: {exc}") from exc
        cap = request.max_parallel_tool_calls or self.max_parallel_tool_calls
        if cap is not None and len(message.tool_calls) > cap:
            message = replace(message, tool_calls=message.tool_calls[:cap])
        _check_response(message, request)
        return message
