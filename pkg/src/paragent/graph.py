"""Graph-driven workflow engine.

Nodes are callables that transform a shared state; edges (static or
conditional) pick the next node; a driver loop iterates until the END
sentinel or an iteration cap. Message history is append-only, which is what
makes runs auditable after the fact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

# Reserved sentinel: routing to END terminates the run. Not a valid node name.
END = "END"

VALID_ROLES = ("system", "user", "assistant", "tool")


class GraphError(Exception):
    """Base class for workflow graph errors."""


class DuplicateNode(GraphError):
    pass


class GraphInvalid(GraphError):
    pass


class NoEdge(GraphError):
    pass


@dataclass
class ToolCall:
    """One LLM-emitted request to invoke a named tool, correlated by id."""

    id: str
    name: str
    arguments: dict

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "arguments": dict(self.arguments)}

    @classmethod
    def from_dict(cls, data: dict) -> "ToolCall":
        return cls(id=data["id"], name=data["name"], arguments=dict(data.get("arguments", {})))


@dataclass
class Message:
    """One event in the workflow history.

    Only assistant messages may carry tool_calls; tool messages must carry the
    id of the call they answer.
    """

    role: str
    content: str
    tool_calls: list[ToolCall] = field(default_factory=list)
    tool_call_id: Optional[str] = None
    agent_name: Optional[str] = None

    def __post_init__(self):
        if self.role not in VALID_ROLES:
            raise ValueError(f"invalid message role: {self.role!r}")
        if self.role != "assistant" and self.tool_calls:
            raise ValueError(f"{self.role} messages may not carry tool calls")
        if self.role == "tool" and not self.tool_call_id:
            raise ValueError("tool messages require a tool_call_id")

    def to_dict(self) -> dict:
        data: dict = {"role": self.role, "content": self.content}
        if self.tool_calls:
            data["tool_calls"] = [c.to_dict() for c in self.tool_calls]
        if self.tool_call_id is not None:
            data["tool_call_id"] = self.tool_call_id
        if self.agent_name is not None:
            data["agent_name"] = self.agent_name
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Message":
        return cls(
            role=data["role"],
            content=data.get("content", ""),
            tool_calls=[ToolCall.from_dict(c) for c in data.get("tool_calls", [])],
            tool_call_id=data.get("tool_call_id"),
            agent_name=data.get("agent_name"),
        )


@dataclass
class GraphState:
    """The single source of truth for one run: messages plus routing cursor.

    messages is append-only; the driver verifies prefix preservation after
    every node execution. warnings collects structured events (guard
    violations, under-provisioning) surfaced to the caller.
    """

    messages: list[Message] = field(default_factory=list)
    next: str = END
    iteration: int = 0
    truncated: bool = False
    warnings: list[dict] = field(default_factory=list)

    def append(self, message: Message) -> None:
        """Append a message, enforcing tool-call correlation.

        A tool message must answer a call id emitted by an earlier assistant
        message, and each call id may be answered at most once.
        """
        if message.role == "assistant" and message.tool_calls:
            known = {c.id for m in self.messages if m.role == "assistant" for c in m.tool_calls}
            for call in message.tool_calls:
                if call.id in known:
                    raise ValueError(f"tool call id {call.id!r} reused within one run")
        if message.role == "tool":
            known = {c.id for m in self.messages if m.role == "assistant" for c in m.tool_calls}
            if message.tool_call_id not in known:
                raise ValueError(f"tool message answers unknown call id {message.tool_call_id!r}")
            answered = {m.tool_call_id for m in self.messages if m.role == "tool"}
            if message.tool_call_id in answered:
                raise ValueError(f"call id {message.tool_call_id!r} already answered")
        self.messages.append(message)

    def last_message(self) -> Optional[Message]:
        return self.messages[-1] if self.messages else None

    def add_warning(self, kind: str, **details) -> None:
        self.warnings.append({"kind": kind, **details})


NodeBehavior = Callable[[GraphState], GraphState]
Router = Callable[[GraphState], str]


class Graph:
    """A directed workflow graph with static and conditional edges.

    Build once (add_node/add_edge/set_entry), then treat as immutable: a
    Graph is safe to share across concurrent runs, each run owning its own
    GraphState. Node execution is strictly sequential inside one run;
    parallelism lives entirely inside tool execution.
    """

    def __init__(self):
        self.nodes: dict[str, NodeBehavior] = {}
        self.edges: dict[str, str] = {}
        self.conditional_edges: dict[str, Router] = {}
        self.entry: Optional[str] = None

    def add_node(self, name: str, behavior: NodeBehavior) -> "Graph":
        if name == END:
            raise GraphInvalid(f"{END!r} is reserved and may not be used as a node name")
        if name in self.nodes:
            raise DuplicateNode(f"node {name!r} already present")
        self.nodes[name] = behavior
        return self

    def add_edge(self, source: str, target: str) -> "Graph":
        self.edges[source] = target
        return self

    def add_conditional_edge(self, source: str, router: Router) -> "Graph":
        self.conditional_edges[source] = router
        return self

    def set_entry(self, name: str) -> "Graph":
        self.entry = name
        return self

    def validate(self) -> None:
        if self.entry is None or self.entry not in self.nodes:
            raise GraphInvalid(f"entry node {self.entry!r} does not exist")
        for source, target in self.edges.items():
            if source not in self.nodes:
                raise GraphInvalid(f"edge from unknown node {source!r}")
            if target != END and target not in self.nodes:
                raise GraphInvalid(f"edge {source!r} -> {target!r} dangles")
        for source in self.conditional_edges:
            if source not in self.nodes:
                raise GraphInvalid(f"conditional edge from unknown node {source!r}")

    def route(self, state: GraphState, current: str) -> str:
        """Pick the successor of `current`. Conditional edges win over static ones."""
        if current in self.conditional_edges:
            target = self.conditional_edges[current](state)
        elif current in self.edges:
            target = self.edges[current]
        else:
            raise NoEdge(f"node {current!r} has no outgoing edge")
        if target != END and target not in self.nodes:
            raise GraphInvalid(f"router for {current!r} selected unknown node {target!r}")
        return target

    def run(self, initial_prompt: str, max_iterations: int = 25) -> GraphState:
        """Drive the graph from the entry node until END or the iteration cap.

        Hitting the cap is not an error: the returned state is flagged
        truncated so callers can tell a runaway loop from a finished run.
        """
        if max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        self.validate()
        state = GraphState(
            messages=[Message(role="user", content=initial_prompt)],
            next=self.entry,
        )
        while state.next != END:
            if state.iteration >= max_iterations:
                state.truncated = True
                break
            current = state.next
            prefix = [id(m) for m in state.messages]
            state = self.nodes[current](state)
            if [id(m) for m in state.messages[: len(prefix)]] != prefix:
                raise GraphInvalid(f"node {current!r} rewrote message history")
            state.iteration += 1
            state.next = self.route(state, current)
        return state
