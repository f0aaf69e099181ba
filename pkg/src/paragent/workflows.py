"""Prebuilt workflow graphs.

Workflow 1 is a single simulation agent with a tool node, for prompts that
already carry a structure path or PDB id. Workflow 2 adds a supervisor that
routes between a researcher (search tools) and the simulator, for prompts
that only name a protein. Supervisor decisions are literal tokens
(RESEARCHER / SIMULATOR / FINISH) in its reply, so routing is testable with
scripted and real providers alike.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

from .bundled import prompts_dir, structures_dir
from .dispatch import (DISPATCH_SCHEMES, make_ensemble_tool, parallel_tool_node,
                       sequential_tool_node)
from .executor import ConfigInvalid, Executor
from .graph import END, Graph, GraphState, Message, ToolCall
from .llm import ProviderRequest
from .mdsim import make_run_md_tool
from .tools import (FixturePdbSource, ToolRegistry, make_fetch_structure_tool,
                    make_search_tool)

ROUTE_TOKENS = {"RESEARCHER": "researcher", "SIMULATOR": "simulator", "FINISH": END}

GUARD_MESSAGE = "blocked by search-count guard"


@dataclass
class GuardViolation:
    """A task requested more distinct structures than the search can surface."""

    requested: int
    search_k: int

    @property
    def hint(self) -> str:
        return f"increase search_k above {self.requested} (currently {self.search_k})"

    def __str__(self) -> str:
        return (f"{GUARD_MESSAGE}: requested {self.requested} structures "
                f"with search_k={self.search_k}; {self.hint}")


def guard_requested_count(requested: int, search_k: int) -> Optional[GuardViolation]:
    """ok (None) iff the search breadth exceeds the requested structure count.

    With search_k <= requested the provider has too little context to name
    every structure and starts inventing ids, so the violation must block the
    simulation step rather than surface after wasted runs.
    """
    if search_k > requested:
        return None
    return GuardViolation(requested=requested, search_k=search_k)


@dataclass
class WorkflowConfig:
    """Everything a prebuilt graph needs: provider, resources, tool backends."""

    workflow: str  # wf1 | wf2
    provider: object
    executor: Executor
    work_dir: Path
    scheme: str = "parallel_node"
    pdb_source: object = None
    search_backend: object = None
    search_k: int = 5
    requested_structures_guard: bool = True
    cost_scale: float = 0.0
    seed: int = 0
    model: Optional[str] = None
    prompt_dir: Optional[Path] = None

    def __post_init__(self):
        self.work_dir = Path(self.work_dir)
        if self.model is None:
            self.model = getattr(self.provider, "model", "scripted")
        if self.pdb_source is None:
            self.pdb_source = FixturePdbSource(structures_dir())

    def validate(self) -> None:
        if self.workflow not in ("wf1", "wf2"):
            raise ConfigInvalid(f"unknown workflow {self.workflow!r}")
        if self.scheme not in DISPATCH_SCHEMES:
            raise ConfigInvalid(f"unknown dispatch scheme {self.scheme!r}")
        if self.provider is None or self.executor is None:
            raise ConfigInvalid("workflow requires a provider and an executor")
        if self.workflow == "wf2" and self.search_backend is None:
            raise ConfigInvalid("workflow 2 requires a search backend")
        if self.search_k < 1:
            raise ConfigInvalid("search_k must be >= 1")


def load_system_prompt(name: str, prompt_dir: Optional[Path] = None) -> str:
    root = Path(prompt_dir) if prompt_dir else prompts_dir()
    return (root / f"{name}.txt").read_text(encoding="utf-8")


def build_tooling(cfg: WorkflowConfig) -> tuple[ToolRegistry, list[str]]:
    """Build the tool registry for cfg and the schema names the simulator binds."""
    downloads = cfg.work_dir / "downloads"
    runs = cfg.work_dir / "runs"
    downloads.mkdir(parents=True, exist_ok=True)
    runs.mkdir(parents=True, exist_ok=True)

    registry = ToolRegistry()
    registry.register(make_fetch_structure_tool(cfg.pdb_source, downloads))
    run_md = make_run_md_tool(runs, cost_scale=cfg.cost_scale, default_seed=cfg.seed)
    if cfg.scheme == "ensemble_function":
        ensemble = make_ensemble_tool(run_md, cfg.executor, default_base_seed=cfg.seed)
        registry.register(ensemble)
        simulator_tools = ["fetch_structure", ensemble.schema.name]
    else:
        registry.register(run_md)
        simulator_tools = ["fetch_structure", "run_md"]
    if cfg.workflow == "wf2":
        registry.register(make_search_tool(cfg.search_backend, cfg.search_k))
    return registry, simulator_tools


def make_agent_node(name: str, provider, system_prompt: str, schemas: list,
                    model: str) -> Callable[[GraphState], GraphState]:
    """A node that calls the provider once and appends the assistant reply."""

    def node(state: GraphState) -> GraphState:
        request = ProviderRequest(
            model=model,
            messages=[Message(role="system", content=system_prompt), *state.messages],
            tools=schemas,
        )
        reply = provider.complete(request)
        state.append(replace(reply, agent_name=name))
        return state

    node.__name__ = f"{name}_agent"
    return node


def _tool_runner(cfg: WorkflowConfig, registry: ToolRegistry) -> Callable[[GraphState], GraphState]:
    if cfg.scheme == "parallel_node":
        return lambda state: parallel_tool_node(state, registry, cfg.executor)
    # ensemble_function keeps the default sequential node: fan-out happens
    # inside the ensemble tool, not at the node.
    return lambda state: sequential_tool_node(state, registry)


def make_worker_node(name: str, provider, system_prompt: str, schemas: list, model: str,
                     run_tools: Callable[[GraphState], GraphState],
                     guard: Optional[Callable] = None,
                     internal_cap: int = 8) -> Callable[[GraphState], GraphState]:
    """A self-contained agent/tool loop, executed as one graph node.

    Keeps workflow-2 runs strictly alternating supervisor <-> worker at the
    node level: everything between two supervisor turns is one execution.
    """

    def node(state: GraphState) -> GraphState:
        blocked: Optional[GuardViolation] = None
        for _ in range(internal_cap):
            request = ProviderRequest(
                model=model,
                messages=[Message(role="system", content=system_prompt), *state.messages],
                tools=schemas,
            )
            reply = provider.complete(request)
            state.append(replace(reply, agent_name=name))
            if not reply.tool_calls:
                break
            if blocked is None and guard is not None:
                violation = guard(reply.tool_calls)
                if violation is not None:
                    blocked = violation
                    state.add_warning("guard_violation", requested=violation.requested,
                                      search_k=violation.search_k, hint=violation.hint)
            if blocked is not None:
                _refuse_calls(state, reply.tool_calls, str(blocked))
                continue
            run_tools(state)
        return state

    node.__name__ = f"{name}_worker"
    return node


def _refuse_calls(state: GraphState, calls: list[ToolCall], reason: str) -> None:
    for call in calls:
        state.append(Message(role="tool", content=f"ERROR: {reason}", tool_call_id=call.id))


def make_structure_guard(search_k: int) -> Callable[[list[ToolCall]], Optional[GuardViolation]]:
    """Compare the distinct structures a tool batch asks to download against
    the configured search breadth. The requested count comes from the tool
    arguments themselves — the single source of truth — not from re-parsing
    the prompt."""

    def guard(calls: list[ToolCall]) -> Optional[GuardViolation]:
        fetches = [c for c in calls if c.name == "fetch_structure"]
        if not fetches:
            return None
        requested = len({str(c.arguments.get("pdb_id", "")).upper() for c in fetches})
        return guard_requested_count(requested, search_k)

    return guard


def route_supervisor(state: GraphState) -> str:
    """Parse the supervisor's routing token; anything ambiguous ends the run."""
    last = state.last_message()
    content = last.content if last is not None and last.role == "assistant" else ""
    found = [token for token in ROUTE_TOKENS if token in content]
    if len(found) != 1:
        state.add_warning("supervisor_route_unparseable", content=content)
        return END
    return ROUTE_TOKENS[found[0]]


def _route_on_tool_calls(state: GraphState) -> str:
    last = state.last_message()
    if last is not None and last.role == "assistant" and last.tool_calls:
        return "tools"
    return END


def build_workflow1(cfg: WorkflowConfig) -> Graph:
    """Single simulation agent with a tool node: agent <-> tools until the
    agent replies without tool calls."""
    cfg.validate()
    if cfg.workflow != "wf1":
        raise ConfigInvalid(f"build_workflow1 got workflow {cfg.workflow!r}")
    registry, simulator_tools = build_tooling(cfg)
    simulator = make_agent_node(
        "simulator", cfg.provider, load_system_prompt("simulator", cfg.prompt_dir),
        registry.schemas(simulator_tools), cfg.model,
    )
    graph = Graph()
    graph.add_node("simulator", simulator)
    graph.add_node("tools", _tool_runner(cfg, registry))
    graph.set_entry("simulator")
    graph.add_conditional_edge("simulator", _route_on_tool_calls)
    graph.add_edge("tools", "simulator")
    return graph


def build_workflow2(cfg: WorkflowConfig) -> Graph:
    """Supervisor routing between researcher and simulator worker nodes."""
    cfg.validate()
    if cfg.workflow != "wf2":
        raise ConfigInvalid(f"build_workflow2 got workflow {cfg.workflow!r}")
    registry, simulator_tools = build_tooling(cfg)
    run_tools = _tool_runner(cfg, registry)

    supervisor = make_agent_node(
        "supervisor", cfg.provider, load_system_prompt("supervisor", cfg.prompt_dir),
        [], cfg.model,
    )
    researcher = make_worker_node(
        "researcher", cfg.provider, load_system_prompt("researcher", cfg.prompt_dir),
        registry.schemas(["search"]), cfg.model, run_tools,
    )
    guard = make_structure_guard(cfg.search_k) if cfg.requested_structures_guard else None
    simulator = make_worker_node(
        "simulator", cfg.provider, load_system_prompt("simulator", cfg.prompt_dir),
        registry.schemas(simulator_tools), cfg.model, run_tools, guard=guard,
    )

    graph = Graph()
    graph.add_node("supervisor", supervisor)
    graph.add_node("researcher", researcher)
    graph.add_node("simulator", simulator)
    graph.set_entry("supervisor")
    graph.add_conditional_edge("supervisor", route_supervisor)
    graph.add_edge("researcher", "supervisor")
    graph.add_edge("simulator", "supervisor")
    return graph
