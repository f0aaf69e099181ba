"""The two tool-dispatch schemes.

Scheme 1 (parallel tool node) fans every tool call of the latest assistant
message out to the executor — no change to the tools themselves, but
everything runs on workers, downloads included. Scheme 2 (ensemble tool
function) hides the fan-out inside a single registered tool that takes the
run count as an argument, so the call cap of a provider can never shrink the
ensemble and the caller decides what runs on the workers.
"""
from __future__ import annotations

from typing import Optional

from .executor import Executor, wait_all
from .graph import GraphState, Message, ToolCall
from .llm import ParamSpec, ToolSchema
from .tools import ToolDef, ToolRegistry, ToolResult

DISPATCH_SCHEMES = ("sequential_node", "parallel_node", "ensemble_function")


def parallel_tool_node(state: GraphState, registry: ToolRegistry,
                       executor: Executor) -> GraphState:
    """Execute all tool calls of the last assistant message on the executor.

    Results are appended as tool messages in the original call order,
    whatever order the workers finish in.
    """
    calls = _pending_calls(state)
    if calls is None:
        return _annotate_no_calls(state)
    detect_under_provisioning(state, calls)
    handles = [executor.submit(registry.validate_and_invoke, call) for call in calls]
    outcomes = wait_all(handles)
    for call, outcome in zip(calls, outcomes):
        _append_tool_message(state, call, outcome)
    return state


def sequential_tool_node(state: GraphState, registry: ToolRegistry) -> GraphState:
    """Execute the pending tool calls one at a time on the caller's thread."""
    calls = _pending_calls(state)
    if calls is None:
        return _annotate_no_calls(state)
    detect_under_provisioning(state, calls)
    for call in calls:
        _append_tool_message(state, call, registry.validate_and_invoke(call))
    return state


def make_ensemble_tool(inner: ToolDef, executor: Executor,
                       default_base_seed: int = 0) -> ToolDef:
    """Wrap a single-run tool as an ensemble tool fanning out on the executor.

    The new schema is the inner schema plus a required integer num_runs. Run
    i gets seed = base ^ i, so ensembles are reproducible and seed-disjoint.
    The ensemble tool itself is inline: it runs in the driver and only its
    member runs go to the workers. Partial failures stay visible per run in
    the content; the result is an error only if every run failed.
    """
    parameters = dict(inner.schema.parameters)
    parameters["num_runs"] = ParamSpec("integer", "number of member runs to launch",
                                       required=True)
    schema = ToolSchema(
        name=f"{inner.schema.name}_ensemble",
        description=f"Run an ensemble of {inner.schema.name} jobs concurrently and "
                    "report every member run.",
        parameters=parameters,
    )

    def behavior(args: dict) -> ToolResult:
        args = dict(args)
        num_runs = int(args.pop("num_runs"))
        if num_runs < 1:
            return ToolResult(status="error", content=f"num_runs must be >= 1, got {num_runs}")
        base_seed = int(args.pop("seed", default_base_seed))
        handles = []
        for i in range(num_runs):
            run_args = dict(args)
            run_args["seed"] = base_seed ^ i
            handles.append(executor.submit(inner.behavior, run_args))
        outcomes = wait_all(handles)
        lines = []
        artifacts: list[str] = []
        failures = 0
        for i, outcome in enumerate(outcomes):
            if isinstance(outcome, BaseException):
                outcome = ToolResult(status="error", content=str(outcome))
            if outcome.ok:
                lines.append(f"run {i}: {outcome.content}")
                artifacts.extend(outcome.artifacts)
            else:
                failures += 1
                lines.append(f"run {i}: FAILED: {outcome.content}")
        status = "error" if failures == num_runs else "ok"
        header = (f"ensemble of {num_runs} runs finished "
                  f"({num_runs - failures} ok, {failures} failed)")
        return ToolResult(status=status, content=header + "\n" + "\n".join(lines),
                          artifacts=artifacts)

    return ToolDef(schema=schema, behavior=behavior, execution_class="inline")


def detect_under_provisioning(state: GraphState, calls: list[ToolCall]) -> None:
    """Flag batches where fewer calls were emitted than the task requested.

    The requested count rides in the calls' own requested_runs argument (the
    provider extracts it from the prompt), so a capped provider that silently
    truncates a batch is caught here rather than noticed post hoc.
    """
    by_name: dict[str, list[ToolCall]] = {}
    for call in calls:
        by_name.setdefault(call.name, []).append(call)
    for name, group in by_name.items():
        requested = 0
        for call in group:
            value = call.arguments.get("requested_runs")
            if isinstance(value, int) and not isinstance(value, bool):
                requested = max(requested, value)
        if requested and len(group) < requested:
            state.add_warning("under_provisioned", tool=name,
                              requested=requested, dispatched=len(group))


def _pending_calls(state: GraphState) -> Optional[list[ToolCall]]:
    last = state.last_message()
    if last is None or last.role != "assistant" or not last.tool_calls:
        return None
    return list(last.tool_calls)


def _annotate_no_calls(state: GraphState) -> GraphState:
    # Can't use a tool message here: there is no call id to answer.
    state.add_warning("tool_node_without_calls")
    state.append(Message(role="system",
                         content="tool node reached without pending tool calls"))
    return state


def _append_tool_message(state: GraphState, call: ToolCall, outcome) -> None:
    if isinstance(outcome, BaseException):
        outcome = ToolResult(call.id, "error", f"{call.name} raised: {outcome}")
    content = outcome.content if outcome.ok else f"ERROR: {outcome.content}"
    state.append(Message(role="tool", content=content, tool_call_id=call.id))
