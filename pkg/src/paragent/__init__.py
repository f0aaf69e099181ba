"""paragent: graph-based LLM agent workflows with parallel tool execution.

The package pairs a small workflow-graph engine (agents, tool nodes,
supervisor routing) with a pluggable task executor (local worker pool or
simulated batch allocation) and a toy molecular-dynamics workload, so that
both tool-dispatch schemes — the parallel tool node and the ensemble tool
function — can be exercised and measured offline.
"""

from .dispatch import make_ensemble_tool, parallel_tool_node, sequential_tool_node
from .executor import (Executor, ExecutorShutdown, ConfigInvalid, ResourceConfig,
                       TaskHandle, TaskRecord, TimelineSample, wait_all)
from .graph import END, Graph, GraphState, Message, ToolCall
from .llm import (HttpProvider, ParamSpec, ProviderRequest, ScriptedProvider,
                  ScriptEntry, ToolSchema, decode_wire, encode_wire)
from .mdsim import (SimResult, SimulationSpec, StructureInfo, parse_structure,
                    run_simulation, simulate_cost_model)
from .tools import (SearchResult, ToolDef, ToolRegistry, ToolResult,
                    fetch_structure, make_run_dir)
from .workflows import (GuardViolation, WorkflowConfig, build_workflow1,
                        build_workflow2, guard_requested_count)

__version__ = "0.1.0"

__all__ = [
    "END", "Graph", "GraphState", "Message", "ToolCall",
    "ScriptedProvider", "HttpProvider", "ScriptEntry", "ProviderRequest",
    "ToolSchema", "ParamSpec", "encode_wire", "decode_wire",
    "ToolRegistry", "ToolDef", "ToolResult", "SearchResult",
    "fetch_structure", "make_run_dir",
    "StructureInfo", "SimulationSpec", "SimResult",
    "parse_structure", "run_simulation", "simulate_cost_model",
    "Executor", "ResourceConfig", "TaskHandle", "TaskRecord", "TimelineSample",
    "wait_all", "ExecutorShutdown", "ConfigInvalid",
    "parallel_tool_node", "sequential_tool_node", "make_ensemble_tool",
    "WorkflowConfig", "build_workflow1", "build_workflow2",
    "guard_requested_count", "GuardViolation",
    "__version__",
]
