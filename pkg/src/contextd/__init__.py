"""contextd: a mixed-initiative context engine for multi-turn LLM work.

Conversation history is an explicit topology (mainline plus nested branches
of atomic context units); the effective LLM context is assembled from the
current perspective plus manual include/exclude overrides; a structure
copilot proposes branch/return/extract moves that only take effect on user
acceptance.
"""

from .assembly import AssembledContext, ContextScopeState, assemble
from .backend import HttpChatBackend, LlmRequest, LlmResponse, MockBackend
from .errors import ContextdError
from .graph import Branch, ContextNode, ConversationTopology, MutationJournal
from .patterns import PatternCapsule
from .project import Project, new_project
from .runtime import (
    EngineConfig,
    ProjectEngine,
    StructureDecision,
    Suggestion,
    TurnResult,
    parse_structure_decision,
)
from .store import ProjectStore
from .traces import TraceEvent, UserModel

__version__ = "0.1.0"

__all__ = [
    "AssembledContext",
    "Branch",
    "ContextNode",
    "ContextScopeState",
    "ContextdError",
    "ConversationTopology",
    "EngineConfig",
    "HttpChatBackend",
    "LlmRequest",
    "LlmResponse",
    "MockBackend",
    "MutationJournal",
    "PatternCapsule",
    "Project",
    "ProjectEngine",
    "ProjectStore",
    "StructureDecision",
    "Suggestion",
    "TraceEvent",
    "TurnResult",
    "UserModel",
    "assemble",
    "new_project",
    "parse_structure_decision",
    "__version__",
]
