"""The 23 windowed time-series analysis tools and their registry."""

from tsagent.tools.registry import (
    CATEGORIES,
    TOOLBOX,
    Param,
    ToolOutcome,
    Toolbox,
    ToolSpec,
    export_tool_schemas,
)

__all__ = [
    "CATEGORIES",
    "TOOLBOX",
    "Param",
    "ToolOutcome",
    "ToolSpec",
    "Toolbox",
    "export_tool_schemas",
]
