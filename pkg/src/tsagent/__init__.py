"""Tool-grounded time-series reasoning: analysis tools, agent runtime,
corpus generation, turn-level credit assignment and forecast metrics."""

__version__ = "0.1.0"
