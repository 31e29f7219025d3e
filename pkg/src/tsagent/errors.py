from __future__ import annotations


class TsAgentError(Exception):
    """Base error. ``code`` is a stable machine-readable identifier."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


class SeriesError(TsAgentError):
    pass


class ToolError(TsAgentError):
    pass


class GatewayError(TsAgentError):
    pass


class RolloutError(TsAgentError):
    pass


class ScorerError(TsAgentError):
    pass


class RewardError(TsAgentError):
    pass


class MetricError(TsAgentError):
    pass


class ConfigError(TsAgentError):
    pass
