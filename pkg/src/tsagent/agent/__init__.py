from tsagent.agent.formatting import FormatReport, validate_final_format
from tsagent.agent.prompts import SampleContext, render_system_prompt, render_user_prompt
from tsagent.agent.rollout import RolloutConfig, elicit_turn_descriptions, run_rollout
from tsagent.agent.trajectory import Trajectory

__all__ = [
    "FormatReport", "RolloutConfig", "SampleContext", "Trajectory", "elicit_turn_descriptions",
    "render_system_prompt", "render_user_prompt", "run_rollout", "validate_final_format",
]
