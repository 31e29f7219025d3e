from tsagent.corpus.manifest import DatasetEntry, LoadedSample, load_manifest, load_sample
from tsagent.corpus.masking import mask_metadata
from tsagent.corpus.pipeline import PipelineResult, pipeline_run, process_sample
from tsagent.corpus.qc import CHECKS, QCVerdict, parse_verdict, run_qc
from tsagent.corpus.windowing import WindowBudgetConfig, WindowSpec, generate_windows, series_windows, sqrt_budgets

__all__ = [
    "CHECKS", "DatasetEntry", "LoadedSample", "PipelineResult", "QCVerdict", "WindowBudgetConfig", "WindowSpec",
    "generate_windows", "load_manifest", "load_sample", "mask_metadata", "parse_verdict", "pipeline_run",
    "process_sample", "run_qc", "series_windows", "sqrt_budgets",
]
