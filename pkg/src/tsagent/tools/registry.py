"""Tool registry: argument validation, dispatch and tool-calling schemas."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable

import numpy as np

from tsagent.errors import SeriesError, ToolError
from tsagent.series import Series, Window
from tsagent.tools import adf, cwt, kernels, spectral

CATEGORIES = ("Trend", "Volatility", "Distribution", "Periodicity", "Extrema", "Frequency", "Dynamics")


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # int | real | bool | enum | int-list | real-list
    description: str
    required: bool = True
    minimum: float | None = None
    maximum: float | None = None
    choices: tuple[str, ...] = ()

    def json_schema(self) -> dict:
        if self.kind in ("int", "real"):
            schema: dict = {"type": "integer" if self.kind == "int" else "number"}
        elif self.kind == "bool":
            schema = {"type": "boolean"}
        elif self.kind == "enum":
            schema = {"type": "string", "enum": list(self.choices)}
        else:
            item = {"type": "integer" if self.kind == "int-list" else "number"}
            if self.minimum is not None:
                item["minimum"] = self.minimum
            schema = {"type": "array", "items": item, "minItems": 1}
        if self.kind in ("int", "real"):
            if self.minimum is not None:
                schema["minimum"] = self.minimum
            if self.maximum is not None:
                schema["maximum"] = self.maximum
        schema["description"] = self.description
        return schema

    def coerce(self, value: Any) -> Any:
        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        def is_real(v):
            return (is_int(v) or isinstance(v, float)) and np.isfinite(v)

        if self.kind == "int":
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            if not is_int(value):
                raise ToolError("BAD_PARAM", f"'{self.name}' must be an integer")
        elif self.kind == "real":
            if not is_real(value):
                raise ToolError("BAD_PARAM", f"'{self.name}' must be a finite number")
            value = float(value)
        elif self.kind == "bool":
            if not isinstance(value, bool):
                raise ToolError("BAD_PARAM", f"'{self.name}' must be a boolean")
        elif self.kind == "enum":
            if value not in self.choices:
                raise ToolError("BAD_PARAM", f"'{self.name}' must be one of {list(self.choices)}")
        else:
            check = is_int if self.kind == "int-list" else is_real
            if not isinstance(value, list) or not value or not all(check(v) for v in value):
                raise ToolError("BAD_PARAM", f"'{self.name}' must be a non-empty list of {self.kind[:-5]}s")
            return list(value)
        if self.kind in ("int", "real"):
            if self.minimum is not None and value < self.minimum:
                raise ToolError("BAD_PARAM", f"'{self.name}' must be >= {self.minimum}")
            if self.maximum is not None and value > self.maximum:
                raise ToolError("BAD_PARAM", f"'{self.name}' must be <= {self.maximum}")
        return value


WINDOW_PARAMS = (
    Param("left", "int", "Inclusive start index of the window.", minimum=0),
    Param("right", "int", "Exclusive end index of the window.", minimum=1),
)


@dataclass(frozen=True)
class ToolSpec:
    name: str
    category: str
    description: str
    func: Callable[..., dict] = field(repr=False, compare=False)
    params: tuple[Param, ...] = ()

    @property
    def parameters(self) -> tuple[Param, ...]:
        return WINDOW_PARAMS + self.params

    def schema(self) -> dict:
        props = {p.name: p.json_schema() for p in self.parameters}
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": [p.name for p in self.parameters if p.required],
                    "additionalProperties": False,
                },
            },
        }


@dataclass
class ToolOutcome:
    name: str
    window: Window | None
    payload: dict | None = None
    error: dict | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def observation(self) -> dict:
        return self.payload if self.error is None else {"error": self.error}


def _p(name, kind, desc, **kw) -> Param:
    return Param(name, kind, desc, **kw)


_LAG = _p("lag", "int", "Lag in steps.", minimum=0)
_COEFFS = _p("coeffs", "int-list", "Frequency-bin indices to report.", minimum=0)

_SPECS = (
    ToolSpec("linear_trend", "Trend",
             "Least-squares line of the window values against their position (0..n-1). "
             "Returns slope, intercept, rvalue, pvalue and stderr.",
             kernels.linear_trend),
    ToolSpec("standard_deviation", "Volatility",
             "Population standard deviation of the window.", kernels.standard_deviation),
    ToolSpec("mean_abs_change", "Volatility",
             "Mean absolute difference between consecutive values.", kernels.mean_abs_change),
    ToolSpec("absolute_sum_of_changes", "Volatility",
             "Sum of absolute differences between consecutive values.", kernels.absolute_sum_of_changes),
    ToolSpec("ratio_beyond_r_sigma", "Volatility",
             "Fraction of values farther than r standard deviations from the window mean.",
             kernels.ratio_beyond_r_sigma, (_p("r", "real", "Distance in standard deviations.", minimum=0),)),
    ToolSpec("quantile", "Distribution",
             "The q-quantile of the window values (linear interpolation).",
             kernels.quantile, (_p("q", "real", "Quantile level.", minimum=0, maximum=1),)),
    ToolSpec("change_quantiles", "Distribution",
             "Aggregate of consecutive changes whose endpoints both lie in the corridor "
             "between the q_l and q_h quantiles; 0 when no change qualifies.",
             kernels.change_quantiles,
             (_p("q_l", "real", "Lower corridor quantile.", minimum=0, maximum=1),
              _p("q_h", "real", "Upper corridor quantile.", minimum=0, maximum=1),
              _p("is_abs", "bool", "Take absolute values of the changes."),
              _p("agg", "enum", "Aggregation of the kept changes.", choices=("mean", "var")))),
    ToolSpec("autocorrelation", "Periodicity",
             "Autocorrelation at the given lag, normalised by the window variance.",
             kernels.autocorrelation, (_LAG,)),
    ToolSpec("agg_autocorrelation", "Periodicity",
             "Aggregate (mean, median or var) of autocorrelations at lags 1..min(maxlag, n-1).",
             kernels.agg_autocorrelation,
             (_p("maxlag", "int", "Largest lag to include.", minimum=1),
              _p("agg", "enum", "Aggregation function.", choices=("mean", "median", "var")))),
    ToolSpec("number_peaks", "Extrema",
             "Number of values strictly greater than their n neighbours on both sides.",
             kernels.number_peaks, (_p("n", "int", "Peak support.", minimum=1),)),
    ToolSpec("number_cwt_peaks", "Extrema",
             "Number of peaks that persist across Ricker-wavelet scales 1..max_width with SNR >= 1.",
             cwt.number_cwt_peaks, (_p("max_width", "int", "Largest wavelet width.", minimum=1),)),
    ToolSpec("first_location_of_minimum", "Extrema",
             "Relative position of the first minimum in the window.",
             partial(kernels.extreme_location, which="first", kind="min")),
    ToolSpec("last_location_of_minimum", "Extrema",
             "Relative position just after the last minimum in the window.",
             partial(kernels.extreme_location, which="last", kind="min")),
    ToolSpec("first_location_of_maximum", "Extrema",
             "Relative position of the first maximum in the window.",
             partial(kernels.extreme_location, which="first", kind="max")),
    ToolSpec("last_location_of_maximum", "Extrema",
             "Relative position just after the last maximum in the window.",
             partial(kernels.extreme_location, which="last", kind="max")),
    ToolSpec("longest_strike_below_mean", "Extrema",
             "Length of the longest run of values strictly below the window mean.",
             partial(kernels.longest_strike, relation="below")),
    ToolSpec("longest_strike_above_mean", "Extrema",
             "Length of the longest run of values strictly above the window mean.",
             partial(kernels.longest_strike, relation="above")),
    ToolSpec("mean_n_absolute_max", "Extrema",
             "Mean of the n largest absolute values.",
             kernels.mean_n_absolute_max, (_p("n", "int", "How many maxima to average.", minimum=1),)),
    ToolSpec("fft_coefficient", "Frequency",
             "Real-input DFT coefficients of the window; angle is in degrees.",
             spectral.fft_coefficient,
             (_COEFFS, _p("attr", "enum", "Attribute to report.", choices=("real", "imag", "abs", "angle")))),
    ToolSpec("spkt_welch_density", "Frequency",
             "Welch power spectral density at the requested frequency bins "
             "(segments of up to 256 points, bin k = k/segment_length).",
             spectral.spkt_welch_density, (_COEFFS,)),
    ToolSpec("fourier_entropy", "Frequency",
             "Binned Shannon entropy of the max-normalised Welch spectrum.",
             spectral.fourier_entropy, (_p("bins", "int", "Number of equal-width bins on [0, 1].", minimum=1),)),
    ToolSpec("augmented_dickey_fuller", "Dynamics",
             "Augmented Dickey-Fuller test statistic (constant term, AIC lag choice); "
             "more negative means stronger evidence against a unit root.",
             adf.augmented_dickey_fuller),
    ToolSpec("cid_ce", "Dynamics",
             "Complexity estimate: root of summed squared consecutive differences.",
             kernels.cid_ce, (_p("normalize", "bool", "Z-normalise the window first."),)),
)


class Toolbox:
    """Immutable name -> ToolSpec registry."""

    def __init__(self, specs=_SPECS):
        order = {c: i for i, c in enumerate(CATEGORIES)}
        ordered = sorted(specs, key=lambda s: (order[s.category], s.name))
        self._specs = {s.name: s for s in ordered}
        if len(self._specs) != len(ordered):
            raise ValueError("duplicate tool names")

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def __len__(self) -> int:
        return len(self._specs)

    @property
    def names(self) -> list[str]:
        return list(self._specs)

    def spec(self, name: str) -> ToolSpec:
        return self._specs[name]

    def schemas(self) -> list[dict]:
        return [s.schema() for s in self._specs.values()]

    def bind(self, name: str, arguments: dict | str) -> tuple[ToolSpec, Window, dict]:
        """Validate a call; returns the spec, the window and keyword arguments."""
        if name not in self._specs:
            raise ToolError("UNKNOWN_TOOL", f"no tool named '{name}'")
        if isinstance(arguments, str):
            try:
                arguments = json.loads(arguments) if arguments.strip() else {}
            except json.JSONDecodeError:
                raise ToolError("BAD_PARAM", "arguments are not valid JSON") from None
        if not isinstance(arguments, dict):
            raise ToolError("BAD_PARAM", "arguments must be a JSON object")
        spec = self._specs[name]
        known = {p.name for p in spec.parameters}
        extra = sorted(set(arguments) - known)
        if extra:
            raise ToolError("BAD_PARAM", f"unexpected arguments {extra}")
        values = {}
        for p in spec.parameters:
            if p.name not in arguments:
                raise ToolError("BAD_PARAM", f"missing required argument '{p.name}'")
            values[p.name] = p.coerce(arguments[p.name])
        window = Window(values.pop("left"), values.pop("right"))
        return spec, window, values

    def run(self, series: Series, name: str, arguments: dict | str) -> dict:
        """Execute and return the payload; raises ToolError."""
        spec, window, kwargs = self.bind(name, arguments)
        try:
            window.check(len(series))
        except SeriesError as exc:
            raise ToolError(exc.code, exc.message) from None
        x = np.array(series.values[window.left : window.right])
        return spec.func(x, **kwargs)

    def invoke(self, series: Series, name: str, arguments: dict | str) -> ToolOutcome:
        """Execute a call; errors come back inside the outcome, never raised."""
        window = None
        try:
            _, window, _ = self.bind(name, arguments)
            payload = self.run(series, name, arguments)
        except ToolError as exc:
            return ToolOutcome(name, window, error=exc.to_dict())
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return ToolOutcome(name, window, error={"code": "NUMERIC", "message": str(exc)})
        return ToolOutcome(name, window, payload=payload)


TOOLBOX = Toolbox()


def export_tool_schemas() -> list[dict]:
    return TOOLBOX.schemas()
