"""JSON Schema documents for every JSON object the command line prints or writes."""

_NUM = {"type": "number"}
_BOOL = {"type": "boolean"}
_VEC = {"type": "array", "items": _NUM}

_SUMMARY_PROPS = {
    "method": {"enum": ["ukf", "ls-be", "ls-re", "ls-rexp"]},
    "alpha": _NUM,
    "beta": _NUM,
    "tau": _NUM,
    "mae_gap_m": _NUM,
    "mae_velocity_mps": _NUM,
    "l2_stable": _BOOL,
    "linf_stable": _BOOL,
    "l2_margin": _NUM,
    "linf_margin": _NUM,
    "physical": _BOOL,
    "n_samples": {"type": "integer", "minimum": 2},
    "seed": {"type": "integer"},
    "repeats": {"type": "integer", "minimum": 1},
    "std": {
        "type": "object",
        "properties": {"alpha": _NUM, "beta": _NUM, "tau": _NUM},
        "required": ["alpha", "beta", "tau"],
    },
    "runs": {"type": "array", "items": {"type": "object"}},
    "source": {"type": "string"},
}

_SUMMARY_REQUIRED = ["method", "alpha", "beta", "tau", "mae_gap_m", "mae_velocity_mps",
                     "l2_stable", "linf_stable", "l2_margin", "linf_margin", "physical",
                     "n_samples"]

SEGMENT_SUMMARY = {
    "type": "object",
    "properties": dict(_SUMMARY_PROPS, segment={"type": "integer", "minimum": 0},
                       t_start=_NUM, t_end=_NUM),
    "required": _SUMMARY_REQUIRED,
}

ESTIMATE_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "estimate summary",
    "type": "object",
    "properties": dict(_SUMMARY_PROPS, segments={"type": "array", "items": SEGMENT_SUMMARY}),
    "required": _SUMMARY_REQUIRED,
}

STABILITY_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "stability report",
    "type": "object",
    "properties": {
        "alpha": _NUM,
        "beta": _NUM,
        "tau": _NUM,
        "l2_margin": _NUM,
        "linf_margin": _NUM,
        "l2_stable": _BOOL,
        "linf_stable": _BOOL,
        "beta_sq_minus_2alpha": _NUM,
        "peak_gain": _NUM,
        "peak_omega": _NUM,
        "physical": _BOOL,
    },
    "required": ["alpha", "beta", "tau", "l2_margin", "linf_margin", "l2_stable",
                 "linf_stable", "beta_sq_minus_2alpha", "peak_gain", "peak_omega"],
}

OBSERVABILITY_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "observability report",
    "type": "object",
    "properties": {
        "state": {**_VEC, "minItems": 5, "maxItems": 5},
        "u": _NUM,
        "dt": _NUM,
        "matrix": {"type": "array", "items": {**_VEC, "minItems": 5, "maxItems": 5}},
        "rank": {"type": "integer", "minimum": 0, "maximum": 5},
        "nullity": {"type": "integer", "minimum": 0, "maximum": 5},
        "null_basis": {"type": "array", "items": {**_VEC, "minItems": 5, "maxItems": 5}},
        "regime": {"enum": ["equilibrium", "non-equilibrium", "near-equilibrium"]},
        "observable": _BOOL,
    },
    "required": ["state", "u", "dt", "matrix", "rank", "nullity", "null_basis", "regime",
                 "observable"],
}

SIMULATE_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "simulate report",
    "type": "object",
    "properties": {
        "clean": {"type": "string"},
        "noisy": {"type": "string"},
        "rows": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
    },
    "required": ["clean", "noisy", "rows", "seed"],
}

ERROR_LINE = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "error line",
    "type": "object",
    "properties": {
        "error": {"type": "string"},
        "message": {"type": "string"},
        "exit_code": {"enum": [1, 2]},
        "step": {"type": ["integer", "null"]},
    },
    "required": ["error", "message", "exit_code"],
}

SCHEMAS = {
    "estimate": ESTIMATE_SUMMARY,
    "stability": STABILITY_REPORT,
    "observability": OBSERVABILITY_REPORT,
    "simulate": SIMULATE_REPORT,
    "error": ERROR_LINE,
}
