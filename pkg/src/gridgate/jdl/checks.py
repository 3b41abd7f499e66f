"""Descriptor validation and parametric expansion."""

from __future__ import annotations

from gridgate.jdl.model import (
    JdlBool,
    JdlExpr,
    JdlIssue,
    JdlList,
    JdlNum,
    JdlStr,
    JdlValue,
    JobDescriptor,
    RECOGNIZED_ATTRIBUTES,
    render_number,
)

MISSING_EXECUTABLE = "MissingExecutable"
EMPTY_EXECUTABLE = "EmptyExecutable"
BAD_PARAMETRIC_SPEC = "BadParametricSpec"
UNKNOWN_ATTRIBUTE = "UnknownAttribute"
WRONG_TYPE = "WrongType"

PARAM_TOKEN = "_PARAM_"

_RECOGNIZED_LOWER = {name.lower() for name in RECOGNIZED_ATTRIBUTES}
_STRING_ONLY = ("Arguments", "StdOutput", "StdError", "VirtualOrganisation", "JobType")


class NotValidatedError(ValueError):
    """expand_parametric was handed a descriptor with validation errors."""


def _error(code: str, message: str) -> JdlIssue:
    return JdlIssue(severity="error", code=code, message=message)


def _warning(code: str, message: str) -> JdlIssue:
    return JdlIssue(severity="warning", code=code, message=message)


def _positive_int(value: JdlValue | None) -> int | None:
    if isinstance(value, JdlNum) and value.is_integral and value.value > 0:
        return int(value.value)
    return None


def _check_sandbox(name: str, value: JdlValue, issues: list[JdlIssue]) -> None:
    if isinstance(value, JdlStr):
        return
    if isinstance(value, JdlList):
        if all(isinstance(item, JdlStr) for item in value.items):
            return
        issues.append(_error(WRONG_TYPE, f"{name} list entries must be strings"))
        return
    issues.append(_error(WRONG_TYPE, f"{name} must be a string or a list of strings"))


def validate_jdl(descriptor: JobDescriptor) -> list[JdlIssue]:
    """Collect blocking errors and advisory warnings; raises nothing."""
    issues: list[JdlIssue] = []

    executable = descriptor.get("Executable")
    if executable is None:
        issues.append(_error(MISSING_EXECUTABLE, "Executable attribute is required"))
    elif not isinstance(executable, JdlStr):
        issues.append(_error(WRONG_TYPE, "Executable must be a string"))
    elif not executable.value.strip():
        issues.append(_error(EMPTY_EXECUTABLE, "Executable must not be empty"))

    for name in _STRING_ONLY:
        value = descriptor.get(name)
        if value is not None and not isinstance(value, JdlStr):
            issues.append(_error(WRONG_TYPE, f"{name} must be a string"))

    for name in ("InputSandbox", "OutputSandbox"):
        value = descriptor.get(name)
        if value is not None:
            _check_sandbox(name, value, issues)

    for name in ("Requirements", "Rank"):
        value = descriptor.get(name)
        if value is not None and not isinstance(value, JdlExpr):
            issues.append(_error(WRONG_TYPE, f"{name} must be an expression"))

    parameters = descriptor.get("Parameters")
    if parameters is not None:
        if isinstance(parameters, JdlList):
            if not parameters.items:
                issues.append(_error(BAD_PARAMETRIC_SPEC, "Parameters list must not be empty"))
            elif any(isinstance(item, JdlExpr) for item in parameters.items):
                issues.append(
                    _error(BAD_PARAMETRIC_SPEC, "Parameters list entries must be literals")
                )
        elif _positive_int(parameters) is None:
            issues.append(
                _error(
                    BAD_PARAMETRIC_SPEC,
                    "Parameters must be a positive integer or a non-empty list",
                )
            )
    for name in ("ParameterStart", "ParameterStep"):
        value = descriptor.get(name)
        if value is not None and not (isinstance(value, JdlNum) and value.is_integral):
            issues.append(_error(BAD_PARAMETRIC_SPEC, f"{name} must be an integer"))

    for name, _value in descriptor:
        if name.lower() not in _RECOGNIZED_LOWER:
            issues.append(_warning(UNKNOWN_ATTRIBUTE, f"unrecognized attribute {name}"))

    return issues


def _render_param(value: JdlValue) -> str:
    if isinstance(value, JdlStr):
        return value.value
    if isinstance(value, JdlNum):
        return render_number(value.value)
    if isinstance(value, JdlBool):
        return "true" if value.value else "false"
    raise NotValidatedError(f"cannot render a {type(value).__name__} parameter")


def _substitute(value: JdlValue, rendering: str) -> JdlValue:
    if isinstance(value, JdlStr):
        return JdlStr(value.value.replace(PARAM_TOKEN, rendering))
    if isinstance(value, JdlList):
        return JdlList(tuple(_substitute(item, rendering) for item in value.items))
    return value


def expand_parametric(descriptor: JobDescriptor) -> list[JobDescriptor]:
    """One descriptor per parameter value, _PARAM_ substituted in string values.

    Non-parametric descriptors expand to themselves. The attribute set never
    changes; only string contents do.
    """
    errors = [issue for issue in validate_jdl(descriptor) if issue.severity == "error"]
    if errors:
        raise NotValidatedError("; ".join(issue.message for issue in errors))

    parameters = descriptor.get("Parameters")
    if parameters is None:
        return [descriptor]

    if isinstance(parameters, JdlList):
        renderings = [_render_param(item) for item in parameters.items]
    else:
        count = _positive_int(parameters)
        assert count is not None  # guaranteed by validation
        start_value = descriptor.get("ParameterStart")
        step_value = descriptor.get("ParameterStep")
        start = int(start_value.value) if isinstance(start_value, JdlNum) else 0
        step = int(step_value.value) if isinstance(step_value, JdlNum) else 1
        renderings = [str(start + i * step) for i in range(count)]

    return [
        JobDescriptor(
            attributes=tuple(
                (name, _substitute(value, rendering))
                for name, value in descriptor.attributes
            ),
            parse_warnings=descriptor.parse_warnings,
        )
        for rendering in renderings
    ]
