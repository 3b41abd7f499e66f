"""Job description language: parse, validate, serialize, parametric expansion."""

from gridgate.jdl.checks import (
    BAD_PARAMETRIC_SPEC,
    EMPTY_EXECUTABLE,
    MISSING_EXECUTABLE,
    NotValidatedError,
    PARAM_TOKEN,
    UNKNOWN_ATTRIBUTE,
    WRONG_TYPE,
    expand_parametric,
    validate_jdl,
)
from gridgate.jdl.model import (
    JdlBool,
    JdlExpr,
    JdlIssue,
    JdlList,
    JdlNum,
    JdlStr,
    JdlValue,
    JobDescriptor,
    render_number,
)
from gridgate.jdl.parser import (
    DUPLICATE_ATTRIBUTE,
    JdlSyntaxError,
    parse_jdl,
    serialize_jdl,
)

__all__ = [
    "BAD_PARAMETRIC_SPEC",
    "DUPLICATE_ATTRIBUTE",
    "EMPTY_EXECUTABLE",
    "JdlBool",
    "JdlExpr",
    "JdlIssue",
    "JdlList",
    "JdlNum",
    "JdlStr",
    "JdlSyntaxError",
    "JdlValue",
    "JobDescriptor",
    "MISSING_EXECUTABLE",
    "NotValidatedError",
    "PARAM_TOKEN",
    "UNKNOWN_ATTRIBUTE",
    "WRONG_TYPE",
    "expand_parametric",
    "parse_jdl",
    "render_number",
    "serialize_jdl",
    "validate_jdl",
]
