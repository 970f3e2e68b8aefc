from dataclasses import dataclass, field
import logging
from typing import Any, Callable, Optional

from .logs import attach_handler, close_handlers


@dataclass(slots=True)
class CheckResult:
    passed: bool
    result: Any
    exception: Optional[Exception]


@dataclass(slots=True)
class CheckDependency:
    check_name: str
    use_result_as_additional_args: bool = field(default=False, repr=False)
    use_result_as_additional_kwargs: bool = field(default=False, repr=False)
    additional_kwarg_name: Optional[str] = field(default=None, repr=False)

    def __post_init__(self):
        for attribute, expected in (("check_name", str), ("use_result_as_additional_args", bool),
                                    ("use_result_as_additional_kwargs", bool)):
            value = getattr(self, attribute)
            if not isinstance(value, expected):
                raise TypeError(f"{attribute} must be of type {expected.__name__}. Got {type(value)}")
        if self.use_result_as_additional_kwargs and not self.additional_kwarg_name:
            raise ValueError(f"additional_kwarg_name is required when use_result_as_additional_kwargs is True. Check: {self.check_name}")

    def __hash__(self) -> int:
        return hash(self.check_name)


def outcome_passed(result: Any) -> bool:
    """A check passes unless it returns False or a report/verdict-like object whose `passed` is False."""
    if isinstance(result, bool):
        return result
    passed = getattr(result, "passed", True)
    return bool(passed)


@dataclass(slots=True)
class Check:
    """A named verification step: func(*args, **kwargs) with logging to its own log file."""
    name: str
    log_path: str
    func: Callable
    args: tuple = field(default_factory=tuple)
    kwargs: dict = field(default_factory=dict)

    dependencies: list[CheckDependency] = field(default_factory=list)

    logger: logging.Logger = field(init=False, repr=False)

    def __post_init__(self):
        self._validate()
        self.logger = logging.getLogger(self.name)
        self.logger.setLevel(logging.DEBUG)
        # A check name may be reused with a new log file.
        close_handlers(self.logger)
        attach_handler(self.logger, logging.FileHandler(self.log_path))

    def _validate(self):
        for attribute, expected in (("name", str), ("log_path", str), ("args", tuple), ("kwargs", dict),
                                    ("dependencies", list)):
            value = getattr(self, attribute)
            if not isinstance(value, expected):
                raise TypeError(f"{attribute} must be {expected.__name__}. Got {type(value)}")
        if not callable(self.func):
            raise TypeError(f"func must be callable. Got {type(self.func)}")
        if ' ' in self.name:
            raise ValueError(f"Check name cannot contain spaces. Got {self.name}")

        seen = set()
        for dependency in self.dependencies:
            if not isinstance(dependency, CheckDependency):
                raise TypeError(f"dependency must be of type CheckDependency. Got {type(dependency)}")
            if dependency.check_name in seen:
                raise ValueError(f"Duplicate dependency name: {dependency.check_name}")
            if dependency.check_name == self.name:
                raise ValueError(f"Got dependency with same name as Check. Check: {self.name}. Dependency: {dependency.check_name}")
            seen.add(dependency.check_name)

    def get_dependencies_names(self) -> set[str]:
        return {dependency.check_name for dependency in self.dependencies}

    def run(self, additional_args: Optional[tuple[Any, ...]] = None, additional_kwargs: Optional[dict[str, Any]] = None,
            skipped_dependants: Optional[list[str]] = None) -> CheckResult:
        args = self.args + tuple(additional_args or ())
        kwargs = {**self.kwargs, **(additional_kwargs or {})}
        try:
            self.logger.info(f"Starting {self.name}.")
            result = self.func(*args, **kwargs)
        except Exception as e:
            self.logger.exception(e)
            if skipped_dependants:
                self.logger.error(f"Dependant checks that will not run: {', '.join(skipped_dependants)}.")
            return CheckResult(False, None, e)
        passed = outcome_passed(result)
        if passed:
            self.logger.info(f"Finished {self.name}.")
        else:
            self.logger.error(f"{self.name} did not pass. Result: {result}")
            if skipped_dependants:
                self.logger.error(f"Dependant checks that will not run: {', '.join(skipped_dependants)}.")
        return CheckResult(passed, result, None)

    def close_logger(self):
        close_handlers(self.logger)
