from dataclasses import dataclass, field
import graphlib
from typing import Iterable, Optional

from .check import Check, CheckResult


class DependencyNotFoundError(Exception):
    pass


class CheckNotFoundError(Exception):
    pass


class CircularDependencyError(Exception):
    pass


@dataclass(slots=True)
class SuiteResult:
    passed_checks_results: dict[str, CheckResult]
    failed_checks: set[str]
    skipped_checks: set[str] = field(default_factory=set)
    results: dict[str, CheckResult] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failed_checks and not self.skipped_checks


def _find_cycle(graph: dict[str, set[str]]) -> Optional[list[str]]:
    """First dependency cycle met walking the graph in declaration order, as a closed path."""
    done: set[str] = set()
    path: list[str] = []

    def visit(name: str) -> Optional[list[str]]:
        if name in path:
            return path[path.index(name):] + [name]
        if name in done:
            return None
        path.append(name)
        for dependency in sorted(graph[name]):
            cycle = visit(dependency)
            if cycle:
                return cycle
        path.pop()
        done.add(name)
        return None

    for name in graph:
        cycle = visit(name)
        if cycle:
            return cycle
    return None


@dataclass(slots=True)
class CheckSuite:
    """Checks run in dependency order; a check whose dependency did not pass is skipped."""
    checks: list[Check]
    graph: dict[str, set[str]] = field(init=False, repr=False)

    def __post_init__(self):
        if not isinstance(self.checks, list):
            raise TypeError(f"checks must be list. Got {type(self.checks)}")
        for check in self.checks:
            if not isinstance(check, Check):
                raise TypeError(f"check must be of type Check. Got {type(check)}")
        self.graph = self._build_graph()
        cycle = _find_cycle(self.graph)
        if cycle:
            raise CircularDependencyError(f"Found circular dependency: {' -> '.join(cycle)}")
        self.checks = self._ordered()

    def _build_graph(self) -> dict[str, set[str]]:
        graph: dict[str, set[str]] = {}
        for check in self.checks:
            if check.name in graph:
                raise ValueError(f"Duplicate check name: {check.name}")
            graph[check.name] = check.get_dependencies_names()
        for check in self.checks:
            missing = sorted(graph[check.name].difference(graph))
            if missing:
                raise DependencyNotFoundError(
                    f"Dependency not found: {missing[0]}. Check: {check.name}. Dependencies: {graph[check.name]}")
        return graph

    def _ordered(self) -> list[Check]:
        # Among checks ready at the same time, declaration order wins.
        position = {check.name: i for i, check in enumerate(self.checks)}
        sorter = graphlib.TopologicalSorter(self.graph)
        sorter.prepare()
        ordered = []
        while sorter.is_active():
            ready = sorted(sorter.get_ready(), key=position.__getitem__)
            ordered.extend(self.get_check(name) for name in ready)
            sorter.done(*ready)
        return ordered

    def get_check(self, check_name: str) -> Check:
        for check in self.checks:
            if check.name == check_name:
                return check
        raise CheckNotFoundError(f"Check not found: {check_name}")

    def get_dependant_checks(self, check_name: str) -> list[Check]:
        """Checks that depend on check_name directly or through other checks, in run order."""
        reached = {check_name}
        for check in self.checks:
            if self.graph[check.name] & reached:
                reached.add(check.name)
        return [check for check in self.checks if check.name in reached and check.name != check_name]

    def get_required_checks(self, check_names: Iterable[str]) -> list[Check]:
        """The named checks and everything they depend on, in run order."""
        required = set()
        pending = [self.get_check(name).name for name in check_names]
        while pending:
            name = pending.pop()
            if name not in required:
                required.add(name)
                pending.extend(self.graph[name])
        return [check for check in self.checks if check.name in required]

    def run(self) -> SuiteResult:
        """
        Runs the checks in dependency order.

        A check runs only after its dependencies passed; dependants of a failed
        check are skipped. Results of passed checks are fed to dependants as
        additional args or kwargs when their CheckDependency asks for it.

        Returns:
            SuiteResult: results of passed checks, names of failed and skipped checks.
        """
        result = SuiteResult({}, set())
        for check in self.checks:
            if not self.graph[check.name].issubset(result.passed_checks_results):
                result.skipped_checks.add(check.name)
                continue
            upstream = {d.check_name: result.passed_checks_results[d.check_name].result for d in check.dependencies}
            check_result = check.run(
                additional_args=tuple(upstream[d.check_name] for d in check.dependencies if d.use_result_as_additional_args),
                additional_kwargs={d.additional_kwarg_name: upstream[d.check_name]
                                   for d in check.dependencies if d.use_result_as_additional_kwargs},
                skipped_dependants=[c.name for c in self.get_dependant_checks(check.name)])
            result.results[check.name] = check_result
            if check_result.passed:
                result.passed_checks_results[check.name] = check_result
            else:
                result.failed_checks.add(check.name)
        return result

    def close_loggers(self):
        for check in self.checks:
            check.close_logger()
