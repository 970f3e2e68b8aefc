import argparse
import json
import logging
import sys
from typing import Any, Optional, Sequence

from .config import Config, ConfigError
from .evaluation import OverrideError, PerturbedFn, Point, evaluate, evaluate_expr, nth_derivative_at
from .extremum import (classify_1d, classify_candidates, find_candidates, gradient_test,
                       hessian_oracle_classify, necessary_check, sufficient_condition_probe)
from .hyperreal import (DivisionByZeroError, ExponentOutOfBoundsError, GeneratorRegistry, Hyperreal,
                        NotNearstandardError, RegistryMismatchError)
from .logs import attach_handler, close_handlers
from .mucalc import (InapplicableChainRuleError, ProbeConfig, SampleConstructionError, chain_rule_check,
                     derivative_s_continuity_probe, difference_quotient_probe, mu_increment_check, mvt_check,
                     s_continuity_probe, taylor_check)
from .parser import ArityError, ExprSyntaxError, parse
from .reproduction import build_reproduction_suite
from .suite import CheckNotFoundError
from .tables import interaction_table
from .transcendental import EvaluationError


logger = logging.getLogger("hyperextrema")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

PROBES = ("scontinuity", "increment", "mvt", "taylor", "chain", "dscontinuity", "quotient", "necessary", "sufficient")

USAGE_ERRORS = (ExprSyntaxError, ArityError, EvaluationError, OverrideError, ConfigError, SampleConstructionError,
                InapplicableChainRuleError, NotNearstandardError, DivisionByZeroError, ExponentOutOfBoundsError,
                RegistryMismatchError, CheckNotFoundError, ValueError, OSError)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--generators", help="comma separated generator names, most significant first (default eps,delta)")
    common.add_argument("--mode", choices=("rational", "float"), help="coefficient field (default rational)")
    common.add_argument("--exp-bound", type=int, dest="exp_bound")
    common.add_argument("--max-terms", type=int, dest="max_terms")
    common.add_argument("--zero-tol", type=float, dest="zero_tol")
    common.add_argument("--config", help="TOML file whose keys mirror the Config fields")
    common.add_argument("--out", help="also write the JSON report to this file")
    common.add_argument("--json", action="store_true", help="print JSON instead of text")
    common.add_argument("--log-file", dest="log_file")
    common.add_argument("--verbose", action="store_true")
    return common


def _function_parser() -> argparse.ArgumentParser:
    function = argparse.ArgumentParser(add_help=False)
    function.add_argument("--expr", required=True, help="function body over x1..xn and the generators")
    function.add_argument("--arity", type=int)
    function.add_argument("--override", action="append", default=[], metavar="POINT=VALUE",
                          help="value override at a standard point, e.g. 0=eps or 1,2=3+eps")
    return function


def parse_args(argv: Optional[Sequence[str]]) -> argparse.Namespace:
    common = _common_parser()
    function = _function_parser()
    parser = argparse.ArgumentParser(prog="hyperextrema",
                                     description="m-extremum classification and mu-calculus probes over truncated hyperreal series")
    commands = parser.add_subparsers(dest="command", required=True)

    classify = commands.add_parser("classify", parents=[common, function], help="classify standard points")
    where = classify.add_mutually_exclusive_group(required=True)
    where.add_argument("--point", nargs="+")
    where.add_argument("--interval", nargs=2, metavar=("LO", "HI"))
    classify.add_argument("--grid", type=int, dest="grid_points")
    classify.add_argument("--max-order", type=int, dest="max_order")
    classify.add_argument("--hessian-oracle", action="store_true", dest="hessian_oracle")
    classify.add_argument("--workers", type=int)

    for name in ("eval", "derive"):
        command = commands.add_parser(name, parents=[common, function], help=f"{name} at a point")
        command.add_argument("--point", nargs="+", required=True)
        command.add_argument("--st", action="store_true", help="print only the standard part")
        if name == "derive":
            command.add_argument("--var", type=int, default=1)
            command.add_argument("--order", type=int, default=1)

    probe = commands.add_parser("probe", parents=[common, function], help="run a verification probe")
    probe.add_argument("probe", choices=PROBES)
    probe.add_argument("--point", nargs="+")
    probe.add_argument("--at-infinite", action="store_true", dest="at_infinite",
                       help="scontinuity at 1/eps with offsets ±eps")
    probe.add_argument("--x", nargs="+")
    probe.add_argument("--y", nargs="+")
    probe.add_argument("--order", type=int, default=2)
    probe.add_argument("--inner", help="inner function g for the chain rule probe")
    probe.add_argument("--delta-exponent", dest="delta_exponent")

    table = commands.add_parser("table", parents=[common], help="class-interaction table")
    table.add_argument("operation", choices=("add", "mul", "div"))

    reproduce = commands.add_parser("reproduce", parents=[common], help="run the worked examples as a check suite")
    reproduce.add_argument("--check", action="append", dest="only", metavar="NAME",
                           help="run only this check and its dependencies (repeatable)")
    return parser.parse_args(argv)


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.INFO
    logger.setLevel(level)
    if args.log_file:
        attach_handler(logger, logging.FileHandler(args.log_file), level)
    if args.verbose:
        attach_handler(logger, logging.StreamHandler(sys.stderr), logging.DEBUG)


def _close_logging():
    close_handlers(logger)


def load_config(args: argparse.Namespace) -> Config:
    config = Config.from_toml(args.config) if args.config else Config()
    overrides = {name: getattr(args, name, None)
                 for name in ("generators", "mode", "exp_bound", "max_terms", "zero_tol", "max_order", "grid_points",
                              "delta_exponent")}
    return config.updated(**overrides)


def parse_value(text: str, registry: GeneratorRegistry) -> Hyperreal:
    """A constant expression such as 1/3, -2 or 1+eps."""
    return evaluate_expr(parse(text, 0, registry), (), registry)


def parse_point(texts: Sequence[str], registry: GeneratorRegistry) -> Point:
    return Point(tuple(parse_value(t, registry) for t in texts))


def _function(args: argparse.Namespace, registry: GeneratorRegistry, arity: int, text: Optional[str] = None) -> PerturbedFn:
    arity = args.arity if args.arity is not None else arity
    overrides = []
    for item in args.override:
        point, separator, value = item.partition("=")
        if not separator:
            raise ValueError(f"Override must look like POINT=VALUE. Got {item}")
        coordinates = tuple(parse_value(c, registry).standard_part() for c in point.split(","))
        overrides.append((coordinates, parse_value(value, registry)))
    return PerturbedFn.parse(text if text is not None else args.expr, arity, registry, overrides)


def _emit(args: argparse.Namespace, payload: Any, text: str):
    document = json.dumps(payload, indent=2)
    print(document if args.json else text)
    if args.out:
        with open(args.out, "w") as file:
            file.write(document + "\n")


def _verdict_text(point: Any, verdict) -> str:
    text = f"{point}: {verdict.kind.value}"
    if verdict.decisive_order is not None:
        text += f" (order {verdict.decisive_order}, value {verdict.decisive_value}"
        if verdict.decisive_standard_part is not None:
            text += f", standard part {verdict.decisive_standard_part}"
        text += ")"
    return text


def cmd_classify(args: argparse.Namespace, config: Config) -> int:
    registry = config.registry()
    if args.interval:
        f = _function(args, registry, 1)
        lo, hi = (parse_value(b, registry).standard_part() for b in args.interval)
        candidates = find_candidates(f, (lo, hi), config.grid_points)
        verdicts = classify_candidates(f, candidates, config.max_order, args.workers)
        payload = {"candidates": candidates.to_json(),
                   "verdicts": [{"point": str(c.point), "verdict": v.to_json()} for c, v in zip(candidates, verdicts)]}
        lines = [f"{len(candidates)} candidates on [{lo}, {hi}]"]
        lines += [_verdict_text(c.point, v) for c, v in zip(candidates, verdicts)]
        _emit(args, payload, "\n".join(lines))
        return EXIT_OK
    point = parse_point(args.point, registry)
    f = _function(args, registry, len(point))
    if f.arity == 1:
        verdict = classify_1d(f, point, config.max_order)
    elif args.hessian_oracle:
        verdict = hessian_oracle_classify(f, point)
    else:
        verdict = gradient_test(f, point)
    _emit(args, {"point": point.to_json(), "verdict": verdict.to_json()}, _verdict_text(point, verdict))
    return EXIT_OK


def _value_report(args: argparse.Namespace, value: Hyperreal) -> int:
    if args.st:
        st = value.standard_part()
        _emit(args, {"standard_part": str(st)}, str(st))
    else:
        _emit(args, {"value": value.to_json(), "text": str(value), "class": value.magnitude_class().value,
                     "truncated": value.truncated},
              f"{value}    [{value.magnitude_class().value}{', truncated' if value.truncated else ''}]")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: Config) -> int:
    registry = config.registry()
    point = parse_point(args.point, registry)
    return _value_report(args, evaluate(_function(args, registry, len(point)), point))


def cmd_derive(args: argparse.Namespace, config: Config) -> int:
    registry = config.registry()
    point = parse_point(args.point, registry)
    f = _function(args, registry, len(point))
    return _value_report(args, nth_derivative_at(f, args.var, args.order, point))


def _probe_config(config: Config, registry: GeneratorRegistry, args: argparse.Namespace) -> ProbeConfig:
    cfg = config.probe_config()
    if args.probe == "scontinuity" and args.at_infinite:
        unit = registry.unit_exponent(0)
        cfg = ProbeConfig(cfg.delta_exponent, ((1, unit), (-1, unit)), cfg.max_taylor_order, cfg.random_directions, cfg.seed)
    return cfg


def cmd_probe(args: argparse.Namespace, config: Config) -> int:
    registry = config.registry()
    cfg = _probe_config(config, registry, args)
    if args.probe == "mvt":
        if not (args.x and args.y):
            raise ValueError("mvt needs --x and --y")
        f = _function(args, registry, 1)
        report = mvt_check(f, parse_point(args.x, registry), parse_point(args.y, registry), cfg)
    elif args.probe == "scontinuity" and args.at_infinite:
        f = _function(args, registry, 1)
        omega = registry.generator(0).reciprocal()
        report = s_continuity_probe(f, Point((omega,) * f.arity), cfg)
    else:
        if not args.point:
            raise ValueError(f"{args.probe} needs --point")
        point = parse_point(args.point, registry)
        f = _function(args, registry, len(point))
        match args.probe:
            case "scontinuity":
                report = s_continuity_probe(f, point, cfg)
            case "increment":
                report = mu_increment_check(f, point, cfg)
            case "taylor":
                report = taylor_check(f, point, args.order, cfg)
            case "chain":
                if not args.inner:
                    raise ValueError("chain needs --inner")
                g = _function(args, registry, 1, args.inner)
                report = chain_rule_check(f, g, point, cfg)
            case "dscontinuity":
                report = derivative_s_continuity_probe(f, point, cfg)
            case "quotient":
                report = difference_quotient_probe(f, point, cfg)
            case "necessary":
                report = necessary_check(f, point, cfg)
            case "sufficient":
                report = sufficient_condition_probe(f, point, cfg)
    payload = report.to_json()
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as file:
            file.write(text + "\n")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_table(args: argparse.Namespace, config: Config) -> int:
    table = interaction_table(args.operation, config.registry())
    _emit(args, table.to_json(), table.render())
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace, config: Config) -> int:
    suite = build_reproduction_suite(config.registry(), args.log_file or "hyperextrema_reproduction.log", args.only)
    try:
        result = suite.run()
    finally:
        suite.close_loggers()
    lines, payload = [], []
    for check in suite.checks:
        if check.name in result.skipped_checks:
            status = "SKIP"
        elif check.name in result.failed_checks:
            status = "FAIL"
        else:
            status = "PASS"
        lines.append(f"{status} {check.name}")
        payload.append({"check": check.name, "status": status})
    _emit(args, {"passed": result.passed, "checks": payload}, "\n".join(lines))
    return EXIT_OK if result.passed else EXIT_FAILED


COMMANDS = {
    "classify": cmd_classify,
    "eval": cmd_eval,
    "derive": cmd_derive,
    "probe": cmd_probe,
    "table": cmd_table,
    "reproduce": cmd_reproduce,
}


def _report_error(e: Exception, args: argparse.Namespace):
    print(f"error: {e}", file=sys.stderr)
    if isinstance(e, ExprSyntaxError) and e.text:
        print(f"  {e.text}", file=sys.stderr)
        print(f"  {' ' * e.position}^", file=sys.stderr)
    logger.debug(f"{args.command} failed.", exc_info=e)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    _configure_logging(args)
    try:
        config = load_config(args)
        logger.info(f"Starting {args.command}.")
        code = COMMANDS[args.command](args, config)
        logger.info(f"Finished {args.command}.")
        return code
    except USAGE_ERRORS as e:
        _report_error(e, args)
        return EXIT_USAGE
    finally:
        _close_logging()


def main_entrypoint():
    sys.exit(main())
