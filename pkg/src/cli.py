"""
╔══════════════════════════════════════════════════════════════════════════════╗
║                         AMM-EFFICIENCY COMMAND LINE                           ║
║                                                                               ║
║  route-audit, arb-scan, report, validate and generate subcommands.            ║
║  Every flag can also come from AMMEFF_<FLAG> (e.g. AMMEFF_MIN_GAIN_USD).      ║
╚══════════════════════════════════════════════════════════════════════════════╝
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from core import OutputWriter
from core.errors import EXIT_CODES, AmmAnalysisError, ConfigError, InconsistentDataError
from core.schemas import AuditResult, CycleOpportunity, OpportunityRun

from .arbitrage import ArbScanner, enumerate_cycles
from .config import DEFAULT_GRAPH, GeneratorConfig, PeriodSpec, RunConfig
from .generator import MarketGenerator
from .graph import PoolGraph
from .ingest import (
    build_snapshots,
    parse_blocks,
    parse_events,
    parse_graph,
    parse_prices,
    parse_reserves,
    read_json,
    read_jsonl,
    validate_consistency,
)
from .metrics import aggregate, emit_report
from .routing import RouteAuditor

ENV_PREFIX = "AMMEFF_"
ARB_SCAN_META = "arb_scan.meta.json"


# ══════════════════════════════════════════════════════════════════════════════
#  PARSER
# ══════════════════════════════════════════════════════════════════════════════

def env_name(flag: str) -> str:
    return ENV_PREFIX + flag.lstrip("-").upper().replace("-", "_")


def _env_list(flag: str) -> List[str]:
    return [item for item in os.environ.get(env_name(flag), "").split(",") if item]


def _add(parser: argparse.ArgumentParser, flag: str, **kwargs) -> None:
    """add_argument with the default taken from the environment when set."""
    value = os.environ.get(env_name(flag))
    if value is not None and kwargs.get("action") != "append":
        if kwargs.get("action") == "store_true":
            kwargs["default"] = value.strip().lower() in ("1", "true", "yes", "on")
        else:
            kwargs["default"] = value
    parser.add_argument(flag, **kwargs)


def _epilog() -> str:
    lines = ["exit codes:"]
    lines += [f"  {code}  {meaning}" for code, meaning in sorted(EXIT_CODES.items())]
    lines.append(f"\nenvironment: every flag may be set as {ENV_PREFIX}<FLAG>, e.g. {env_name('--min-gain-usd')}=50;")
    lines.append("explicit flags win.")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add(common, "--graph", type=Path, default=DEFAULT_GRAPH, help="Pool graph config (JSON)")
    _add(common, "--from-block", type=int, dest="from_block")
    _add(common, "--to-block", type=int, dest="to_block")
    _add(common, "--out", type=Path, dest="output_dir", default=Path("data/results"), help="Output directory")
    _add(common, "--jobs", type=int, default=None, help="Worker processes (default: all cores)")
    _add(common, "--log-level", default="INFO", choices=["TRACE", "DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(
        prog="amm-efficiency",
        description="Routing and arbitrage efficiency of constant-product exchanges",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", title="subcommands")

    def sub(name: str, help_text: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(
            name, parents=[common], help=help_text, epilog=_epilog(),
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    audit = sub("route-audit", "Re-route historical trades over independent paths")
    _add(audit, "--events", type=Path)
    _add(audit, "--reserves", type=Path)
    _add(audit, "--prices", type=Path)
    _add(audit, "--blocks", type=Path)
    _add(audit, "--min-trade-usd", type=float, dest="min_trade_usd")
    _add(audit, "--min-gain-usd", type=float, dest="min_gain_usd")
    _add(audit, "--path-usage-threshold", type=float, dest="path_usage_threshold")
    _add(audit, "--max-hops", type=int, dest="max_hops")
    _add(audit, "--path-network", dest="path_network")

    scan = sub("arb-scan", "Scan blocks for cyclic arbitrage")
    _add(scan, "--reserves", type=Path)
    _add(scan, "--prices", type=Path)
    _add(scan, "--blocks", type=Path)
    _add(scan, "--min-profit-usd", type=float, dest="min_profit_usd")
    _add(scan, "--max-cycle-len", type=int, dest="max_cycle_len")
    _add(scan, "--cycle-network", dest="cycle_network")

    report = sub("report", "Aggregate audit and scan results into report files")
    _add(report, "--results", type=Path, help="Directory with audits_*.jsonl and scan results (default: --out)")
    _add(report, "--prices", type=Path)
    _add(report, "--blocks", type=Path)
    _add(report, "--period", action="append", dest="periods", metavar="NAME:FROM:TO")
    _add(report, "--volatility-token", dest="volatility_token")

    validate = sub("validate", "Replay swaps against reserves and report inconsistencies")
    _add(validate, "--events", type=Path)
    _add(validate, "--reserves", type=Path)
    _add(validate, "--tolerance", type=float, dest="consistency_tolerance")
    _add(validate, "--no-closure", action="store_true", dest="no_closure")

    generate = sub("generate", "Write a synthetic formula-consistent dataset")
    _add(generate, "--network", default="period_2", help="Cycle network whose pools are simulated")
    _add(generate, "--seed", type=int, dest="random_seed", default=0)
    _add(generate, "--num-blocks", type=int, dest="num_blocks")
    _add(generate, "--start-block", type=int, dest="start_block")
    _add(generate, "--swaps-per-block", type=float, dest="swaps_per_block")
    _add(generate, "--trade-usd-min", type=float, dest="trade_usd_min")
    _add(generate, "--trade-usd-max", type=float, dest="trade_usd_max")
    _add(generate, "--multi-swap-share", type=float, dest="multi_swap_share")
    _add(generate, "--pool-depth-usd", type=float, dest="pool_depth_usd")
    _add(generate, "--mispricing", type=float)
    _add(generate, "--daily-volatility", type=float, dest="daily_volatility")
    return parser


def _fields(args: argparse.Namespace, model) -> dict:
    return {
        name: value for name, value in vars(args).items()
        if name in model.model_fields and value is not None
    }


def run_config(args: argparse.Namespace) -> RunConfig:
    fields = _fields(args, RunConfig)
    fields.pop("periods", None)
    try:
        fields["periods"] = [PeriodSpec.parse(text) for text in (getattr(args, "periods", None) or _env_list("--period"))]
    except ValueError as exc:
        raise ConfigError(f"bad --period: {exc}") from exc
    if getattr(args, "no_closure", False):
        fields["check_closure"] = False
    return RunConfig(subcommand=args.command, **fields)


# ══════════════════════════════════════════════════════════════════════════════
#  SUBCOMMANDS
# ══════════════════════════════════════════════════════════════════════════════

def route_audit(config: RunConfig) -> int:
    graph_config = parse_graph(config.graph)
    path_config = graph_config.path_network(config.path_network)
    if config.max_hops is not None:
        path_config = path_config.model_copy(update={"max_hops": config.max_hops})
    graph = PoolGraph.from_config(graph_config)

    events = parse_events(config.events)
    snapshots = build_snapshots(parse_reserves(config.reserves))
    auditor = RouteAuditor(config, graph, path_config, snapshots, parse_prices(config.prices), parse_blocks(config.blocks))
    results = sorted(auditor.run(auditor.select(events)), key=lambda r: r.ordering_key)

    name = f"audits_{config.path_network}"
    writer = OutputWriter(config.output_dir)
    path = writer.write_jsonl(f"{name}.jsonl", results)
    optimizable = sum(1 for result in results if result.optimizable)
    writer.write_json(f"{name}.meta.json", {
        "subcommand": config.subcommand,
        "parameters": config.provenance(),
        "audited": len(results),
        "optimizable": optimizable,
    })
    print(f"route-audit: {len(results)} trades audited, {optimizable} optimizable -> {path}")
    return 0


def _scan_range(config: RunConfig, reserve_blocks: Sequence[int], calendar_blocks: Sequence[int]) -> range:
    """Configured range; by default from the first block with a known start state."""
    start = config.from_block if config.from_block is not None else (min(reserve_blocks) + 1 if reserve_blocks else None)
    end = config.to_block if config.to_block is not None else (max(calendar_blocks) if calendar_blocks else None)
    if start is None or end is None or end < start:
        raise ConfigError(f"nothing to scan between {start} and {end}")
    return range(start, end + 1)


def arb_scan(config: RunConfig) -> int:
    graph_config = parse_graph(config.graph)
    network = graph_config.cycle_network(config.cycle_network)
    max_len = config.max_cycle_len or network.max_cycle_len
    graph = PoolGraph.from_config(graph_config, network.pools)
    cycles = enumerate_cycles(graph, network.base_tokens, max_len)

    reserves = parse_reserves(config.reserves)
    calendar = parse_blocks(config.blocks)
    blocks = _scan_range(config, [record.block for record in reserves], calendar.blocks)
    scanner = ArbScanner(config, cycles, build_snapshots(reserves), parse_prices(config.prices), calendar)
    scans = scanner.run(list(blocks))

    opportunities = [opportunity for scan in scans for opportunity in scan.opportunities]
    runs = ArbScanner.runs(scans)
    missing = [scan.block for scan in scans if not scan.available]
    if missing:
        logger.warning(f"{len(missing)} blocks in range have no timestamp; they break opportunity runs")

    writer = OutputWriter(config.output_dir)
    writer.write_jsonl("opportunities.jsonl", opportunities)
    writer.write_jsonl("runs.jsonl", runs)
    writer.write_json(ARB_SCAN_META, {
        "subcommand": config.subcommand,
        "parameters": config.provenance(),
        "from_block": blocks.start,
        "to_block": blocks.stop - 1,
        "cycles": len(cycles),
        "max_cycle_len": max_len,
        "blocks_scanned": len(scans) - len(missing),
        "missing_blocks": missing,
    })
    arb_blocks = len({o.block for o in opportunities})
    print(f"arb-scan: {len(scans) - len(missing)} blocks scanned, {arb_blocks} with arbitrage, "
          f"{len(opportunities)} opportunities, {len(runs)} runs")
    return 0


def _read_results(path: Path, model) -> list:
    if not path.exists():
        logger.info(f"No {path.name} in {path.parent}")
        return []
    return [record for _, record in read_jsonl(path, model)]


def report(config: RunConfig) -> int:
    results = config.results_dir
    audits: List[AuditResult] = []
    parameters = config.provenance()
    sources: Dict[str, dict] = {}
    for path in sorted(results.glob("audits_*.jsonl")):
        audits += _read_results(path, AuditResult)
        meta = path.with_name(path.stem + ".meta.json")
        if meta.exists():
            sources[path.stem] = read_json(meta)
    opportunities = _read_results(results / "opportunities.jsonl", CycleOpportunity)
    runs = _read_results(results / "runs.jsonl", OpportunityRun)

    scanned: List[int] = []
    if (results / ARB_SCAN_META).exists():
        scan_meta = read_json(results / ARB_SCAN_META)
        sources["arb_scan"] = scan_meta
        missing = set(scan_meta["missing_blocks"])
        scanned = [b for b in range(scan_meta["from_block"], scan_meta["to_block"] + 1) if b not in missing]

    # thresholds actually used by the runs being reported
    for meta in sources.values():
        for key, value in meta.get("parameters", {}).items():
            if key in ("min_trade_usd", "min_gain_usd", "path_usage_threshold") and meta["subcommand"] == "route-audit":
                parameters[key] = value
            if key in ("min_profit_usd", "cycle_network", "max_cycle_len") and meta["subcommand"] == "arb-scan":
                parameters[key] = value
    parameters["sources"] = sources

    audits = [a for a in audits if config.in_range(a.block)]
    opportunities = [o for o in opportunities if config.in_range(o.block)]
    runs = [r for r in runs if config.in_range(r.start_block)]
    scanned = [b for b in scanned if config.in_range(b)]

    pools = parse_graph(config.graph).build_pools()
    aggregates = aggregate(
        parameters, audits, opportunities, runs, scanned,
        parse_blocks(config.blocks), parse_prices(config.prices),
        config.periods, config.volatility_token, pools,
    )
    written = emit_report(aggregates, config.output_dir)
    print(f"report: {len(audits)} audits, {len(opportunities)} opportunities -> {written[0].parent}")
    return 0


def validate(config: RunConfig) -> int:
    pools = parse_graph(config.graph).build_pools()
    events = [event for event in parse_events(config.events) if config.in_range(event.block)]
    snapshots = build_snapshots(parse_reserves(config.reserves))
    result = validate_consistency(events, snapshots, pools, config.consistency_tolerance, config.check_closure)

    writer = OutputWriter(config.output_dir)
    path = writer.write_json("consistency.json", {
        **result.model_dump(mode="json"),
        "parameters": config.provenance(),
    })
    print(f"validate: {result.checked} swaps checked, {len(result.flags)} flagged, "
          f"{len(result.closure_mismatches)} closure mismatches -> {path}")
    if not result.ok:
        raise InconsistentDataError(f"dataset does not replay; see {path}")
    return 0


def generate(args: argparse.Namespace) -> int:
    fields = _fields(args, GeneratorConfig)
    config = GeneratorConfig(**fields)
    written = MarketGenerator(config).generate().write(config.output_dir)
    print(f"generate: {len(written)} files -> {config.output_dir}")
    return 0


COMMANDS = {
    "route-audit": route_audit,
    "arb-scan": arb_scan,
    "report": report,
    "validate": validate,
}


# ══════════════════════════════════════════════════════════════════════════════
#  ENTRY POINT
# ══════════════════════════════════════════════════════════════════════════════

def _configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level, format="{time:HH:mm:ss} | {level: <7} | {message}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    _configure_logging(args.log_level)
    try:
        if args.command == "generate":
            return generate(args)
        return COMMANDS[args.command](run_config(args))
    except ValidationError as exc:
        logger.error(f"invalid configuration: {exc}")
        return ConfigError.exit_code
    except AmmAnalysisError as exc:
        logger.error(str(exc))
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
