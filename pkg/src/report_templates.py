"""
╔══════════════════════════════════════════════════════════════════════════════╗
║                           REPORT SUMMARY TEMPLATES                            ║
║                                                                               ║
║  Text templates for summary.md, filled from the report.json document.         ║
║  Templates use {placeholder} fields for str.format.                           ║
╚══════════════════════════════════════════════════════════════════════════════╝
"""

from typing import Optional


# ══════════════════════════════════════════════════════════════════════════════
#  TEMPLATES
# ══════════════════════════════════════════════════════════════════════════════

HEADER = """# Market efficiency report

Blocks {from_block} to {to_block}; trades of at least ${min_trade_usd:,.0f} audited,
gains above ${min_gain_usd:,.0f} count as optimizable, cycles above ${min_profit_usd:,.0f} count as opportunities.
"""

GAINS_HEADER = """
## Optimized routing

| Network | Analyzed | Optimizable | Share | Mean gain | Median gain | Top 5% gain |
|---|---:|---:|---:|---:|---:|---:|
"""

GAINS_ROW = "| {network} | {analyzed} | {optimizable} | {share} | {mean} | {median} | {top5} |\n"

PATHS_HEADER = """
## Paths used by optimizable trades

| Network | 1 | 2 | 3 | >=4 |
|---|---:|---:|---:|---:|
"""

PATHS_ROW = "| {network} | {p1} | {p2} | {p3} | {p4} |\n"

ARBITRAGE_HEADER = """
## Cyclic arbitrage

| Period | Blocks scanned | Blocks with arbitrage | Mean profit | USD-weighted profit | Avg. duration | Runs | Volatility corr. |
|---|---:|---:|---:|---:|---:|---:|---:|
"""

ARBITRAGE_ROW = (
    "| {name} | {blocks_scanned} | {blocks_with_arbitrage} | {mean_profit} | {weighted_profit} "
    "| {duration} | {runs} | {correlation} |\n"
)

EMPTY_SECTION = "\n_No data._\n"


# ══════════════════════════════════════════════════════════════════════════════
#  RENDERING
# ══════════════════════════════════════════════════════════════════════════════

def _pct(value: Optional[float], digits: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}%"


def _num(value: Optional[float], digits: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def _bound(value: Optional[int]) -> str:
    return "start" if value is None else str(value)


def render_summary(document: dict) -> str:
    """Markdown summary of a report document."""
    params = document["parameters"]
    text = HEADER.format(
        from_block=_bound(params.get("from_block")),
        to_block="end" if params.get("to_block") is None else params["to_block"],
        min_trade_usd=params["min_trade_usd"],
        min_gain_usd=params["min_gain_usd"],
        min_profit_usd=params["min_profit_usd"],
    )

    networks = document["networks"]
    text += GAINS_HEADER if networks else GAINS_HEADER.split("\n|")[0] + "\n" + EMPTY_SECTION
    for network, summary in networks.items():
        gains, share = summary["gain_stats"], summary["optimizable"]
        text += GAINS_ROW.format(
            network=network,
            analyzed=share["analyzed"],
            optimizable=share["optimizable"],
            share=_pct(None if share["share"] is None else 100 * share["share"], 1),
            mean=_pct(gains["mean_pct"]),
            median=_pct(gains["median_pct"]),
            top5=_pct(gains["top5_mean_pct"]),
        )

    if networks:
        text += PATHS_HEADER
        for network, summary in networks.items():
            dist = summary["path_distribution"]
            text += PATHS_ROW.format(network=network, p1=dist["1"], p2=dist["2"], p3=dist["3"], p4=dist[">=4"])

    periods = document["periods"]
    text += ARBITRAGE_HEADER if periods else ARBITRAGE_HEADER.split("\n|")[0] + "\n" + EMPTY_SECTION
    for period in periods:
        text += ARBITRAGE_ROW.format(
            name=period["name"],
            blocks_scanned=period["blocks_scanned"],
            blocks_with_arbitrage=period["blocks_with_arbitrage"],
            mean_profit=_pct(period["mean_relative_profit_pct"]),
            weighted_profit=_pct(period["usd_weighted_profit_pct"]),
            duration=_num(period["mean_duration_blocks"]),
            runs=period["runs"],
            correlation=_num(period["volatility_correlation"]),
        )
    return text
