"""
Summary tables shared by the report and the generator ground truth, so
both write the same CSV schemas.
"""
import logging

import pandas as pd

logger = logging.getLogger(__name__)

ACCESS_COLUMNS = ["phase", "level", "share", "mean_cost", "modes"]
RANKING_COLUMNS = ["rank", "label", "size_bytes", "share"]
PHASE_COLUMNS = ["label", "routine", "mocl_file", "mocl_line", "duration_ms"]


def format_share(share):
    """fixed point, 4 decimals"""
    return "{:.4f}".format(share)


def format_cost(cost):
    if cost is None:
        return ""
    return "{:.1f}".format(cost)


def format_modes(modes):
    return ",".join(str(mode) for mode in modes)


def access_frame(rows):
    """rows with phase, level, share, mean_cost and modes attributes"""
    records = [
        dict(
            phase=row.phase,
            level=getattr(row.level, "name", row.level),
            share=format_share(row.share),
            mean_cost=format_cost(row.mean_cost),
            modes=format_modes(row.modes)
        )
        for row in rows
    ]
    return pd.DataFrame.from_records(records, columns=ACCESS_COLUMNS)


def ranking_frame(rows):
    records = [
        dict(
            rank="" if row.rank is None else row.rank,
            label=row.label,
            size_bytes="" if row.size_bytes is None else row.size_bytes,
            share=format_share(row.share)
        )
        for row in rows
    ]
    return pd.DataFrame.from_records(records, columns=RANKING_COLUMNS)


def phase_frame(phases, median_duration):
    """phase table, duration = phase width x median instance duration (ns)"""
    records = [
        dict(
            label=phase.label,
            routine=phase.dominant_routine,
            mocl_file=phase.mocl[0],
            mocl_line=phase.mocl[1],
            duration_ms="{:.6g}".format(phase.width * median_duration / 1e6)
        )
        for phase in phases
    ]
    return pd.DataFrame.from_records(records, columns=PHASE_COLUMNS)


def write_csv(frame, path):
    frame.to_csv(str(path), index=False)
    logger.debug("wrote %s rows to %s", len(frame), path)
    return path


def read_csv(path):
    """read a table back with every column as text (empty cells stay empty)"""
    return pd.read_csv(str(path), dtype=str, keep_default_na=False)
