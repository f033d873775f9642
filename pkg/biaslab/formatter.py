# biaslab/formatter.py
# Renders command results as a plain-text table, JSON or CSV.

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import pandas as pd

FORMATS = ("table", "json", "csv")

Records = List[Dict[str, Any]]


@dataclass(frozen=True)
class Output:
    """
    What a command produced. `payload` is the JSON document; `sections`
    are the named record lists used by the table and CSV renderings.
    """
    payload: Mapping[str, Any]
    sections: Mapping[str, Records] = field(default_factory=dict)
    exit_code: int = 0


class ReportFormatter:

    @staticmethod
    def format_number(value: Any) -> str:
        # Compact display for tables, e.g. 0.612500000001 -> 0.6125
        if value is None:
            return "-"
        if isinstance(value, bool):
            return "yes" if value else "no"
        if isinstance(value, float):
            return f"{value:.6g}"
        if isinstance(value, (list, tuple)):
            return ",".join(str(v) for v in value)
        return str(value)

    @staticmethod
    def format_table(records: Sequence[Mapping[str, Any]], title: Optional[str] = None) -> str:
        lines = [title, "=" * len(title)] if title else []
        if not records:
            return "\n".join(lines + ["(no rows)"])

        columns = list(dict.fromkeys(key for record in records for key in record))
        cells = [[ReportFormatter.format_number(record.get(c)) for c in columns] for record in records]
        widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]

        lines.append("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip())
        lines.append("  ".join("-" * w for w in widths))
        for row in cells:
            lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
        return "\n".join(lines)

    @staticmethod
    def format_json(payload: Mapping[str, Any]) -> str:
        return json.dumps(payload, indent=2, ensure_ascii=False)

    @staticmethod
    def format_csv(sections: Mapping[str, Records]) -> str:
        frames = []
        for name, records in sections.items():
            frame = pd.DataFrame.from_records(records)
            if len(sections) > 1:
                frame.insert(0, "table", name)
            frames.append(frame)
        if not frames:
            return ""
        frame = pd.concat(frames, ignore_index=True, sort=False) if len(frames) > 1 else frames[0]
        return frame.to_csv(index=False, lineterminator="\n")

    @staticmethod
    def render(output: Output, fmt: str = "table") -> str:
        if fmt == "json":
            return ReportFormatter.format_json(output.payload) + "\n"
        if fmt == "csv":
            return ReportFormatter.format_csv(output.sections)
        blocks = [ReportFormatter.format_table(records, title) for title, records in output.sections.items()]
        return "\n\n".join(blocks) + "\n"
