# src/evaluation/report.py
"""
System x test-set EER report
Rows keep system declaration order; columns run from the youngest child
band to the oldest, then adult. Missing or excluded cells render as "-".
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import DataError

CHILD_COLUMNS = ("child-young", "child-mid", "child-old")
ADULT_COLUMN = "adult"
MISSING = "-"


def order_test_sets(names: Sequence[str]) -> List[str]:
    rank = {name: i for i, name in enumerate(CHILD_COLUMNS + (ADULT_COLUMN,))}
    return sorted(dict.fromkeys(names), key=lambda n: (rank.get(n, len(rank)), n))


@dataclass
class EvalReport:
    systems: List[str]
    test_sets: List[str]
    cells: Dict[Tuple[str, str], Optional[float]]
    metadata: dict = field(default_factory=dict)

    def eer_percent(self, system: str, test_set: str) -> Optional[float]:
        return self.cells.get((system, test_set))

    @property
    def rows(self) -> List[Tuple[str, str, Optional[float]]]:
        return [(s, t, self.cells.get((s, t))) for s in self.systems for t in self.test_sets]

    def child_mean(self, system: str) -> Optional[float]:
        """Mean EER (percent) over the child columns present for a system"""
        values = [self.cells.get((system, c)) for c in self.test_sets if c in CHILD_COLUMNS]
        values = [v for v in values if v is not None]
        return float(np.mean(values)) if values else None

    def to_frame(self) -> pd.DataFrame:
        data = [[MISSING if self.cells.get((s, t)) is None else f"{self.cells[(s, t)]:.2f}"
                 for t in self.test_sets] for s in self.systems]
        frame = pd.DataFrame(data, index=self.systems, columns=self.test_sets)
        frame.index.name = "system"
        return frame

    def to_tsv(self) -> str:
        lines = ["\t".join(["system"] + self.test_sets)]
        frame = self.to_frame()
        for system in self.systems:
            lines.append("\t".join([system] + list(frame.loc[system])))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        frame = self.to_frame()
        return "EER (%)\n" + frame.to_string(justify="right") + "\n"

    def write(self, report_dir: Path):
        report_dir = Path(report_dir)
        report_dir.mkdir(parents=True, exist_ok=True)
        (report_dir / "report.tsv").write_text(self.to_tsv(), encoding="utf-8")
        (report_dir / "report.txt").write_text(self.to_text(), encoding="utf-8")
        (report_dir / "report_meta.json").write_text(
            json.dumps(self.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def build_report(results: Dict[Tuple[str, str], Optional[float]], systems: Sequence[str],
                 test_sets: Sequence[str], metadata: Optional[dict] = None) -> EvalReport:
    """
    Assemble EER fractions into a percent grid

    Args:
        results: (system, test_set) -> EER fraction; absent or None cells become "-"
        systems: row order
        test_sets: column names (reordered young -> old, then adult)
        metadata: seeds, checkpoint ids, config hash

    Returns:
        EvalReport with EERs in percent
    """
    cells = {}
    for (system, test_set), value in results.items():
        if value is None:
            continue
        if not 0.0 <= value <= 1.0:
            raise DataError(f"EER {value} for {system}/{test_set} outside [0, 1]")
        cells[(system, test_set)] = 100.0 * value
    return EvalReport(list(systems), order_test_sets(test_sets), cells, dict(metadata or {}))
