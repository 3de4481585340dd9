"""Published per-subject results used as regression fixtures for the p-value."""
from __future__ import annotations

import csv
import io
from importlib import resources
from typing import NamedTuple

from .significance import chance_alarm_probability, predicted_count, random_predictor_pvalue


class PublishedRow(NamedTuple):
    dataset: str
    subject: str
    n_seizures: int
    interictal_hours: float
    sen_pct: float
    sen_sd: float
    fpr: float
    fpr_sd: float
    p_value: float

    @property
    def worst_k(self) -> int:
        """Predicted seizures at the lowest reported sensitivity."""
        return predicted_count(self.sen_pct - self.sen_sd, self.n_seizures)

    @property
    def worst_fpr(self) -> float:
        return self.fpr + self.fpr_sd

    def recomputed_p(self, sop_hours: float = 0.5) -> float:
        P = chance_alarm_probability(self.worst_fpr, sop_hours)
        return random_predictor_pvalue(self.worst_k, self.n_seizures, P)


def load_published_tables() -> list:
    text = resources.files(__package__).joinpath("data/published_tables.csv").read_text()
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(PublishedRow(r["dataset"], r["subject"], int(r["n_seizures"]),
                                 float(r["interictal_hours"]), float(r["sen_pct"]),
                                 float(r["sen_sd"]), float(r["fpr"]), float(r["fpr_sd"]),
                                 float(r["p_value"])))
    return rows
