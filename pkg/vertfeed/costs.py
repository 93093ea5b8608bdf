"""Per-query cost reports and their aggregation.

All costs are integer postings counts. For monolithic feedback the latency
C_Lat equals the expansion cost C_QE; for vertical feedback it is the
selection cost plus the most expensive selected vertical.
"""
import logging
from dataclasses import dataclass, field

import pandas as pd

from vertfeed.errors import MixedMethodsError

LOG = logging.getLogger(__name__)

COST_COLUMNS = ["method", "topic", "C_SEL", "C_VR", "C_VF", "C_QE", "C_R_final", "C_Lat"]
COST_FIELDS = COST_COLUMNS[2:]


@dataclass(frozen=True)
class CostReport:
    method: str = ""
    topic: str = ""
    c_sel: int = 0
    per_vertical: dict = field(default_factory=dict)
    c_vr: int = 0
    c_vf: int = 0
    c_qe: int = 0
    c_r_final: int = 0
    c_lat: int = 0

    @property
    def total(self):
        """C_PRF (or C_PRVF): expansion plus final retrieval."""
        return self.c_qe + self.c_r_final

    def labelled(self, method, topic):
        return CostReport(method, topic, self.c_sel, dict(self.per_vertical), self.c_vr, self.c_vf,
                          self.c_qe, self.c_r_final, self.c_lat)

    def row(self):
        return {
            "method": self.method,
            "topic": self.topic,
            "C_SEL": self.c_sel,
            "C_VR": self.c_vr,
            "C_VF": self.c_vf,
            "C_QE": self.c_qe,
            "C_R_final": self.c_r_final,
            "C_Lat": self.c_lat,
        }

    def to_dict(self):
        return {**self.row(), "per_vertical": dict(self.per_vertical), "total": self.total}


def _check_counts(*counts):
    for count in counts:
        if count < 0:
            raise ValueError(f"postings counts must be >= 0, got {count}")


def assemble_prf_cost(initial_count, final_count):
    """Monolithic feedback: C_QE = C_Lat = the initial retrieval cost."""
    _check_counts(initial_count, final_count)
    return CostReport(c_qe=int(initial_count), c_r_final=int(final_count), c_lat=int(initial_count))


def assemble_prvf_cost(c_sel, per_vertical, final_count):
    """C_VR sums the selected verticals, C_Lat takes the slowest one."""
    _check_counts(c_sel, final_count, *per_vertical.values())
    c_vr = sum(int(v) for v in per_vertical.values())
    c_vf = int(c_sel) + c_vr
    c_lat = int(c_sel) + max((int(v) for v in per_vertical.values()), default=0)
    return CostReport(
        c_sel=int(c_sel),
        per_vertical={name: int(v) for name, v in per_vertical.items()},
        c_vr=c_vr,
        c_vf=c_vf,
        c_qe=c_vf,
        c_r_final=int(final_count),
        c_lat=c_lat,
    )


def aggregate(reports):
    """Arithmetic means of every cost field over the reports of one method.

    Returns:
        dict with "method", "topics" and the mean of each cost field

    Raises:
        MixedMethodsError: the reports belong to more than one method
    """
    if not reports:
        raise ValueError("cannot aggregate an empty list of cost reports")
    methods = {r.method for r in reports}
    if len(methods) > 1:
        raise MixedMethodsError(f"cannot aggregate different methods together: {sorted(methods)}")
    frame = pd.DataFrame([r.row() for r in reports])
    summary = {"method": reports[0].method, "topics": len(reports)}
    summary.update({name: float(frame[name].mean()) for name in COST_FIELDS})
    return summary


def reduction(value, baseline):
    """Relative change of value against baseline, in percent (negative = cheaper)."""
    if baseline == 0:
        return float("nan")
    return (value - baseline) / baseline * 100.0


def summarize(reports, baseline=None):
    """Per-method cost means with C_QE and C_Lat reductions against a baseline method.

    Returns:
        pandas.DataFrame, one row per method in first-seen order
    """
    groups = {}
    for report in reports:
        groups.setdefault(report.method, []).append(report)
    rows = [aggregate(group) for group in groups.values()]
    frame = pd.DataFrame(rows, columns=["method", "topics", *COST_FIELDS])
    if baseline is not None and baseline in groups:
        base = frame.set_index("method").loc[baseline]
        frame["C_QE_reduction"] = [reduction(v, base["C_QE"]) for v in frame["C_QE"]]
        frame["C_Lat_reduction"] = [reduction(v, base["C_Lat"]) for v in frame["C_Lat"]]
    elif baseline is not None:
        LOG.warning("Baseline method %r has no cost reports; reductions not computed", baseline)
    return frame


def costs_frame(reports):
    """Per-query cost rows in the stable CSV column order."""
    return pd.DataFrame([r.row() for r in reports], columns=COST_COLUMNS)
