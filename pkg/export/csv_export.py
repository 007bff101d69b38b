from __future__ import annotations

import csv
import io

from models import RocPoint, SnrSweepRow

ROC_HEADERS = [
    "scaling",
    "detector",
    "noise_kind",
    "p_imp",
    "snr_db",
    "threshold",
    "pd0",
    "pf0",
    "pd0_ci",
    "pf0_ci",
    "trials_h1",
    "trials_h0",
]

PFD_HEADERS = [
    "scaling",
    "detector",
    "noise_kind",
    "p_imp",
    "snr_db",
    "pfd",
    "pfd_ci",
    "trials",
]


def build_roc_csv(points: list[RocPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROC_HEADERS)
    for point in points:
        writer.writerow(_roc_to_row(point))
    return buf.getvalue()


def build_pfd_csv(rows: list[SnrSweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PFD_HEADERS)
    for row in rows:
        writer.writerow(_pfd_to_row(row))
    return buf.getvalue()


def _roc_to_row(p: RocPoint) -> list[str]:
    return [
        p.scaling,
        p.detector,
        p.noise_kind,
        _fmt(p.p_imp),
        _fmt(p.snr_db),
        _fmt(p.threshold),
        _fmt(p.pd0),
        _fmt(p.pf0),
        _fmt(p.pd0_ci),
        _fmt(p.pf0_ci),
        str(p.trials_h1),
        str(p.trials_h0),
    ]


def _pfd_to_row(r: SnrSweepRow) -> list[str]:
    return [
        r.scaling,
        r.detector,
        r.noise_kind,
        _fmt(r.p_imp),
        _fmt(r.snr_db),
        _fmt(r.pfd),
        _fmt(r.pfd_ci),
        str(r.trials),
    ]


def _fmt(value: float) -> str:
    return repr(float(value))
