"""Leakage auditor: checks that shard transcripts reveal no more than the
search pattern and update timestamps per map address.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

KIND_FIELDS = {
    "SEARCH": {"ts", "kind", "addr", "status"},
    "UPDATE": {"ts", "kind", "addr", "interval"},
    "REVOKE": {"ts", "kind", "addr"},
    "STORE": {"ts", "kind", "addr", "interval"},
    "DELETE": {"ts", "kind", "addr"},
}
OP_UNKNOWN = "?"


@dataclass
class LeakageReport:
    sp: dict[int, list[int]] = field(default_factory=dict)
    updates: dict[int, list[int]] = field(default_factory=dict)
    up_hist: dict[int, list[tuple[int, str]]] = field(default_factory=dict)
    time_db: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    offences: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.offences

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def audit_leakage(transcripts: Mapping[bytes, list[dict]], time_db: Mapping[str, list] | None = None) -> LeakageReport:
    """Rebuild the leakage profile from transcripts and flag any extra field.

    ``transcripts`` maps shard address -> record list; ``time_db`` is the
    owner's ground truth and is copied into the report untouched.
    """
    report = LeakageReport(time_db=dict(time_db or {}))
    sp, updates = defaultdict(list), defaultdict(list)
    for shard, records in transcripts.items():
        name = shard.hex()[:12]
        last_ts = 0
        for i, rec in enumerate(records):
            where = f"shard {name} record {i}"
            extra = set(rec) - KIND_FIELDS.get(rec.get("kind"), set())
            if rec.get("kind") not in KIND_FIELDS:
                report.offences.append(f"{where}: unknown kind {rec.get('kind')!r}")
                continue
            if extra:
                report.offences.append(f"{where}: fields beyond the leakage profile: {sorted(extra)}")
            missing = KIND_FIELDS[rec["kind"]] - set(rec)
            if missing:
                report.offences.append(f"{where}: missing fields {sorted(missing)}")
                continue
            if rec["ts"] <= last_ts:
                report.offences.append(f"{where}: timestamp not increasing")
            last_ts = rec["ts"]
            interval = rec.get("interval")
            if rec["kind"] == "UPDATE" and (len(interval) != 2 or interval[0] != interval[1]):
                report.offences.append(f"{where}: update interval is not a single state")
            if rec["kind"] == "SEARCH":
                sp[rec["addr"]].append(rec["ts"])
            elif rec["kind"] == "UPDATE":
                updates[rec["addr"]].append(rec["ts"])
    report.sp = dict(sp)
    report.updates = dict(updates)
    # the shard view carries no op/ind, so the history degrades to (ts, unknown)
    report.up_hist = {addr: [(t, OP_UNKNOWN) for t in ts] for addr, ts in updates.items()}
    return report


def scan_frames(frames, needles: Mapping[str, bytes]) -> list[str]:
    """Names of secret byte strings that appear verbatim in any captured frame."""
    blob = b"\x00".join(frames)
    return sorted(name for name, needle in needles.items() if needle and needle in blob)
