"""Run metrics: collection during simulation and deterministic reporting.

Reports are plain dicts rendered with sorted keys, so two runs of the same
scenario and seed produce byte-identical JSON. Latency percentiles use the
nearest-rank method on the sorted sample; no field ever depends on wall
clock or iteration order of unordered containers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple


def percentile(sorted_values: List[float], fraction: float) -> Optional[float]:
    """Nearest-rank percentile of an already sorted sample."""
    if not sorted_values:
        return None
    rank = max(1, math.ceil(len(sorted_values) * fraction))
    return sorted_values[rank - 1]


@dataclass
class DeliveryAudit:
    """Ground truth of which message reached which node, keyed by uid."""

    # uid -> (source node, origination time)
    originated: Dict[int, Tuple[int, float]] = field(default_factory=dict)
    # (uid, node) -> first delivery time
    delivered: Dict[Tuple[int, int], float] = field(default_factory=dict)
    duplicate_deliveries: int = 0

    def record_send(self, uid: int, source: int, t: float) -> None:
        self.originated[uid] = (source, t)

    def record_delivery(self, uid: int, node: int, t: float) -> None:
        key = (uid, node)
        if key in self.delivered:
            self.duplicate_deliveries += 1
            return
        self.delivered[key] = t

    def pair_stats(self, node_ids: Tuple[int, ...]) -> Dict[str, Dict[str, float]]:
        """Per source->destination sent/delivered counts and ratio."""
        sent: Dict[Tuple[int, int], int] = {}
        got: Dict[Tuple[int, int], int] = {}
        for uid, (src, _) in self.originated.items():
            for dst in node_ids:
                if dst == src:
                    continue
                pair = (src, dst)
                sent[pair] = sent.get(pair, 0) + 1
                if (uid, dst) in self.delivered:
                    got[pair] = got.get(pair, 0) + 1
        out: Dict[str, Dict[str, float]] = {}
        for pair in sorted(sent):
            n_sent = sent[pair]
            n_got = got.get(pair, 0)
            out[f"{pair[0]}->{pair[1]}"] = {
                "sent": n_sent,
                "delivered": n_got,
                "ratio": n_got / n_sent if n_sent else 0.0,
            }
        return out

    def latencies(self) -> List[float]:
        out = []
        for (uid, _node), t_rx in self.delivered.items():
            t_tx = self.originated[uid][1]
            out.append(t_rx - t_tx)
        out.sort()
        return out

    def latencies_between(self, sources: Tuple[int, ...], dests: Tuple[int, ...]) -> List[float]:
        src_set, dst_set = set(sources), set(dests)
        out = []
        for (uid, node), t_rx in self.delivered.items():
            src, t_tx = self.originated[uid]
            if src in src_set and node in dst_set:
                out.append(t_rx - t_tx)
        out.sort()
        return out


@dataclass
class Counters:
    """Flat event tallies; every increment happens exactly once per event."""

    values: Dict[str, int] = field(default_factory=dict)

    def bump(self, key: str, by: int = 1) -> None:
        self.values[key] = self.values.get(key, 0) + by

    def get(self, key: str) -> int:
        return self.values.get(key, 0)


def latency_summary(sorted_latencies: List[float]) -> Dict[str, object]:
    n = len(sorted_latencies)
    return {
        "count": n,
        "mean_s": (sum(sorted_latencies) / n) if n else None,
        "p50_s": percentile(sorted_latencies, 0.50),
        "p95_s": percentile(sorted_latencies, 0.95),
        "max_s": sorted_latencies[-1] if n else None,
    }


def render_json(report: dict) -> str:
    """Canonical JSON: sorted keys, stable float repr, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def render_csv(report: dict) -> str:
    """Flatten per-pair delivery stats into spreadsheet rows."""
    lines = ["scenario,seed,mode,src,dst,sent,delivered,ratio"]
    meta = (report["scenario"], report["seed"], report["mode"])
    for pair in sorted(report["delivery"]["pairs"]):
        stats = report["delivery"]["pairs"][pair]
        src, dst = pair.split("->")
        lines.append(
            f"{meta[0]},{meta[1]},{meta[2]},{src},{dst},"
            f"{stats['sent']},{stats['delivered']},{stats['ratio']:.6f}"
        )
    return "\n".join(lines) + "\n"
