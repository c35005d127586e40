"""Cross-version tracking of smell instances into temporal instances."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .detect import SmellInstance, SmellType
from .errors import VersionMismatchError
from .graph import Level


@dataclass(frozen=True)
class MatchDecision:
    prev_id: str
    next_id: str
    similarity: float


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 1.0


def match_versions(
    prev: Sequence[SmellInstance],
    next: Sequence[SmellInstance],
    threshold: float = 0.5,
    exact: bool = False,
) -> list[MatchDecision]:
    """Greedy one-to-one matching of same-kind instances by Jaccard similarity.

    Candidates are ranked by (similarity desc, prev id, next id); in exact
    mode only identical artefact sets match.
    """
    versions = {i.version_index for i in prev}
    nversions = {i.version_index for i in next}
    if len(versions) > 1 or len(nversions) > 1:
        raise VersionMismatchError("instances of one side span several versions")
    if versions and nversions and nversions.pop() != versions.pop() + 1:
        raise VersionMismatchError("match_versions needs adjacent versions")
    if exact:
        threshold = 1.0
    by_kind: dict[tuple, list[SmellInstance]] = {}
    for n in next:
        by_kind.setdefault((n.type, n.level), []).append(n)
    candidates = []
    for p in prev:
        pa = p.artefacts
        for n in by_kind.get((p.type, p.level), ()):
            sim = jaccard(pa, n.artefacts)
            if sim >= threshold and sim > 0:
                candidates.append((-sim, p.id, n.id))
    candidates.sort()
    used_prev: set[str] = set()
    used_next: set[str] = set()
    chosen = []
    for neg_sim, pid, nid in candidates:
        if pid in used_prev or nid in used_next:
            continue
        used_prev.add(pid)
        used_next.add(nid)
        chosen.append(MatchDecision(pid, nid, -neg_sim))
    return chosen


@dataclass
class TemporalInstance:
    tid: str
    type: SmellType
    level: Level
    instances: list[SmellInstance] = field(default_factory=list)
    death_version: int | None = None

    @property
    def birth_version(self) -> int:
        return self.instances[0].version_index

    @property
    def last_version(self) -> int:
        return self.instances[-1].version_index

    @property
    def age(self) -> int:
        return len(self.instances)

    @property
    def censored(self) -> bool:
        return self.death_version is None

    @property
    def chain(self) -> list[tuple[int, str]]:
        return [(i.version_index, i.id) for i in self.instances]

    @property
    def shapes(self) -> list[str]:
        return [str(i.characteristics.get("shape", "")) for i in self.instances]

    def alive_at(self, version: int) -> SmellInstance | None:
        offset = version - self.birth_version
        if 0 <= offset < len(self.instances):
            return self.instances[offset]
        return None

    def series(self, characteristic: str) -> list[float] | None:
        values = [i.characteristics.get(characteristic) for i in self.instances]
        if any(not isinstance(v, (int, float)) for v in values):
            return None
        return [float(v) for v in values]

    @property
    def kind(self) -> str:
        return f"{self.type.value}/{self.level.value}"


def build_temporal_instances(
    per_version: Sequence[Sequence[SmellInstance]],
    threshold: float = 0.5,
    exact: bool = False,
) -> list[TemporalInstance]:
    """Chain matched instances over consecutive versions.

    ``per_version[v]`` holds the instances detected in version ``v``. A chain
    not continued in the next version dies there; chains alive in the last
    version are right-censored.
    """
    chains: list[TemporalInstance] = []
    open_chain: dict[str, TemporalInstance] = {}
    for v, current in enumerate(per_version):
        for inst in current:
            if inst.version_index != v:
                raise VersionMismatchError(f"instance {inst.id} claims v{inst.version_index}, found in v{v}")
        if v == 0:
            matches = []
        else:
            matches = match_versions(per_version[v - 1], current, threshold, exact)
        continued = {m.next_id: m.prev_id for m in matches}
        nxt_open: dict[str, TemporalInstance] = {}
        for inst in sorted(current, key=SmellInstance.sort_key):
            prev_id = continued.get(inst.id)
            if prev_id is not None:
                chain = open_chain.pop(prev_id)
            else:
                chain = TemporalInstance("t" + inst.id, inst.type, inst.level)
                chains.append(chain)
            chain.instances.append(inst)
            nxt_open[inst.id] = chain
        for chain in open_chain.values():
            chain.death_version = v
        open_chain = nxt_open
    # chains still open here reached the last version: censored
    return sorted(chains, key=lambda c: (c.birth_version, c.instances[0].sort_key()))
