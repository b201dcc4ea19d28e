"""Hardware descriptions: device memory hierarchies and cluster networks.

Everything downstream (matmul timing, communication timing, closed forms)
consumes the two frozen dataclasses defined here, ``DeviceSpec`` and
``ClusterSpec``.  Internal units are words and seconds; a word is
``word_size`` bytes (2 for FP16 training, the default).  All bandwidths are
*unidirectional* — a spec sheet's "900 GB/s NVLink" is bidirectional and is
halved before it gets stored here.  Infinite bandwidth is represented as
IEEE ``inf``: dividing a finite volume by it contributes exactly zero time,
while latencies are still charged.

The built-in presets model a per-GPU slice of the published node aggregates
(node = 8 GPUs), so multiplying any per-GPU figure by the level-1 group size
recovers the node-level number.

A note on the inner memory levels: vendors do not publish a single "L2
bandwidth" or "shared-memory bandwidth" that slots into a tiling model, so
the L2/SharedMem numbers below are modeling constants picked to be
hardware-plausible (aggregate slice/SM bandwidths at boost clock) while
keeping large square matmuls arithmetic-bound on every preset device.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

WORD_SIZE_BYTES = 2  # FP16/BF16 training default

#: Memory level names, outermost first. Matmul tiling walks this order.
MEMORY_LEVEL_NAMES = ("DRAM", "L2", "SharedMem", "Registers")

UNBOUNDED = None  # group_size sentinel for the outermost network level


class SpecError(ValueError):
    """A hardware description violates one of its structural invariants."""


@dataclass(frozen=True)
class MemoryLevel:
    """One rung of the on-device memory hierarchy.

    capacity and bandwidth are in words and words/s; bandwidth is
    unidirectional (read *or* write).  ``access_latency`` is carried for
    completeness but the presets fold all per-kernel latency into the
    device-level kernel launch latency.
    """

    name: str
    capacity: float            # words
    unidirectional_bandwidth: float  # words / s
    access_latency: float = 0.0      # s

    def __post_init__(self):
        if self.name not in MEMORY_LEVEL_NAMES:
            raise SpecError(f"unknown memory level name {self.name!r}")
        if self.capacity <= 0 or self.unidirectional_bandwidth <= 0:
            raise SpecError(f"{self.name}: capacity and bandwidth must be positive")
        if self.access_latency < 0:
            raise SpecError(f"{self.name}: negative access latency")


@dataclass(frozen=True)
class DeviceSpec:
    """A single accelerator.

    ``peak_arithmetic`` is in MAC/s (1 MAC = 2 FLOP — spec-sheet FLOP/s
    numbers are halved on the way in).  ``sustained_clock_factor`` scales
    peak arithmetic down for sustained operation; the tiling model charges
    ``m·k·n / (peak_arithmetic · sustained_clock_factor)`` for the
    arithmetic of an (m, k, n) matmul.
    """

    name: str
    peak_arithmetic: float          # MAC / s
    memory_levels: tuple[MemoryLevel, ...]
    sustained_clock_factor: float = 1.0
    kernel_latency: float = 4.5e-6  # s, per matmul kernel launch
    sm_tile: tuple[int, int] = (128, 128)   # output tile resident in L2 path
    warp_tile: tuple[int, int] = (64, 64)   # output tile resident in shared mem
    word_size: int = WORD_SIZE_BYTES        # bytes per word

    def __post_init__(self):
        if self.peak_arithmetic <= 0:
            raise SpecError("peak_arithmetic must be positive")
        if not (0.0 < self.sustained_clock_factor <= 1.0):
            raise SpecError("sustained_clock_factor must be in (0, 1]")
        if self.kernel_latency < 0:
            raise SpecError("kernel_latency must be non-negative")
        if not self.memory_levels:
            raise SpecError("device needs at least one memory level (DRAM)")
        names = [lvl.name for lvl in self.memory_levels]
        order = [MEMORY_LEVEL_NAMES.index(n) for n in names]
        if order != sorted(order) or len(set(names)) != len(names):
            raise SpecError(f"memory levels out of order: {names}")
        if names[0] != "DRAM":
            raise SpecError("outermost memory level must be DRAM")
        bws = [lvl.unidirectional_bandwidth for lvl in self.memory_levels]
        if any(b2 < b1 for b1, b2 in zip(bws, bws[1:])):
            raise SpecError("memory bandwidth must be non-decreasing inward")

    @property
    def dram(self) -> MemoryLevel:
        return self.memory_levels[0]

    def sram_capacity(self) -> float:
        """Total on-chip (non-DRAM) capacity in words."""
        return sum(lvl.capacity for lvl in self.memory_levels[1:])


@dataclass(frozen=True)
class NetworkLevel:
    """One rung of the cluster interconnect hierarchy.

    ``group_size`` is the *total* number of GPUs that share this level's
    domain (8 for an NVLink node, 256 for a rail-optimized pod, ``None`` =
    unbounded for the outermost fabric).  ``unidirectional_bandwidth_per_gpu``
    is each GPU's injection bandwidth into this level, words/s.
    """

    level_index: int                 # h = 1 (fastest) .. H (outermost)
    group_size: int | None           # GPUs per group; None = unbounded
    unidirectional_bandwidth_per_gpu: float  # words / s, may be inf
    one_way_latency: float           # s

    def __post_init__(self):
        if self.level_index < 1:
            raise SpecError("network level_index must be >= 1")
        if self.group_size is not None and self.group_size < 2:
            raise SpecError("bounded network group_size must be >= 2")
        if not self.unidirectional_bandwidth_per_gpu > 0:
            raise SpecError("network bandwidth must be positive")
        if self.one_way_latency < 0:
            raise SpecError("negative network latency")


@dataclass(frozen=True)
class ClusterSpec:
    """A device plus the network hierarchy it is deployed in."""

    name: str
    device: DeviceSpec
    network: tuple[NetworkLevel, ...]

    def __post_init__(self):
        if not self.network:
            raise SpecError("cluster needs at least one network level")
        for h, lvl in enumerate(self.network, start=1):
            if lvl.level_index != h:
                raise SpecError("network levels must be numbered 1..H in order")
        sizes = [lvl.group_size for lvl in self.network]
        if any(s is None for s in sizes[:-1]):
            raise SpecError("only the outermost network level may be unbounded")
        bounded = [s for s in sizes if s is not None]
        if any(b % a != 0 or b <= a for a, b in zip(bounded, bounded[1:])):
            raise SpecError(f"group sizes must strictly nest: {sizes}")
        bws = [lvl.unidirectional_bandwidth_per_gpu for lvl in self.network]
        if any(b2 > b1 for b1, b2 in zip(bws, bws[1:])):
            raise SpecError("network bandwidth must be non-increasing outward")

    @property
    def levels(self) -> int:
        return len(self.network)

    def node_size(self) -> int:
        """GPUs in the fastest bounded domain (1 if the only level is flat)."""
        g = self.network[0].group_size
        return g if g is not None else 1

    def level_capacity(self, h: int) -> float:
        """Multiplicative room at level h: group_size(h) / group_size(h-1)."""
        above = self.network[h - 1].group_size
        if above is None:
            return math.inf
        below = self.network[h - 2].group_size if h >= 2 else 1
        return above / below

    def chain_latency(self) -> float:
        """Kernel launch + one traversal of every network level, one-way (s).

        This is the per-hop serial latency "t_L" used by the closed-form
        latency-wall analysis: 4.5 µs kernel + 2.25 µs per level on a
        two-level DGX machine gives the canonical 9 µs.
        """
        return self.device.kernel_latency + sum(l.one_way_latency for l in self.network)


# ---------------------------------------------------------------------------
# serialization


def _qty_to_words(q, word_size: int, what: str) -> float:
    """Parse a {value, unit[, direction]} quantity into unidirectional words/s
    (or words, for capacities)."""
    if isinstance(q, (int, float)):
        raise SpecError(f"{what}: bare numbers are ambiguous, tag a unit")
    value = q["value"]
    if isinstance(value, str):
        if value not in ("inf", "infinite", "unbounded"):
            raise SpecError(f"{what}: bad value {value!r}")
        value = math.inf
    value = float(value)
    unit = q.get("unit", "words")
    if unit in ("bytes", "bytes/s"):
        value /= word_size
    elif unit not in ("words", "words/s"):
        raise SpecError(f"{what}: unknown unit {unit!r}")
    direction = q.get("direction", "unidirectional")
    if direction == "bidirectional":
        value /= 2.0
    elif direction != "unidirectional":
        raise SpecError(f"{what}: unknown direction {direction!r}")
    return value


def _qty_dict(value_words: float, unit: str) -> dict:
    v = "inf" if math.isinf(value_words) else value_words
    return {"value": v, "unit": unit}


def load_cluster_spec(path: str | Path) -> ClusterSpec:
    """Load a cluster description from a YAML file.

    Schema (full reference in ``docs/cluster-format.md``)::

        name: my-cluster
        device:
          peak_arithmetic: {value: 3.96e15, unit: flop/s}   # or mac/s
          sustained_clock_factor: 1.0
          kernel_latency_s: 4.5e-6
          word_size_bytes: 2
          sm_tile: [128, 128]
          warp_tile: [64, 64]
        memory_levels:
          - name: DRAM
            capacity: {value: 8.0e10, unit: bytes}
            bandwidth: {value: 3.35e12, unit: bytes/s, direction: bidirectional}
        network_levels:
          - group_size: 8            # or 'unbounded'
            bandwidth: {value: 9.0e11, unit: bytes/s, direction: bidirectional}
            one_way_latency_s: 2.25e-6

    Bandwidths/capacities may be given in bytes or words; bidirectional
    bandwidths are halved on ingestion.  ``save_cluster_spec`` round-trips
    exactly (words in, words out).
    """
    with open(path) as f:
        doc = yaml.safe_load(f)
    return cluster_from_doc(doc, origin=str(path))


def cluster_from_doc(doc: dict, origin: str = "<inline>") -> ClusterSpec:
    """Build a ClusterSpec from an already-parsed cluster document (the
    same shape ``load_cluster_spec`` reads from YAML)."""
    try:
        dev = doc["device"]
        word_size = int(dev.get("word_size_bytes", WORD_SIZE_BYTES))
        peak = dev["peak_arithmetic"]
        peak_unit = peak.get("unit", "mac/s")
        peak_val = float(peak["value"])
        if peak_unit == "flop/s":
            peak_val /= 2.0
        elif peak_unit != "mac/s":
            raise SpecError(f"peak_arithmetic: unknown unit {peak_unit!r}")
        levels = tuple(
            MemoryLevel(
                name=ml["name"],
                capacity=_qty_to_words(ml["capacity"], word_size, f"{ml['name']} capacity"),
                unidirectional_bandwidth=_qty_to_words(
                    ml["bandwidth"], word_size, f"{ml['name']} bandwidth"),
                access_latency=float(ml.get("access_latency_s", 0.0)),
            )
            for ml in doc["memory_levels"]
        )
        device = DeviceSpec(
            name=dev.get("name", doc["name"]),
            peak_arithmetic=peak_val,
            memory_levels=levels,
            sustained_clock_factor=float(dev.get("sustained_clock_factor", 1.0)),
            kernel_latency=float(dev.get("kernel_latency_s", 4.5e-6)),
            sm_tile=tuple(dev.get("sm_tile", (128, 128))),
            warp_tile=tuple(dev.get("warp_tile", (64, 64))),
            word_size=word_size,
        )
        net = []
        for h, nl in enumerate(doc["network_levels"], start=1):
            g = nl["group_size"]
            g = None if g in ("unbounded", None) else int(g)
            net.append(NetworkLevel(
                level_index=h,
                group_size=g,
                unidirectional_bandwidth_per_gpu=_qty_to_words(
                    nl["bandwidth"], word_size, f"network level {h} bandwidth"),
                one_way_latency=float(nl["one_way_latency_s"]),
            ))
        return ClusterSpec(name=doc["name"], device=device, network=tuple(net))
    except KeyError as e:
        raise SpecError(f"missing required field {e.args[0]!r} in {origin}") from None
    except TypeError as e:
        raise SpecError(f"malformed cluster document in {origin}: {e}") from None


def cluster_to_doc(cluster: ClusterSpec) -> dict:
    """The YAML-shaped dict for a cluster (all quantities in words /
    words-per-second); ``load_cluster_spec`` reads it back exactly."""
    dev = cluster.device
    return {
        "name": cluster.name,
        "device": {
            "name": dev.name,
            "peak_arithmetic": _qty_dict(dev.peak_arithmetic, "mac/s"),
            "sustained_clock_factor": dev.sustained_clock_factor,
            "kernel_latency_s": dev.kernel_latency,
            "word_size_bytes": dev.word_size,
            "sm_tile": list(dev.sm_tile),
            "warp_tile": list(dev.warp_tile),
        },
        "memory_levels": [
            {
                "name": ml.name,
                "capacity": _qty_dict(ml.capacity, "words"),
                "bandwidth": _qty_dict(ml.unidirectional_bandwidth, "words/s"),
                "access_latency_s": ml.access_latency,
            }
            for ml in dev.memory_levels
        ],
        "network_levels": [
            {
                "group_size": nl.group_size if nl.group_size is not None else "unbounded",
                "bandwidth": _qty_dict(nl.unidirectional_bandwidth_per_gpu, "words/s"),
                "one_way_latency_s": nl.one_way_latency,
            }
            for nl in cluster.network
        ],
    }


def save_cluster_spec(cluster: ClusterSpec, path: str | Path) -> None:
    """Write a cluster description that ``load_cluster_spec`` reads back
    exactly (all quantities emitted in words / words-per-second)."""
    with open(path, "w") as f:
        yaml.safe_dump(cluster_to_doc(cluster), f, sort_keys=False)


# ---------------------------------------------------------------------------
# presets
#
# Per-GPU numbers; node aggregates (×8) match the published table:
#   V100  node: 5.00e14 MAC/s, net 2.5e10 w/s, DRAM 1.8e12 w/s, SRAM 151e6 w
#   A100  node: 1.25e15,       net 1.0e11,     DRAM 3.1e12,     SRAM 366e6
#   H100  node: 3.96e15,       net 2.0e11,     DRAM 6.7e12,     SRAM 487e6
#   SuperPOD:   H100 node with net 9.0e11 w/s at the pod level.


def _mem(name, cap, bw):
    return MemoryLevel(name=name, capacity=cap, unidirectional_bandwidth=bw)


def _v100() -> DeviceSpec:
    # 125 TFLOP/s FP16 tensor → 6.25e13 MAC/s. 16 GB HBM2 @ 900 GB/s
    # (0.45 TB/s unidirectional = 2.25e11 w/s). SRAM split 6 MB L2 +
    # 7.68 MB shared + registers, totalling 18.875e6 words.
    return DeviceSpec(
        name="v100",
        peak_arithmetic=6.25e13,
        memory_levels=(
            _mem("DRAM", 8.0e9, 2.25e11),
            _mem("L2", 3.0e6, 1.0e12),
            _mem("SharedMem", 3.84e6, 7.8e12),
            _mem("Registers", 12.035e6, 2.0e13),
        ),
    )


def _a100() -> DeviceSpec:
    # 312 TFLOP/s BF16 → 1.5625e14 MAC/s. 40 GB HBM2e @ 1.55 TB/s
    # (7.75e11 B/s unidirectional = 3.875e11 w/s).
    return DeviceSpec(
        name="a100",
        peak_arithmetic=1.5625e14,
        memory_levels=(
            _mem("DRAM", 2.0e10, 3.875e11),
            _mem("L2", 2.0e7, 2.5e12),
            _mem("SharedMem", 8.6e6, 9.7e12),
            _mem("Registers", 17.15e6, 3.0e13),
        ),
    )


def _h100() -> DeviceSpec:
    # 990 TFLOP/s BF16 dense → 4.95e14 MAC/s. 80 GB HBM3 @ 3.35 TB/s
    # (1.675e12 B/s unidirectional = 8.375e11 w/s).
    return DeviceSpec(
        name="h100",
        peak_arithmetic=4.95e14,
        memory_levels=(
            _mem("DRAM", 4.0e10, 8.375e11),
            _mem("L2", 2.5e7, 9.0e12),
            _mem("SharedMem", 1.5e7, 1.6e13),
            _mem("Registers", 2.0875e7, 5.0e13),
        ),
    )


def _scale_latencies(cluster: ClusterSpec, factor: float) -> ClusterSpec:
    dev = cluster.device
    dev = replace(
        dev,
        kernel_latency=dev.kernel_latency * factor,
        memory_levels=tuple(
            replace(ml, access_latency=ml.access_latency * factor)
            for ml in dev.memory_levels
        ),
    )
    net = tuple(
        replace(nl, one_way_latency=nl.one_way_latency * factor)
        for nl in cluster.network
    )
    return replace(cluster, device=dev, network=net)


_NET_LAT = 2.25e-6  # one-way, per level


def _build_presets() -> dict[str, ClusterSpec]:
    def net(*levels):
        return tuple(
            NetworkLevel(level_index=h, group_size=g,
                         unidirectional_bandwidth_per_gpu=bw,
                         one_way_latency=_NET_LAT)
            for h, (g, bw) in enumerate(levels, start=1)
        )

    presets = {}
    # DGX-1 (V100): NVLink2 150 GB/s/GPU unidir; 4×EDR IB = 50 GB/s/node.
    presets["dgx1-v100"] = ClusterSpec(
        name="dgx1-v100", device=_v100(),
        network=net((8, 7.5e10), (UNBOUNDED, 3.125e9)))
    # DGX A100: NVLink3 300 GB/s/GPU unidir; 8×HDR IB = 200 GB/s/node.
    presets["dgx-a100"] = ClusterSpec(
        name="dgx-a100", device=_a100(),
        network=net((8, 1.5e11), (UNBOUNDED, 1.25e10)))
    # DGX H100: NVLink4 450 GB/s/GPU unidir; 8×NDR IB = 400 GB/s/node.
    presets["dgx-h100"] = ClusterSpec(
        name="dgx-h100", device=_h100(),
        network=net((8, 2.25e11), (UNBOUNDED, 2.5e10)))
    # NVL-style pod: NVLink extended to 256 GPUs at half injection bandwidth,
    # node-level network 9e11 w/s; IB beyond the pod.
    presets["dgx-h100-superpod"] = ClusterSpec(
        name="dgx-h100-superpod", device=_h100(),
        network=net((8, 2.25e11), (256, 1.125e11), (UNBOUNDED, 2.5e10)))
    # Hypothetical variants for the limit studies.
    presets["h100-low-latency"] = _scale_latencies(
        replace(presets["dgx-h100"], name="h100-low-latency"), 0.1)
    presets["h100-global-nvlink"] = ClusterSpec(
        name="h100-global-nvlink", device=_h100(),
        network=net((UNBOUNDED, 2.25e11)))
    presets["h100-global-nvlink-ll"] = _scale_latencies(
        replace(presets["h100-global-nvlink"], name="h100-global-nvlink-ll"), 0.1)
    presets["h100-infinite-network-ll"] = _scale_latencies(
        ClusterSpec(name="h100-infinite-network-ll", device=_h100(),
                    network=net((UNBOUNDED, math.inf))), 0.1)
    return presets


_PRESETS = _build_presets()

#: Environment variable: a directory of <name>.yaml cluster files that
#: override / extend the built-in presets.
PRESET_DIR_ENV = "TRAINLIM_PRESET_DIR"


def preset_names() -> list[str]:
    names = list(_PRESETS)
    d = os.environ.get(PRESET_DIR_ENV)
    if d and os.path.isdir(d):
        for p in sorted(Path(d).glob("*.yaml")):
            if p.stem not in names:
                names.append(p.stem)
    return names


def preset(name: str) -> ClusterSpec:
    """Look up a cluster preset by name.

    A YAML file ``$TRAINLIM_PRESET_DIR/<name>.yaml`` takes precedence over
    the built-in table, so deployments can re-pin hardware constants without
    touching code.
    """
    d = os.environ.get(PRESET_DIR_ENV)
    if d:
        p = Path(d) / f"{name}.yaml"
        if p.is_file():
            return load_cluster_spec(p)
    try:
        return _PRESETS[name]
    except KeyError:
        raise SpecError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
