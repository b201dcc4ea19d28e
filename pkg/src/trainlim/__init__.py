"""trainlim: how large can a distributed training run get before the
cluster, rather than the model, becomes the constraint.

Three entry layers over one core:

  * closed forms  — critical block dims, nanobatches, compute limits
    (``trainlim.closedform``);
  * simulation    — step/run time of one (shape, parallelization, cluster)
    triple (``trainlim.simulate``);
  * search        — best parallelization, smallest cluster, compute sweeps
    (``trainlim.search``).

The CLI (``trainlim``) and the HTTP API (``trainlim.api``) are thin shells
over the same functions.
"""

from .comm import (CommTimes, CommVolumes, OverlapPolicy,
                   allreduce_words_per_gpu, batch_comm_volumes, comm_times,
                   hierarchical_allreduce, p2p_frequencies, slicing_volume)
from .closedform import (ClosedFormReport, NodeParams, closed_form_report,
                         critical_cluster, critical_d, critical_nanobatch,
                         latency_wall, node_params, t_critical_bandwidth,
                         t_critical_latency)
from .hwspec import (ClusterSpec, DeviceSpec, MemoryLevel, NetworkLevel,
                     load_cluster_spec, preset, preset_names, save_cluster_spec)
from .matmul import MatmulTime, balanced_square_dim, matmul_time
from .pipeline import (block_to_stage, bubble_fraction, virtual_stage_interfaces)
from .scaling import (LAW_PRESETS, ModelShape, ScalingLaws, critical_batch,
                      layer_count, make_shape, shape_from_compute,
                      sparsity_factor, training_compute)
from .search import (MinClusterResult, SweepRecord, best_config,
                     enumerate_configs, find_endpoint, log_points,
                     min_cluster, sweep)
from .simulate import (LevelAssignment, ParallelismConfig, StepTimeBreakdown,
                       evaluate_step, step_time, run_time, sustained_mfu,
                       validate_config)
from .units import THREE_MONTHS_S, flop_to_mac, mac_to_flop

__version__ = "0.1.0"
