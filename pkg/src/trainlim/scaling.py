"""Model-shape synthesis from a compute budget via empirical scaling laws.

Given a training compute budget T (FLOP at the boundary, MAC internally),
these laws pin down a transformer-ish model shape:

  * critical batch size   b = b0 · E^s · (T / T0)^alpha_b   [tokens]
  * depth                 L = c_L · (d_model · d_ff)^p_L    (or vs params)
  * sparsity / experts    E = c_E · (d_model·d_ff / ref)^p_E, floored at 1
  * parameter count       N_p = 2 · L · E · d_model · d_ff
  * data                  D = tokens_per_param · N_p
  * compute               T = 3 · N_p · D / E    [MAC]

The last identity is the plain "forward pass is one MAC per parameter per
token, backward is twice that, sparsity divides active parameters" model.

``shape_from_compute`` inverts the system by bisecting on d_model, then
quantizes the emitted shape onto a divisor-friendly grid so the parallelism
search downstream has factors to work with (see the rounding note on
``friendly_round``).  The standalone law operations (``critical_batch``,
``layer_count``, ``sparsity_factor``) use plain rounding, matching their
published reference values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .units import FLOP_PER_MAC, flop_to_mac, mac_to_flop

T_MIN_FLOP = 1e20
T_MAX_FLOP = 1e40


class ScalingError(ValueError):
    """A scaling-law input is out of range or a shape cannot hit its target."""


@dataclass(frozen=True)
class BatchLaw:
    """b = b0 · E^sparsity_exponent · (T / T0)^alpha, T in FLOP."""
    b0: float = 2.0 ** 22
    T0: float = 3e23
    alpha: float = 1.0 / 6.0
    sparsity_exponent: float = 0.5


@dataclass(frozen=True)
class LayerLaw:
    """Depth law.  ``basis="width"``: L = coeff · (d_model·d_ff)^exponent.
    ``basis="params"``: L = coeff · (N_p / 1e6)^exponent."""
    coeff: float = 0.10056
    exponent: float = 0.3751
    basis: str = "width"


@dataclass(frozen=True)
class SparsityLaw:
    """E = coeff · (d_model·d_ff / reference_width)^exponent (sparse mode)."""
    coeff: float = 8.0
    exponent: float = 0.5
    reference_width: float = 4.0 * 12288.0 ** 2


@dataclass(frozen=True)
class ScalingLaws:
    batch: BatchLaw = field(default_factory=BatchLaw)
    layer: LayerLaw = field(default_factory=LayerLaw)
    sparsity: SparsityLaw = field(default_factory=SparsityLaw)
    ff_ratio: float = 4.0           # d_ff / d_model
    tokens_per_param: float = 20.0  # D / N_p


#: Named law bundles selectable from the CLI/API.
LAW_PRESETS: dict[str, ScalingLaws] = {
    "default": ScalingLaws(),
    # Steeper batch growth (alpha fit from DeepSeek-style runs).
    "deepseek": ScalingLaws(batch=BatchLaw(b0=4e6, T0=3e23, alpha=0.3271)),
    # Pessimistic: batch size never grows past today's.
    "fixed-batch": ScalingLaws(batch=BatchLaw(alpha=0.0)),
}


@dataclass(frozen=True)
class ModelShape:
    """A concrete model + run configuration the simulator can time.

    ``train_mac`` is total training compute in MAC (multiply it by 2 for
    FLOP); all other fields are counts.
    """
    d_model: int
    d_ff: int
    n_layers: int
    n_experts: int
    n_params: int
    train_tokens: int
    batch: int          # tokens per optimizer step
    train_mac: float

    def __post_init__(self):
        if min(self.d_model, self.d_ff, self.n_layers, self.n_experts,
               self.batch) < 1:
            raise ScalingError("shape dimensions must be >= 1")

    @property
    def steps(self) -> int:
        """Optimizer steps for the full run (last batch padded)."""
        return math.ceil(self.train_tokens / self.batch)


def make_shape(d_model: int, d_ff: int, n_layers: int, batch: int,
               n_experts: int = 1,
               tokens_per_param: float = 20.0) -> ModelShape:
    """Build a hand-specified shape; params/tokens/compute follow the
    counting identities rather than any law."""
    n_params = 2 * n_layers * n_experts * d_model * d_ff
    train_tokens = int(round(tokens_per_param * n_params))
    train_mac = 3.0 * n_params * train_tokens / n_experts
    return ModelShape(d_model=d_model, d_ff=d_ff, n_layers=n_layers,
                      n_experts=n_experts, n_params=n_params,
                      train_tokens=train_tokens, batch=batch,
                      train_mac=train_mac)


def _check_t(T_flop: float) -> None:
    if not (T_MIN_FLOP <= T_flop <= T_MAX_FLOP):
        raise ScalingError(
            f"training compute {T_flop:g} FLOP outside supported range "
            f"[{T_MIN_FLOP:g}, {T_MAX_FLOP:g}]")


def critical_batch(T_flop: float, n_experts: float = 1.0,
                   laws: ScalingLaws | None = None) -> int:
    """Critical batch size in tokens for a run of T FLOP.

    Homogeneity: with the default alpha = 1/6, scaling T by k^6 scales the
    batch by exactly k.  (3e23, E=1) → 4_194_304.
    """
    _check_t(T_flop)
    law = (laws or ScalingLaws()).batch
    b = law.b0 * n_experts ** law.sparsity_exponent * (T_flop / law.T0) ** law.alpha
    return max(1, round(b))


def _layer_count_cont(laws: ScalingLaws, d_model: float, d_ff: float,
                      n_params: float | None = None) -> float:
    law = laws.layer
    if law.basis == "width":
        return law.coeff * (d_model * d_ff) ** law.exponent
    if law.basis == "params":
        if n_params is None:
            n_params = 2 * d_model * d_ff  # single-layer seed; callers pass N_p
        return law.coeff * (n_params / 1e6) ** law.exponent
    raise ScalingError(f"unknown layer-law basis {law.basis!r}")


def layer_count(d_model: int, d_ff: int, laws: ScalingLaws | None = None,
                n_params: float | None = None) -> int:
    """Depth from the width (default law: 12288×49152 → 198 layers)."""
    laws = laws or ScalingLaws()
    return max(1, round(_layer_count_cont(laws, d_model, d_ff, n_params)))


def _sparsity_cont(laws: ScalingLaws, d_model: float, d_ff: float) -> float:
    law = laws.sparsity
    return law.coeff * (d_model * d_ff / law.reference_width) ** law.exponent


def sparsity_factor(d_model: int, d_ff: int, mode: str = "dense",
                    laws: ScalingLaws | None = None) -> int:
    """Expert count: 1 in dense mode, law-driven (floored at 1) in sparse."""
    if mode == "dense":
        return 1
    if mode != "sparse":
        raise ScalingError(f"mode must be 'dense' or 'sparse', got {mode!r}")
    laws = laws or ScalingLaws()
    return max(1, round(_sparsity_cont(laws, d_model, d_ff)))


def friendly_round(x: float) -> int:
    """Round to the nearest multiple of 2^(⌊log2 x⌋ − 5).

    Keeps the relative error below 1/64 while guaranteeing the result has a
    healthy power-of-two factor, so downstream divisibility constraints
    (pipeline stages dividing depth, nanobatches staying integral) have room
    to work.  Values below 64 round to plain integers.
    """
    if x < 1:
        return 1
    k = max(0, int(x).bit_length() - 6)
    grid = 1 << k
    return max(grid, round(x / grid) * grid)


def shape_from_compute(T_flop: float, mode: str = "dense",
                       laws: ScalingLaws | None = None,
                       rel_tol: float = 1e-6) -> ModelShape:
    """Invert the scaling laws: budget T (FLOP) → concrete ModelShape.

    Bisects on log d_model until the continuous system reproduces T to
    ``rel_tol``, then quantizes: depth and expert count onto the
    divisor-friendly grid, d_model re-solved against the target and rounded
    to a multiple of 128, batch to a friendly multiple of the expert count.
    The integerized shape is checked to stay within 5% of the requested
    budget.
    """
    _check_t(T_flop)
    laws = laws or ScalingLaws()
    if mode not in ("dense", "sparse"):
        raise ScalingError(f"mode must be 'dense' or 'sparse', got {mode!r}")
    T_mac = flop_to_mac(T_flop)
    k_compute = 3.0 * laws.tokens_per_param  # T = k · N_p^2 / E

    def t_of(d_model: float) -> float:
        d_ff = laws.ff_ratio * d_model
        E = max(1.0, _sparsity_cont(laws, d_model, d_ff)) if mode == "sparse" else 1.0
        L = max(1.0, _layer_count_cont(laws, d_model, d_ff))
        if laws.layer.basis == "params":
            # params-basis law is self-referential; one fixed-point pass is
            # plenty at these exponents (0.27 → contraction factor ~0.5)
            for _ in range(60):
                n_p = 2 * L * E * d_model * d_ff
                L_new = max(1.0, _layer_count_cont(laws, d_model, d_ff, n_p))
                if abs(L_new - L) < 1e-9 * L:
                    break
                L = L_new
        n_p = 2 * L * E * d_model * d_ff
        return k_compute * n_p * n_p / E

    lo, hi = math.log(64.0), math.log(2.0 ** 20)
    if t_of(math.exp(lo)) > T_mac or t_of(math.exp(hi)) < T_mac:
        raise ScalingError(f"no d_model in [64, 2^20] reaches {T_flop:g} FLOP")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if t_of(math.exp(mid)) < T_mac:
            lo = mid
        else:
            hi = mid
        if hi - lo < rel_tol:
            break
    d_cont = math.exp(0.5 * (lo + hi))
    d_ff_cont = laws.ff_ratio * d_cont

    E = 1
    if mode == "sparse":
        E = max(1, friendly_round(_sparsity_cont(laws, d_cont, d_ff_cont)))
    if laws.layer.basis == "params":
        n_p_cont = math.sqrt(T_mac * E / k_compute)
        L = max(1, friendly_round(_layer_count_cont(laws, d_cont, d_ff_cont, n_p_cont)))
    else:
        L = max(1, friendly_round(_layer_count_cont(laws, d_cont, d_ff_cont)))

    # re-solve width against the target with depth/experts frozen
    n_p_target = math.sqrt(T_mac * E / k_compute)
    d_model = math.sqrt(n_p_target / (2.0 * L * E * laws.ff_ratio))
    d_model = max(128, round(d_model / 128.0) * 128)
    d_ff = int(round(laws.ff_ratio * d_model))

    n_params = 2 * L * E * d_model * d_ff
    train_tokens = int(round(laws.tokens_per_param * n_params))
    train_mac = 3.0 * n_params * train_tokens / E

    b_raw = critical_batch(min(max(mac_to_flop(train_mac), T_MIN_FLOP), T_MAX_FLOP),
                           n_experts=E, laws=laws)
    batch = E * max(1, friendly_round(b_raw / E))

    err = abs(mac_to_flop(train_mac) - T_flop) / T_flop
    if err > 0.05:
        raise ScalingError(
            f"integerized shape misses compute target by {err:.1%} "
            f"(d_model={d_model}, L={L}, E={E})")
    return ModelShape(d_model=d_model, d_ff=d_ff, n_layers=L, n_experts=E,
                      n_params=n_params, train_tokens=train_tokens,
                      batch=batch, train_mac=train_mac)


def training_compute(shape: ModelShape) -> float:
    """Total training compute of a shape, in FLOP."""
    return mac_to_flop(shape.train_mac)
