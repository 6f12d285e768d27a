"""The progressive vision-graph network.

A four-stage pyramid over image patches. Each stage runs trident blocks that
split the channel budget three ways (Chebyshev-local mixing, a first-order
similarity graph, a second-order similarity graph), aggregate with MaxE (or a
comparison aggregator), fuse, and follow with a feed-forward transform; both
sublayers are residual. The channel schedule hands local capacity over to the
second-order graph branch as blocks deepen, so first-order similarity on the
transferred channels carries neighborhood-level information. LayerScale is
applied on the last two blocks of the final stage.

Graphs are rebuilt every block, per image, from that block's own post-norm
branch features; neighbor selection is structural and carries no gradient.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregators import AggregatorSpec, baseline_aggregate, make_aggregator, param_count
from .errors import CheckpointError, ConfigError, DimensionError
from .graph import (
    ChannelSchedule,
    GraphTopology,
    grid_offset_maps,
    psgc_schedule,
    topk_neighbors,
)
from .graphlu import GraphLUParams, gelu, graphlu
from .pvgt import read_tensor, write_tensor
from .tensor import (
    Tensor,
    add,
    add_rowvec,
    concat,
    layer_norm,
    matmul,
    max0,
    mul_rowvec,
    narrow,
    offset_mix,
    permute,
    reduce_mean,
    reshape,
)

ACTIVATIONS = ("graphlu", "gelu", "relu")
GRAPH_MODES = ("per-group", "shared")
N_STAGES = 4


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass
class ModelConfig:
    stage_depths: list[int] = field(default_factory=lambda: [1, 1, 2, 1])
    stage_widths: list[int] = field(default_factory=lambda: [32, 64, 128, 256])
    stage_k: list[int] = field(default_factory=lambda: [4, 4, 8, 8])
    radius: int = 3
    schedule_start: float | list[float] = 0.25
    schedule_end: float | list[float] = 0.75
    granularity: int = 16
    aggregator: str = "MaxE"
    activation: str = "graphlu"
    ffn_ratio: int = 4
    layer_scale_init: float = 1e-5
    layer_scale_blocks: int = 2
    num_classes: int = 2
    image_size: int = 32
    patch_size: int = 2
    in_channels: int = 3
    graph_metric: str = "cosine"
    graph_mode: str = "per-group"
    epsilon_shared: bool = False

    def __post_init__(self) -> None:
        for name, seq in (
            ("stage_depths", self.stage_depths),
            ("stage_widths", self.stage_widths),
            ("stage_k", self.stage_k),
        ):
            if len(seq) != N_STAGES:
                raise ConfigError(f"{name} must list {N_STAGES} stages")
        if any(d < 1 for d in self.stage_depths):
            raise ConfigError("stage depths must be >= 1")
        if any(w % self.granularity for w in self.stage_widths):
            raise ConfigError("stage widths must be divisible by the schedule granularity")
        if self.image_size % self.patch_size:
            raise ConfigError("image size must divide by patch size")
        grid = self.image_size // self.patch_size
        if grid % (2 ** (N_STAGES - 1)):
            raise ConfigError(
                f"patch grid {grid} cannot be halved {N_STAGES - 1} times"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.graph_mode not in GRAPH_MODES:
            raise ConfigError(f"unknown graph mode {self.graph_mode!r}")
        if self.num_classes < 2:
            raise ConfigError("need at least two classes")

    def stage_ratios(self, s: int) -> tuple[float, float]:
        start = self.schedule_start[s] if isinstance(self.schedule_start, list) else self.schedule_start
        end = self.schedule_end[s] if isinstance(self.schedule_end, list) else self.schedule_end
        return float(start), float(end)

    def stage_grid(self, s: int) -> int:
        return (self.image_size // self.patch_size) >> s

    def stage_schedule(self, s: int) -> ChannelSchedule:
        start, end = self.stage_ratios(s)
        return psgc_schedule(
            self.stage_widths[s], self.stage_depths[s], start, end, self.granularity
        )

    def total_blocks(self) -> int:
        return sum(self.stage_depths)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(ModelConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return ModelConfig(**d)


def tiny_config(**overrides) -> ModelConfig:
    """The desk-scale reference configuration (32x32 inputs, ~0.6M params)."""
    return ModelConfig(**overrides)


def deep_tiny_config(n_blocks: int = 21, **overrides) -> ModelConfig:
    """A deliberately deep, narrow stack for over-smoothing probes."""
    if n_blocks < 4:
        raise ConfigError("need at least one block per stage")
    inner = n_blocks - 3
    defaults = dict(
        stage_depths=[1, 1, inner, 1],
        stage_widths=[32, 32, 64, 64],
        stage_k=[4, 4, 8, 8],
    )
    defaults.update(overrides)
    return ModelConfig(**defaults)


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


def _he(rng: np.random.Generator, rows: int, cols: int, dtype) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / rows), size=(rows, cols)).astype(dtype)


class Model:
    """Parameter container plus the forward computation.

    Parameters live in a flat name -> Tensor dict built in a deterministic
    order from the seed, which is what makes checkpoints, counting, and
    reproducibility straightforward.
    """

    def __init__(
        self,
        config: ModelConfig,
        seed: int = 0,
        dtype=np.float32,
        params: dict[str, Tensor] | None = None,
    ):
        self.config = config
        self.dtype = dtype
        self.schedules = [config.stage_schedule(s) for s in range(N_STAGES)]
        self._map_cache: dict[tuple[int, int], list[tuple[np.ndarray, np.ndarray]]] = {}
        if params is None:
            self.params = self._init_params(np.random.default_rng(seed))
        else:
            self.params = params
        self._agg_specs = self._wire_aggregators()

    # -- parameter construction ---------------------------------------------

    def _init_params(self, rng: np.random.Generator) -> dict[str, Tensor]:
        cfg = self.config
        dt = self.dtype
        p: dict[str, Tensor] = {}

        def param(name: str, arr: np.ndarray) -> None:
            p[name] = Tensor(arr.astype(dt), requires_grad=True)

        patch_in = cfg.patch_size * cfg.patch_size * cfg.in_channels
        param("stem.weight", _he(rng, patch_in, cfg.stage_widths[0], dt))
        param("stem.bias", np.zeros(cfg.stage_widths[0]))

        n_offsets = (2 * cfg.radius + 1) ** 2
        ls_from = cfg.total_blocks() - cfg.layer_scale_blocks
        block_idx = 0
        for s in range(N_STAGES):
            c = cfg.stage_widths[s]
            for b in range(cfg.stage_depths[s]):
                pre = f"stage{s}.block{b}."
                local_c, first_c, second_c = self.schedules[s].per_block[b]
                param(pre + "norm1.gamma", np.ones(c))
                param(pre + "norm1.beta", np.zeros(c))
                if local_c:
                    param(
                        pre + "local.alpha",
                        rng.normal(0.0, np.sqrt(1.0 / n_offsets), size=(n_offsets, local_c)),
                    )
                    param(pre + "local.pos_bias", np.zeros((n_offsets, local_c)))
                for branch, width in (("first", first_c), ("second", second_c)):
                    if not width:
                        continue
                    spec = make_aggregator(cfg.aggregator, width, width, rng, dtype=dt)
                    for wname, tensor in spec.weights.items():
                        p[f"{pre}{branch}.{wname}"] = tensor
                if cfg.activation == "graphlu" and not cfg.epsilon_shared:
                    param(pre + "act1.epsilon", np.zeros(1))
                    param(pre + "act2.epsilon", np.zeros(1))
                param(pre + "fuse.weight", _he(rng, c, c, dt))
                param(pre + "fuse.bias", np.zeros(c))
                param(pre + "norm2.gamma", np.ones(c))
                param(pre + "norm2.beta", np.zeros(c))
                hidden = cfg.ffn_ratio * c
                param(pre + "ffn.w1", _he(rng, c, hidden, dt))
                param(pre + "ffn.b1", np.zeros(hidden))
                param(pre + "ffn.w2", _he(rng, hidden, c, dt))
                param(pre + "ffn.b2", np.zeros(c))
                if block_idx >= ls_from:
                    param(pre + "scale1", np.full(c, cfg.layer_scale_init))
                    param(pre + "scale2", np.full(c, cfg.layer_scale_init))
                block_idx += 1
            if s < N_STAGES - 1:
                param(
                    f"downsample{s}.weight",
                    _he(rng, 4 * c, cfg.stage_widths[s + 1], dt),
                )
                param(f"downsample{s}.bias", np.zeros(cfg.stage_widths[s + 1]))
        param("head.weight", _he(rng, cfg.stage_widths[-1], cfg.num_classes, dt))
        param("head.bias", np.zeros(cfg.num_classes))
        if cfg.activation == "graphlu" and cfg.epsilon_shared:
            param("shared.epsilon", np.zeros(1))
        return p

    def _wire_aggregators(self) -> dict[tuple[int, int, str], AggregatorSpec]:
        cfg = self.config
        specs: dict[tuple[int, int, str], AggregatorSpec] = {}
        for s in range(N_STAGES):
            for b in range(cfg.stage_depths[s]):
                _, first_c, second_c = self.schedules[s].per_block[b]
                for branch, width in (("first", first_c), ("second", second_c)):
                    if not width:
                        continue
                    pre = f"stage{s}.block{b}.{branch}."
                    weights = {
                        name.removeprefix(pre): t
                        for name, t in self.params.items()
                        if name.startswith(pre)
                    }
                    specs[(s, b, branch)] = AggregatorSpec(
                        kind=cfg.aggregator, in_c=width, out_c=width, weights=weights
                    )
        return specs

    # -- housekeeping --------------------------------------------------------

    def named_parameters(self) -> dict[str, Tensor]:
        return self.params

    def n_parameters(self) -> int:
        return sum(t.size for t in self.params.values())

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def astype(self, dtype) -> "Model":
        converted = {
            name: Tensor(t.data.astype(dtype), requires_grad=True)
            for name, t in self.params.items()
        }
        return Model(self.config, dtype=dtype, params=converted)

    def clamp_activation_params(self) -> None:
        for name, t in self.params.items():
            if name.endswith(".epsilon") or name == "shared.epsilon":
                GraphLUParams(t).clamp()

    def _eps_name(self, prefix: str, site: int) -> str:
        if self.config.epsilon_shared:
            return "shared.epsilon"
        return f"{prefix}act{site}.epsilon"

    def _activation(self, t: Tensor, prefix: str, site: int) -> Tensor:
        act = self.config.activation
        if act == "graphlu":
            return graphlu(t, GraphLUParams(self.params[self._eps_name(prefix, site)]))
        if act == "gelu":
            return gelu(t)
        return max0(t)

    # -- graph construction ---------------------------------------------------

    def _batched_maps(self, grid: int, batch: int) -> list[tuple[np.ndarray, np.ndarray]]:
        key = (grid, batch)
        cached = self._map_cache.get(key)
        if cached is not None:
            return cached
        base = grid_offset_maps(grid, grid, self.config.radius)
        n = grid * grid
        shifts = np.arange(batch, dtype=np.int64)[:, None] * n
        maps = [
            (
                (dst[None, :] + shifts).reshape(-1),
                (src[None, :] + shifts).reshape(-1),
            )
            for dst, src in base
        ]
        self._map_cache[key] = maps
        return maps

    @staticmethod
    def _similarity_for_graph(feats: np.ndarray, metric: str) -> np.ndarray:
        # In-network variant: cosine is epsilon-guarded so constant inputs
        # degrade to an all-zero score matrix instead of erroring.
        if metric == "cosine":
            norms = np.linalg.norm(feats, axis=1, keepdims=True)
            unit = feats / np.maximum(norms, 1e-12)
            s = unit @ unit.T
        elif metric == "dot":
            s = feats @ feats.T
        else:
            sq = np.sum(feats * feats, axis=1)
            s = -np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * (feats @ feats.T), 0.0))
        return 0.5 * (s + s.T)

    def _build_graphs(
        self, feats: np.ndarray, batch: int, n: int, k: int
    ) -> tuple[np.ndarray, list[GraphTopology]]:
        """Per-image top-k selection, indices shifted into batched rows."""
        k_eff = min(k, n - 1)
        per_image = feats.reshape(batch, n, -1)
        idx = np.empty((batch * n, k_eff), dtype=np.int64)
        topos: list[GraphTopology] = []
        for im in range(batch):
            s = self._similarity_for_graph(per_image[im], self.config.graph_metric)
            topo = topk_neighbors(s, k_eff)
            idx[im * n : (im + 1) * n] = topo.neighbor_idx + im * n
            topos.append(topo)
        return idx, topos

    # -- forward ---------------------------------------------------------------

    def block_forward(
        self,
        h: Tensor,
        s: int,
        b: int,
        batch: int,
        grid: int,
        coords: np.ndarray | None = None,
        collect: dict | None = None,
        block_index: int = -1,
    ) -> Tensor:
        cfg = self.config
        P = self.params
        pre = f"stage{s}.block{b}."
        local_c, first_c, second_c = self.schedules[s].per_block[b]
        n = grid * grid

        z = layer_norm(h, P[pre + "norm1.gamma"], P[pre + "norm1.beta"])
        branch_outs: list[Tensor] = []

        if local_c:
            x_local = narrow(z, 1, 0, local_c)
            if coords is None:
                maps = self._batched_maps(grid, batch)
            else:
                if batch != 1:
                    raise DimensionError("custom grid coords require batch of 1")
                maps = grid_offset_maps(grid, grid, cfg.radius, coords)
            branch_outs.append(
                offset_mix(x_local, P[pre + "local.alpha"], maps, bias=P[pre + "local.pos_bias"])
            )

        x_first = narrow(z, 1, local_c, first_c)
        x_second = narrow(z, 1, local_c + first_c, second_c) if second_c else None

        if cfg.graph_mode == "shared" and second_c:
            global_feats = z.data[:, local_c:]
            idx_first, topos_first = self._build_graphs(global_feats, batch, n, cfg.stage_k[s])
            idx_second, topos_second = idx_first, topos_first
        else:
            idx_first, topos_first = self._build_graphs(x_first.data, batch, n, cfg.stage_k[s])
            if second_c:
                idx_second, topos_second = self._build_graphs(
                    x_second.data, batch, n, cfg.stage_k[s]
                )

        y_first = baseline_aggregate(
            cfg.aggregator, x_first, idx_first, self._agg_specs[(s, b, "first")]
        )
        branch_outs.append(self._activation(y_first, pre, 1))
        if second_c:
            y_second = baseline_aggregate(
                cfg.aggregator, x_second, idx_second, self._agg_specs[(s, b, "second")]
            )
            branch_outs.append(self._activation(y_second, pre, 1))

        fused = branch_outs[0] if len(branch_outs) == 1 else concat(branch_outs, axis=1)
        y = add_rowvec(matmul(fused, P[pre + "fuse.weight"]), P[pre + "fuse.bias"])
        if pre + "scale1" in P:
            y = mul_rowvec(y, P[pre + "scale1"])
        h = add(h, y)

        z2 = layer_norm(h, P[pre + "norm2.gamma"], P[pre + "norm2.beta"])
        f = add_rowvec(matmul(z2, P[pre + "ffn.w1"]), P[pre + "ffn.b1"])
        f = self._activation(f, pre, 2)
        f = add_rowvec(matmul(f, P[pre + "ffn.w2"]), P[pre + "ffn.b2"])
        if pre + "scale2" in P:
            f = mul_rowvec(f, P[pre + "scale2"])
        h = add(h, f)

        if collect is not None:
            if "blocks" in collect:
                width = self.config.stage_widths[s]
                collect["blocks"].append(
                    (block_index, h.data.reshape(batch, n, width).copy())
                )
            if "graphs" in collect:
                collect["graphs"].append((block_index, "first", topos_first))
                if second_c:
                    collect["graphs"].append((block_index, "second", topos_second))
        return h

    def forward(self, images, collect: dict | None = None) -> Tensor:
        """Logits [batch, num_classes] for images [batch, h, w, channels].

        ``collect`` optionally receives intermediate structure: pass a dict
        with a ``"blocks"`` and/or ``"graphs"`` key mapped to empty lists.
        """
        cfg = self.config
        x = images if isinstance(images, Tensor) else Tensor(np.asarray(images, dtype=self.dtype))
        if x.data.ndim != 4 or x.shape[1:] != (cfg.image_size, cfg.image_size, cfg.in_channels):
            raise DimensionError(
                f"expected [batch, {cfg.image_size}, {cfg.image_size}, {cfg.in_channels}] images, "
                f"got {x.shape}"
            )
        batch = x.shape[0]
        grid = cfg.image_size // cfg.patch_size
        p = cfg.patch_size

        t = reshape(x, (batch, grid, p, grid, p, cfg.in_channels))
        t = permute(t, (0, 1, 3, 2, 4, 5))
        t = reshape(t, (batch * grid * grid, p * p * cfg.in_channels))
        h = add_rowvec(matmul(t, self.params["stem.weight"]), self.params["stem.bias"])

        block_index = 0
        for s in range(N_STAGES):
            for b in range(cfg.stage_depths[s]):
                h = self.block_forward(
                    h, s, b, batch, grid, collect=collect, block_index=block_index
                )
                block_index += 1
            if s < N_STAGES - 1:
                c = cfg.stage_widths[s]
                h = reshape(h, (batch, grid, grid, c))
                h = reshape(h, (batch, grid // 2, 2, grid // 2, 2, c))
                h = permute(h, (0, 1, 3, 2, 4, 5))
                grid //= 2
                h = reshape(h, (batch * grid * grid, 4 * c))
                h = add_rowvec(
                    matmul(h, self.params[f"downsample{s}.weight"]),
                    self.params[f"downsample{s}.bias"],
                )

        c_last = cfg.stage_widths[-1]
        pooled = reduce_mean(reshape(h, (batch, grid * grid, c_last)), axis=1)
        return add_rowvec(matmul(pooled, self.params["head.weight"]), self.params["head.bias"])


def build_model(config: ModelConfig, seed: int = 0, dtype=np.float32) -> Model:
    return Model(config, seed=seed, dtype=dtype)


# ---------------------------------------------------------------------------
# stand-alone pieces (kept importable for direct use and testing)
# ---------------------------------------------------------------------------


def node_embedding(image, weight: Tensor, bias: Tensor, patch_size: int) -> Tensor:
    """Project non-overlapping p x p patches of one [h, w, c] image to node
    vectors [n, out]."""
    img = image if isinstance(image, Tensor) else Tensor(np.asarray(image))
    if img.data.ndim != 3:
        raise DimensionError("node_embedding expects a single [h, w, c] image")
    h, w, cin = img.shape
    if h % patch_size or w % patch_size:
        raise ConfigError(f"{h}x{w} image not divisible by patch {patch_size}")
    gh, gw = h // patch_size, w // patch_size
    t = reshape(img, (gh, patch_size, gw, patch_size, cin))
    t = permute(t, (0, 2, 1, 3, 4))
    t = reshape(t, (gh * gw, patch_size * patch_size * cin))
    return add_rowvec(matmul(t, weight), bias)


def downsample(h: Tensor, grid: int, weight: Tensor, bias: Tensor) -> Tensor:
    """Merge 2x2 grid neighborhoods and linearly project C -> C'."""
    if grid % 2:
        raise ConfigError("downsample needs an even grid")
    n, c = h.shape
    if n % (grid * grid):
        raise DimensionError("row count is not a multiple of the grid area")
    batch = n // (grid * grid)
    t = reshape(h, (batch, grid, grid, c))
    t = reshape(t, (batch, grid // 2, 2, grid // 2, 2, c))
    t = permute(t, (0, 1, 3, 2, 4, 5))
    t = reshape(t, (batch * (grid // 2) * (grid // 2), 4 * c))
    return add_rowvec(matmul(t, weight), bias)


# ---------------------------------------------------------------------------
# parameter / mult-add accounting
# ---------------------------------------------------------------------------


def _aggregator_param_formula(kind: str, width: int) -> int:
    spec = AggregatorSpec(kind=kind, in_c=width, out_c=width)
    count, _ = param_count(spec)
    return count


def _aggregator_multadds(kind: str, width: int, n: int, k: int) -> int:
    # Mult-adds of the transform matmuls only; gathers, maxes, and means are
    # not multiply-accumulate work.
    if kind == "MaxE":
        return n * 3 * width * width
    if kind == "MRGraphConv":
        return n * 2 * width * width
    if kind == "EdgeConv":
        return n * k * (2 * width) * (2 * width) + n * k * (2 * width) * width
    if kind == "GraphSAGE":
        return n * k * width * width + n * 2 * width * width
    if kind == "GIN":
        return n * width * width
    raise ConfigError(f"unknown aggregator kind {kind!r}")


def _local_pair_count(grid: int, r: int) -> int:
    # Number of valid (node, offset) pairs on a square grid: for each axis
    # offset d the in-range span is grid - |d|, and the two axes factor.
    span = sum(grid - abs(d) for d in range(-r, r + 1) if abs(d) < grid)
    return span * span


def count_params_flops(config: ModelConfig) -> tuple[int, int]:
    """Analytic parameter count and per-image mult-adds.

    The parameter count must equal the runtime enumeration exactly. Mult-adds
    cover linear maps, local mixing, similarity construction, and LayerScale;
    normalizations, activations, and pooling are excluded by convention.
    """
    cfg = config
    params = 0
    flops = 0
    grid = cfg.image_size // cfg.patch_size
    patch_in = cfg.patch_size * cfg.patch_size * cfg.in_channels
    params += patch_in * cfg.stage_widths[0] + cfg.stage_widths[0]
    flops += grid * grid * patch_in * cfg.stage_widths[0]

    n_offsets = (2 * cfg.radius + 1) ** 2
    uses_graphlu = cfg.activation == "graphlu"
    ls_from = cfg.total_blocks() - cfg.layer_scale_blocks
    block_index = 0
    for s in range(N_STAGES):
        c = cfg.stage_widths[s]
        n = grid * grid
        k_eff = min(cfg.stage_k[s], n - 1)
        schedule = cfg.stage_schedule(s)
        for b in range(cfg.stage_depths[s]):
            local_c, first_c, second_c = schedule.per_block[b]
            params += 4 * c  # two norms, scale and shift each
            if local_c:
                params += 2 * n_offsets * local_c
                flops += _local_pair_count(grid, cfg.radius) * local_c
            for width in (first_c, second_c):
                if not width:
                    continue
                params += _aggregator_param_formula(cfg.aggregator, width)
                flops += _aggregator_multadds(cfg.aggregator, width, n, k_eff)
            if cfg.graph_mode == "shared" and second_c:
                flops += n * n * (first_c + second_c)
            else:
                flops += n * n * first_c
                if second_c:
                    flops += n * n * second_c
            if uses_graphlu and not cfg.epsilon_shared:
                params += 2
            params += c * c + c  # fusion
            flops += n * c * c
            hidden = cfg.ffn_ratio * c
            params += c * hidden + hidden + hidden * c + c
            flops += 2 * n * c * hidden
            if block_index >= ls_from:
                params += 2 * c
                flops += 2 * n * c
            block_index += 1
        if s < N_STAGES - 1:
            nxt = cfg.stage_widths[s + 1]
            params += 4 * c * nxt + nxt
            grid //= 2
            flops += grid * grid * 4 * c * nxt
    params += cfg.stage_widths[-1] * cfg.num_classes + cfg.num_classes
    flops += cfg.stage_widths[-1] * cfg.num_classes
    if uses_graphlu and cfg.epsilon_shared:
        params += 1
    return params, flops


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"


def save_checkpoint(model: Model, ckpt_dir: str | Path) -> None:
    """Write every parameter as a PVGT file plus a JSON manifest recording
    the configuration and the name -> file mapping."""
    ckpt_dir = Path(ckpt_dir)
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    mapping: dict[str, str] = {}
    for name, t in model.params.items():
        fname = name.replace(".", "__") + ".pvgt"
        write_tensor(ckpt_dir / fname, t.data)
        mapping[name] = fname
    manifest = {"config": model.config.to_dict(), "params": mapping}
    (ckpt_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True))


def load_checkpoint(ckpt_dir: str | Path) -> Model:
    """Rebuild a model from a checkpoint directory, verifying that manifest
    and configuration agree on the exact parameter set and shapes."""
    ckpt_dir = Path(ckpt_dir)
    manifest_path = ckpt_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise CheckpointError(f"no {MANIFEST_NAME} in {ckpt_dir}")
    manifest = json.loads(manifest_path.read_text())
    config = ModelConfig.from_dict(manifest["config"])
    model = Model(config, seed=0)
    expected = set(model.params)
    recorded = set(manifest["params"])
    if expected != recorded:
        missing = sorted(expected - recorded)
        surplus = sorted(recorded - expected)
        raise CheckpointError(
            f"manifest/config parameter mismatch: missing={missing[:4]} surplus={surplus[:4]}"
        )
    for name, fname in manifest["params"].items():
        arr = read_tensor(ckpt_dir / fname)
        if arr.shape != model.params[name].shape:
            raise CheckpointError(
                f"{name}: checkpoint shape {arr.shape} != config shape {model.params[name].shape}"
            )
        model.params[name] = Tensor(arr, requires_grad=True)
    model._agg_specs = model._wire_aggregators()
    return model
