"""Symbolic connectivity calculator for the dense fully-convolutional
segmentation network family.

Builds the layer graph of variants A, B and C, annotates every node with
its output shape and trainable parameter count, and never touches a
tensor. Variant A uses concatenation skip joins and plain up-path dense
blocks; B replaces skips with projection + element-wise addition and adds
residual shortcuts around up-path dense blocks; C additionally opens with
parallel 3x3/5x5/7x7 branches fused by concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np


class GraphBuildError(ValueError):
    """Incompatible shapes while building or tracing; names the node."""


@dataclass(frozen=True)
class NetConfig:
    variant: str = "C"
    k: int = 12                       # dense-block growth rate
    f: Optional[int] = None           # initial feature maps; None means 3*k
    poolings: int = 3
    db_layers_down: tuple = (4, 4, 4)
    db_layers_bottleneck: int = 4
    db_layers_up: tuple = (4, 4, 4)
    input_shape: tuple = (1, 128, 128)
    classes: int = 4
    inception_ratio: tuple = (2, 1, 1)  # 3x3 : 5x5 : 7x7 map split
    dropout: float = 0.2

    def __post_init__(self):
        if self.variant not in ("A", "B", "C"):
            raise ValueError(f"variant must be A, B or C, got {self.variant!r}")
        if self.k < 1 or self.poolings < 1 or self.classes < 1:
            raise ValueError("k, poolings and classes must be >= 1")
        if len(self.db_layers_down) != self.poolings or len(self.db_layers_up) != self.poolings:
            raise ValueError("need one dense-block depth per pooling level on each path")

    @property
    def initial_maps(self) -> int:
        return self.f if self.f is not None else 3 * self.k


@dataclass
class Node:
    id: int
    kind: str            # conv/bn/elu/dropout/pool/tconv/concat/add/softmax/input
    name: str
    out_channels: int
    params: int = 0
    attrs: dict = field(default_factory=dict)


@dataclass
class NetGraph:
    nodes: List[Node]
    edges: List[Tuple[int, int]]
    config: NetConfig
    shapes: Dict[int, tuple] = field(default_factory=dict)  # id -> (C, H, W)

    @property
    def total_params(self) -> int:
        return sum(n.params for n in self.nodes)

    def inputs_of(self, node_id: int) -> List[int]:
        return [s for s, d in self.edges if d == node_id]

    @property
    def output_node(self) -> Node:
        return self.nodes[-1]


class _Builder:
    def __init__(self, cfg: NetConfig):
        self.cfg = cfg
        self.nodes: List[Node] = []
        self.edges: List[Tuple[int, int]] = []

    def add(self, kind, name, out_channels, params=0, inputs=(), **attrs) -> int:
        node = Node(
            id=len(self.nodes), kind=kind, name=name,
            out_channels=out_channels, params=params, attrs=attrs,
        )
        self.nodes.append(node)
        for src in inputs:
            self.edges.append((src, node.id))
        return node.id

    def conv(self, name, src, c_in, c_out, kernel, stride=1) -> int:
        params = kernel * kernel * c_in * c_out + c_out
        return self.add(
            "conv", name, c_out, params, (src,), kernel=kernel, stride=stride
        )

    def bn_elu(self, name, src, channels) -> int:
        bn = self.add("bn", f"{name}/bn", channels, 2 * channels, (src,))
        return self.add("elu", f"{name}/elu", channels, 0, (bn,))

    def dropout(self, name, src, channels) -> int:
        return self.add("dropout", f"{name}/drop", channels, 0, (src,), rate=self.cfg.dropout)

    def composite_layer(self, name, src, c_in, c_out, kernel) -> int:
        """BN -> ELU -> conv(kernel) -> dropout."""
        x = self.bn_elu(name, src, c_in)
        x = self.conv(f"{name}/conv{kernel}x{kernel}", x, c_in, c_out, kernel)
        return self.dropout(name, x, c_out)

    def projection(self, name, src, c_in, c_out) -> int:
        """Channel-matching 1x1 projection: BN -> ELU -> 1x1 conv -> dropout."""
        return self.composite_layer(name, src, c_in, c_out, kernel=1)

    def dense_block(self, name, src, c_in, n_layers) -> int:
        """Iteratively concatenating block; returns the n_layers*k output."""
        k = self.cfg.k
        layer_outs: List[int] = []
        feed, feed_c = src, c_in
        for i in range(n_layers):
            out = self.composite_layer(f"{name}/layer{i + 1}", feed, feed_c, k, kernel=3)
            layer_outs.append(out)
            if i < n_layers - 1:
                feed = self.add(
                    "concat", f"{name}/cat_in{i + 2}", feed_c + k, 0, (feed, out)
                )
                feed_c += k
        if len(layer_outs) == 1:
            return layer_outs[0]
        return self.add("concat", f"{name}/out", n_layers * k, 0, tuple(layer_outs))

    def transition_down(self, name, src, channels) -> int:
        x = self.composite_layer(f"{name}", src, channels, channels, kernel=1)
        return self.add("pool", f"{name}/maxpool2x2", channels, 0, (x,), kernel=2, stride=2)

    def transition_up(self, name, src, channels) -> int:
        params = 3 * 3 * channels * channels + channels
        return self.add(
            "tconv", f"{name}/tconv3x3s2", channels, params, (src,), kernel=3, stride=2
        )


def build_graph(cfg: NetConfig) -> NetGraph:
    """Assemble the symbolic graph of one variant and trace its shapes."""
    b = _Builder(cfg)
    k = cfg.k
    f = cfg.initial_maps
    c_in = cfg.input_shape[0]

    x = b.add("input", "input", c_in)

    if cfg.variant == "C":
        split = _split_by_ratio(f, cfg.inception_ratio)
        branches = []
        for maps, kernel in zip(split, (3, 5, 7)):
            if maps <= 0:
                continue
            branches.append(
                b.conv(f"stem/branch{kernel}x{kernel}", x, c_in, maps, kernel)
            )
        x = b.add("concat", "stem/fuse", f, 0, tuple(branches))
    else:
        x = b.conv("stem/conv3x3", x, c_in, f, 3)
    channels = f

    skips: List[Tuple[int, int]] = []  # (node id, channels) per level
    for level, n_layers in enumerate(cfg.db_layers_down, start=1):
        db = b.dense_block(f"down{level}/db", x, channels, n_layers)
        merged = b.add(
            "concat", f"down{level}/cat", channels + n_layers * k, 0, (x, db)
        )
        channels += n_layers * k
        skips.append((merged, channels))
        x = b.transition_down(f"down{level}/td", merged, channels)

    n_bott = cfg.db_layers_bottleneck
    db = b.dense_block("bottleneck/db", x, channels, n_bott)
    if cfg.variant == "A":
        x = db
    else:
        proj = b.projection("bottleneck/shortcut_proj", x, channels, n_bott * k)
        x = b.add("add", "bottleneck/add", n_bott * k, 0, (db, proj))
    channels = n_bott * k

    for level, n_layers in enumerate(cfg.db_layers_up, start=1):
        skip_id, skip_c = skips[-level]
        x = b.transition_up(f"up{level}/tu", x, channels)
        if cfg.variant == "A":
            x = b.add("concat", f"up{level}/skip_cat", channels + skip_c, 0, (x, skip_id))
            db_in_c = channels + skip_c
            x = b.dense_block(f"up{level}/db", x, db_in_c, n_layers)
            channels = n_layers * k
        else:
            proj = b.projection(f"up{level}/skip_proj", skip_id, skip_c, channels)
            x = b.add("add", f"up{level}/skip_add", channels, 0, (x, proj))
            db = b.dense_block(f"up{level}/db", x, channels, n_layers)
            shortcut = b.projection(f"up{level}/shortcut_proj", x, channels, n_layers * k)
            x = b.add("add", f"up{level}/residual_add", n_layers * k, 0, (db, shortcut))
            channels = n_layers * k

    x = b.conv("head/conv1x1", x, channels, cfg.classes, 1)
    b.add("softmax", "head/softmax", cfg.classes, 0, (x,))

    graph = NetGraph(nodes=b.nodes, edges=b.edges, config=cfg)
    graph.shapes = shape_trace(graph, cfg.input_shape)
    return graph


def _split_by_ratio(total: int, ratio) -> List[int]:
    """Largest-remainder split of total maps by the branch ratio."""
    ratio = np.asarray(ratio, dtype=np.float64)
    exact = total * ratio / ratio.sum()
    base = np.floor(exact).astype(int)
    rem = total - base.sum()
    order = np.argsort(-(exact - base), kind="stable")
    for i in range(rem):
        base[order[i]] += 1
    return [int(v) for v in base]


def shape_trace(graph: NetGraph, input_shape) -> Dict[int, tuple]:
    """Annotate every node with its (C, H, W); validates joins and pooling."""
    c0, h, w = input_shape
    if c0 != graph.config.input_shape[0]:
        raise GraphBuildError(
            f"input has {c0} channels but the graph was built for"
            f" {graph.config.input_shape[0]}"
        )
    shapes: Dict[int, tuple] = {}
    for node in graph.nodes:
        srcs = [shapes[s] for s in graph.inputs_of(node.id)]
        if node.kind == "input":
            shapes[node.id] = (c0, h, w)
            continue
        if node.kind == "pool":
            c, hh, ww = srcs[0]
            if hh % 2 or ww % 2:
                raise GraphBuildError(
                    f"node {node.name}: cannot halve odd spatial dims {hh}x{ww}"
                )
            shapes[node.id] = (c, hh // 2, ww // 2)
        elif node.kind == "tconv":
            c, hh, ww = srcs[0]
            shapes[node.id] = (node.out_channels, hh * 2, ww * 2)
        elif node.kind == "concat":
            hw = {s[1:] for s in srcs}
            if len(hw) != 1:
                raise GraphBuildError(f"node {node.name}: concat inputs differ in H,W: {hw}")
            shapes[node.id] = (sum(s[0] for s in srcs),) + srcs[0][1:]
            if shapes[node.id][0] != node.out_channels:
                raise GraphBuildError(
                    f"node {node.name}: concat channels {shapes[node.id][0]}"
                    f" != declared {node.out_channels}"
                )
        elif node.kind == "add":
            if len(set(srcs)) != 1:
                raise GraphBuildError(f"node {node.name}: add inputs differ: {srcs}")
            shapes[node.id] = srcs[0]
        else:  # conv, bn, elu, dropout, softmax: spatial-preserving
            shapes[node.id] = (node.out_channels,) + srcs[0][1:]
    return shapes


def param_count(graph: NetGraph):
    """(total, per-node breakdown) of trainable parameters."""
    breakdown = [(n.name, n.kind, n.params) for n in graph.nodes if n.params > 0]
    return graph.total_params, breakdown


def growth_sweep(base_cfg: NetConfig, ks) -> List[Tuple[int, int]]:
    """Parameter totals for each growth rate.

    When the base config leaves ``f`` unset it tracks 3*k per sweep point.
    """
    table = []
    for k in ks:
        cfg = replace(base_cfg, k=int(k))
        table.append((int(k), build_graph(cfg).total_params))
    return table


def quadratic_fit_r2(table) -> float:
    """R^2 of a least-squares quadratic through a (k, params) table."""
    ks = np.array([t[0] for t in table], dtype=np.float64)
    ps = np.array([t[1] for t in table], dtype=np.float64)
    coeffs = np.polyfit(ks, ps, 2)
    resid = ps - np.polyval(coeffs, ks)
    ss_res = float((resid**2).sum())
    ss_tot = float(((ps - ps.mean()) ** 2).sum())
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def to_dot(graph: NetGraph) -> str:
    """GraphViz DOT rendering with shapes and parameter counts."""
    lines = ["digraph net {", "  rankdir=TB;", "  node [shape=box, fontsize=10];"]
    for n in graph.nodes:
        shape = graph.shapes.get(n.id)
        extra = f"\\n{shape[0]}x{shape[1]}x{shape[2]}" if shape else ""
        if n.params:
            extra += f"\\n{n.params:,} params"
        lines.append(f'  n{n.id} [label="{n.name}{extra}"];')
    for s, d in graph.edges:
        lines.append(f"  n{s} -> n{d};")
    lines.append("}")
    return "\n".join(lines)


def summarize(graph: NetGraph) -> dict:
    """JSON-friendly report: config, per-node shapes/params, totals."""
    cfg = graph.config
    return {
        "variant": cfg.variant,
        "growth_rate": cfg.k,
        "initial_maps": cfg.initial_maps,
        "poolings": cfg.poolings,
        "classes": cfg.classes,
        "input_shape": list(cfg.input_shape),
        "output_shape": list(graph.shapes[graph.output_node.id]),
        "total_params": graph.total_params,
        "nodes": [
            {
                "name": n.name,
                "kind": n.kind,
                "shape": list(graph.shapes[n.id]),
                "params": n.params,
            }
            for n in graph.nodes
        ],
    }
