"""Textual checkpoint of learner state.

Layout (one item per line, '%.17g' floats so doubles round-trip exactly):

    MECSIM-CKPT 1
    agents <n> wsps <m>
    agent <k> slot <slots>
    layer <rows> <cols>        # repeated per layer: weight rows, then biases
    <row of weights>
    ...
    <biases>
    wsp <j>
    bounds <C+1 values>
    values <C values>
"""
from __future__ import annotations

import numpy as np

from .learning import MtAgent, WspAgent

MAGIC = "MECSIM-CKPT 1"


class CheckpointError(ValueError):
    pass


def _fmt_row(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in values)


def save_checkpoint(path: str, agents: list[MtAgent], wsps: list[WspAgent]) -> None:
    lines = [MAGIC, f"agents {len(agents)} wsps {len(wsps)}"]
    for k, agent in enumerate(agents):
        lines.append(f"agent {k} slot {agent.slot}")
        for net in (agent.net, agent.target_net):
            for w, b in zip(net.weights, net.biases):
                lines.append(f"layer {w.shape[0]} {w.shape[1]}")
                for row in w:
                    lines.append(_fmt_row(row))
                lines.append(_fmt_row(b))
    for j, wsp in enumerate(wsps):
        lines.append(f"wsp {j}")
        lines.append("bounds " + _fmt_row(wsp.table.bounds))
        lines.append("values " + _fmt_row(wsp.table.values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path: str, agents: list[MtAgent], wsps: list[WspAgent]) -> None:
    """Restore network weights, slot counters, and abstraction tables in place."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != MAGIC:
        raise CheckpointError(f"bad magic header in {path!r}")
    pos = 1
    head = lines[pos].split()
    if int(head[1]) != len(agents) or int(head[3]) != len(wsps):
        raise CheckpointError(
            f"checkpoint holds {head[1]} agents / {head[3]} wsps, "
            f"expected {len(agents)} / {len(wsps)}"
        )
    pos += 1
    for k, agent in enumerate(agents):
        tag = lines[pos].split()
        if tag[0] != "agent" or int(tag[1]) != k:
            raise CheckpointError(f"expected 'agent {k}' at line {pos + 1}")
        agent.slot = int(tag[3])
        pos += 1
        for net in (agent.net, agent.target_net):
            for layer in range(len(net.weights)):
                rows, cols = (int(v) for v in lines[pos].split()[1:])
                if (rows, cols) != net.weights[layer].shape:
                    raise CheckpointError(
                        f"layer shape {(rows, cols)} != {net.weights[layer].shape}"
                    )
                pos += 1
                w = np.array(
                    [[float(v) for v in lines[pos + r].split()] for r in range(rows)]
                )
                pos += rows
                b = np.array([float(v) for v in lines[pos].split()])
                pos += 1
                net.weights[layer] = w
                net.biases[layer] = b
    for j, wsp in enumerate(wsps):
        if lines[pos].split() != ["wsp", str(j)]:
            raise CheckpointError(f"expected 'wsp {j}' at line {pos + 1}")
        pos += 1
        wsp.table.bounds = np.array([float(v) for v in lines[pos].split()[1:]])
        pos += 1
        wsp.table.values = np.array([float(v) for v in lines[pos].split()[1:]])
        pos += 1
