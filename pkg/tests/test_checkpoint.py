import numpy as np
import pytest

from mecsim.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from mecsim.config import SimConfig
from mecsim.learning import LearningParams, MtAgent, WspAgent


CFG = SimConfig(num_wsps=2, mts_per_wsp=1).validate()


def _fresh(seed):
    params = LearningParams()
    rng = np.random.SeedSequence(seed).spawn(CFG.num_mts)
    agents = [MtAgent(CFG, params, np.random.default_rng(r)) for r in rng]
    wsps = [WspAgent(CFG, params) for _ in range(CFG.num_wsps)]
    return agents, wsps


def test_round_trip_exact(tmp_path):
    agents, wsps = _fresh(1)
    agents[0].slot = 123
    wsps[1].table.values[:] = np.linspace(-1, 1, 10)
    path = tmp_path / "ck.txt"
    save_checkpoint(str(path), agents, wsps)

    fresh_agents, fresh_wsps = _fresh(2)
    load_checkpoint(str(path), fresh_agents, fresh_wsps)
    assert fresh_agents[0].slot == 123
    for a, b in zip(agents, fresh_agents):
        for net_a, net_b in ((a.net, b.net), (a.target_net, b.target_net)):
            for wa, wb in zip(net_a.weights, net_b.weights):
                np.testing.assert_array_equal(wa, wb)
            for ba, bb in zip(net_a.biases, net_b.biases):
                np.testing.assert_array_equal(ba, bb)
    np.testing.assert_array_equal(wsps[1].table.values, fresh_wsps[1].table.values)
    np.testing.assert_array_equal(wsps[0].table.bounds, fresh_wsps[0].table.bounds)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("NOT-A-CHECKPOINT\n")
    agents, wsps = _fresh(1)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(str(path), agents, wsps)


def test_count_mismatch(tmp_path):
    agents, wsps = _fresh(1)
    path = tmp_path / "ck.txt"
    save_checkpoint(str(path), agents, wsps)
    with pytest.raises(CheckpointError):
        load_checkpoint(str(path), agents[:1], wsps)
