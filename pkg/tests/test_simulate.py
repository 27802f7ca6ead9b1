import csv
import math

import numpy as np
import pytest

from pathsens.core import CHUNK, ConfigError, RngStream
from pathsens.estimators import CtmcFimH1
from pathsens.models import LangevinModel, LangevinSettings, SchloglModel, two_state_jump_model
from pathsens.models.finite import FiniteChainModel
from pathsens.simulate import (BbkDriver, ChainDriver, SsaDriver, run, trajectory_batches,
                               write_trajectory_csv)

THETA = np.array([3.0, 1.0, 2.0, 3.5])


def test_ssa_jump_horizon_counts_jumps():
    res = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(1), horizon_jumps=3 * CHUNK + 17), store=True)
    assert res.trajectory.n_jumps == 3 * CHUNK + 17
    assert res.n_transitions == 3 * CHUNK + 17


def test_ssa_time_horizon_is_exact():
    res = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(2), horizon_time=5.0), store=True)
    assert res.trajectory.total_time == pytest.approx(5.0, abs=1e-9)
    assert res.trajectory.channels[-1] == -1
    assert res.horizon == pytest.approx(5.0, abs=1e-9)


def test_ssa_is_reproducible_and_streams_differ():
    a = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(3, 0), horizon_jumps=1000), store=True).trajectory
    b = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(3, 0), horizon_jumps=1000), store=True).trajectory
    c = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(3, 1), horizon_jumps=1000), store=True).trajectory
    np.testing.assert_array_equal(a.waits, b.waits)
    assert not np.array_equal(a.waits, c.waits)


def test_burn_in_moves_the_start_state():
    cold = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(4), horizon_jumps=1), store=True)
    warm = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(4), burn_in=5.0, horizon_jumps=1), store=True)
    assert cold.trajectory.digests[0, 0] == 100
    assert warm.trajectory.digests[0, 0] != 100


@pytest.mark.parametrize("kw", [{}, {"horizon_time": -1.0}, {"horizon_jumps": 0},
                                {"horizon_jumps": 5, "burn_in": -1.0}])
def test_ssa_driver_validation(kw):
    with pytest.raises(ConfigError):
        SsaDriver(SchloglModel(), THETA, 100, RngStream(0), **kw)


def test_inadmissible_theta_rejected_before_running():
    with pytest.raises(ConfigError):
        SsaDriver(SchloglModel(), [-1.0, 1, 2, 3], 100, RngStream(0), horizon_jumps=5)


def test_two_state_occupation_matches_stationary_law():
    res = run(SsaDriver(two_state_jump_model(), [1.0, 3.0], 0, RngStream(5), horizon_time=2e4), store=True)
    tr = res.trajectory
    frac0 = tr.waits[tr.digests[:, 0] == 0].sum() / tr.total_time
    assert frac0 == pytest.approx(0.75, abs=0.01)


def test_hook_failure_gives_partial_result():
    class Failing:
        def __init__(self):
            self.calls = 0

        def update(self, batch):
            self.calls += 1
            if self.calls == 2:
                raise RuntimeError("boom")

    hook = Failing()
    res = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(6), horizon_jumps=5 * CHUNK), [hook])
    assert res.partial and isinstance(res.error, RuntimeError)
    assert hook.calls == 2


def test_trajectory_batches_reproduce_streaming():
    drv = SsaDriver(SchloglModel(), THETA, 100, RngStream(7), horizon_jumps=2 * CHUNK + 5)
    live = CtmcFimH1(SchloglModel(), THETA)
    res = run(drv, [live], store=True)
    replay = CtmcFimH1(SchloglModel(), THETA)
    for b in trajectory_batches(res.trajectory):
        replay.update(b)
    np.testing.assert_allclose(replay.estimate(), live.estimate(), rtol=1e-12)


def test_chain_driver_steps_and_pairs():
    P = np.array([[0.9, 0.1], [0.3, 0.7]])
    model = FiniteChainModel(lambda th: P, lambda th: np.zeros((2, 2, 1)), 2, ("t",))
    res = run(ChainDriver(model, [0.0], np.array([0.0]), RngStream(8), n_steps=CHUNK + 3), store=True)
    assert res.trajectory.n_steps == CHUNK + 3
    states = res.trajectory.states[:, 0].astype(int)
    assert np.mean(states == 0) == pytest.approx(0.75, abs=0.03)


def test_bbk_driver_time_units():
    s = LangevinSettings(dt=0.01)
    drv = BbkDriver(LangevinModel(s), [0.3, 0.3, 1.0], None, RngStream(9), horizon_time=1.0, burn_in_time=0.5)
    assert drv.n_steps == 100 and drv.burn_in_steps == 50
    res = run(drv, store=True)
    assert res.trajectory.states.shape == (101, 6)


def test_trajectory_csv(tmp_path):
    res = run(SsaDriver(SchloglModel(), THETA, 100, RngStream(10), horizon_time=0.05), store=True)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(res.trajectory, path, SchloglModel.channel_names)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["time", "state_digest", "event_id"]
    assert len(rows) == len(res.trajectory) + 1
    assert rows[-1][2] == ""
    assert all(r[2] in ("birth", "death") for r in rows[1:-1])
    assert math.isclose(float(rows[-1][0]), 0.05, abs_tol=1e-9)
