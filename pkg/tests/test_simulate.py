import io

import pytest

from lazywalk.chain import AgentClass, Capture, ChainError, Distancing, Gathering, LazinessPolicy, build_chain
from lazywalk.graph import build_cycle, build_grid, build_line
from lazywalk.simulate import CSV_HEADER, SimConfig, simulate, sweep_p, write_csv
from lazywalk.solver import solve


def _cfg(**kw):
    base = dict(
        graph=build_cycle(5), classes=(AgentClass(2),), policy=LazinessPolicy.common(0.2),
        goal=Distancing(2), start="gathered", trials=3000, seed=7,
    )
    base.update(kw)
    return SimConfig(**base)


def test_deterministic_given_seed():
    a, b = simulate(_cfg()), simulate(_cfg())
    assert a.mean_time == b.mean_time and a.histogram == b.histogram


def test_worker_count_does_not_change_result():
    cfg = _cfg(trials=5000)
    assert simulate(cfg, n_jobs=1).mean_time == simulate(cfg, n_jobs=4).mean_time


def test_seed_and_stream_change_draws():
    assert simulate(_cfg()).mean_time != simulate(_cfg(seed=8)).mean_time
    assert simulate(_cfg()).mean_time != simulate(_cfg(), stream=1).mean_time


def test_histogram_counts_trials():
    res = simulate(_cfg())
    assert sum(res.histogram.values()) == res.trials
    assert min(res.histogram) >= 1


def test_censoring_is_reported():
    cfg = _cfg(graph=build_cycle(4), start="adjacent", policy=LazinessPolicy.common(0.0), max_steps=50)
    with pytest.warns(RuntimeWarning, match="max_steps"):
        res = simulate(cfg)
    assert res.censored and res.censored_count == res.trials
    assert res.to_dict()["warning"]


def test_already_absorbed_start_takes_zero():
    res = simulate(_cfg(start=(0, 2)))
    assert res.mean_time == 0.0 and res.std_error == 0.0


@pytest.mark.parametrize(
    "graph, classes, policy, goal, start",
    [
        (build_cycle(3), (AgentClass(3),), LazinessPolicy.common(1 / 3), Gathering(), (0, 1, 2)),
        (build_line(5), (AgentClass(2),), LazinessPolicy.population((0.4, 0.1)), Distancing(2), "gathered"),
        (
            build_cycle(4),
            (AgentClass(2, "searcher"), AgentClass(1, "hider")),
            LazinessPolicy.per_class(0.3, 0.6),
            Capture(),
            "random",
        ),
    ],
)
def test_agrees_with_exact(graph, classes, policy, goal, start):
    exact = solve(build_chain(graph, classes, policy, goal, list(start) if isinstance(start, tuple) else start))
    res = simulate(SimConfig(graph, classes, policy, goal, start, 5000, seed=11))
    assert abs(res.mean_time - exact.start_time) <= 4 * res.std_error


def test_sweep_rows_and_validation():
    cfg = _cfg(graph=build_grid(3), classes=(AgentClass(3),), start="corner", trials=500)
    rows = sweep_p(cfg, [0.0, 0.4])
    assert [r.p for r in rows] == [0.0, 0.4]
    with pytest.raises(ValueError):
        sweep_p(cfg, [1.0])


def test_csv_format():
    cfg = _cfg(trials=200)
    rows = sweep_p(cfg, [0.0, 0.5])
    buf = io.StringIO()
    write_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3 and lines[1].startswith("0.0,")


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(trials=0)
    with pytest.raises(ChainError):
        simulate(_cfg(start=(0, 1, 2)))
