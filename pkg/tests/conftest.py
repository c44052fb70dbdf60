import time

import pytest

from eegrig import scenarios
from eegrig.server import RigServer


@pytest.fixture(scope="session")
def fs():
    return 250.0


def run_scenario_to_session(name_or_scenario, session_dir, **rig_kwargs):
    """Fast-mode end-to-end run; returns the finished RigServer."""
    scenario = (scenarios.load(name_or_scenario)
                if isinstance(name_or_scenario, str) else name_or_scenario)
    rig = RigServer(scenario=scenario, session_dir=session_dir,
                    realtime=False, **rig_kwargs)
    resp = rig.handle_control({"cmd": "start"})
    assert resp["ok"], resp
    deadline = time.monotonic() + 60
    while rig.mode == "streaming":
        assert time.monotonic() < deadline, "run did not finish"
        time.sleep(0.005)
    assert rig._error == "", rig._error
    return rig


@pytest.fixture(scope="session")
def blink_session(tmp_path_factory):
    d = tmp_path_factory.mktemp("sessions") / "blink"
    run_scenario_to_session("blink-4321", d)
    return d


@pytest.fixture(scope="session")
def chew_session(tmp_path_factory):
    d = tmp_path_factory.mktemp("sessions") / "chew"
    run_scenario_to_session("chew-4321", d)
    return d


@pytest.fixture(scope="session")
def alpha_session(tmp_path_factory):
    d = tmp_path_factory.mktemp("sessions") / "alpha"
    run_scenario_to_session("alpha-test", d)
    return d
