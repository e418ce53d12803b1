import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for `import oracles`

from irlas.arch import ADD, DWCONV3, IDENTITY
from irlas.mirror import IrlConfig, expert_library, train_mirror

PLUGIN_DIR = Path(__file__).parent / "plugins"

POOL3 = (DWCONV3, IDENTITY, ADD)
ORACLE_OPS3 = (("dwconv", 3), ("identity", 0), ("add", 0))
ORACLE_OPS2 = (("dwconv", 3), ("add", 0))

# one line per end-to-end criterion, echoed after the test summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def plugin_cmd(name: str) -> str:
    return f"{sys.executable} {PLUGIN_DIR / name}"


@pytest.fixture(scope="session")
def pool3():
    return POOL3


@pytest.fixture(scope="session")
def expert3():
    return expert_library("resnet_block", max_len=3)


@pytest.fixture(scope="session")
def weights_informative():
    """Nonzero weights over the 3-op space; the looser margin keeps the
    constraint set from matching the expert's features exactly."""
    weights, trace = train_mirror(
        expert_library("resnet_block", max_len=3),
        IrlConfig(epsilon=0.05, op_pool=POOL3, max_len=3),
    )
    assert trace.converged
    return weights


@pytest.fixture(scope="session")
def weights_len4():
    """Default-margin weights over the 4-layer space; converges with an
    informative direction because the richer space separates the expert."""
    weights, trace = train_mirror(
        expert_library("resnet_block", max_len=4),
        IrlConfig(op_pool=POOL3, max_len=4),
    )
    assert trace.converged
    return weights
