import numpy as np
import pytest
import torch

from retarget.synthetic import make_toy_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def toy_root(tmp_path_factory):
    return make_toy_dataset(tmp_path_factory.mktemp("toy"), n=8, size=(96, 128), seed=0)


@pytest.fixture
def float64():
    old = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(old)


@pytest.fixture(scope="session")
def small_ckpt(tmp_path_factory):
    """Untrained narrow model on the default 512 canvas."""
    from retarget.config import TrainConfig
    from retarget.train import init_state, save_checkpoint

    cfg = TrainConfig(base_width=8, max_width=16, n_residual=1, disc_width=8)
    return save_checkpoint(init_state(cfg), tmp_path_factory.mktemp("ckpt") / "small.ckpt")


# acceptance criteria register their outcome here; printed after the run
CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
