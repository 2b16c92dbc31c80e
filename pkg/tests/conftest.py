import numpy as np
import pytest
from PIL import Image


def write_video(directory, frames):
    directory.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        img = f[..., 0] if f.ndim == 3 and f.shape[-1] == 1 else f
        Image.fromarray(img).save(directory / f"{i:05d}.png")
    return directory


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
