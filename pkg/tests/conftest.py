import numpy as np
import pytest

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def write_png(path, arr, bit_depth=8):
    from mattebench.imagecore import save_image

    save_image(arr, path, bit_depth)
    return path


def make_toy_dirs(root, n_subjects=5, n_backgrounds=4, size=(20, 24), seed=0):
    """fg/, alpha/, bg/ trees of small random rasters with matching basenames."""
    from pathlib import Path

    rng = np.random.default_rng(seed)
    root = Path(root)
    for d in ("fg", "alpha", "bg"):
        (root / d).mkdir(parents=True, exist_ok=True)
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w]
    for i in range(n_subjects):
        write_png(root / "fg" / f"subj{i}.png", rng.random((h, w, 3)))
        r = np.hypot(yy - h / 2, xx - w / 2)
        alpha = np.clip((h / 3 + i - r) / 3, 0, 1)
        write_png(root / "alpha" / f"subj{i}.png", alpha)
    for j in range(n_backgrounds):
        write_png(root / "bg" / f"bg{j}.png", rng.random((h + 3 * j, w + 5, 3)))
    return root


@pytest.fixture
def toy_dirs(tmp_path):
    return make_toy_dirs(tmp_path / "data")
