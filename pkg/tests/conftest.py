import datetime as dt
import os
from pathlib import Path

import numpy as np
import pytest


def write_ett_like(path, n_rows=17420, minutes=60, seed=0):
    """Header + ISO timestamp + 7 numeric columns, the public ETT layout."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_rows)
    cols = ["HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"]
    values = np.stack(
        [np.sin(2 * np.pi * t / 24 * (k + 1) / 3) + 0.1 * rng.normal(size=n_rows) + k for k in range(7)], axis=1
    )
    start = dt.datetime(2016, 7, 1)
    lines = ["date," + ",".join(cols)]
    for i in range(n_rows):
        stamp = (start + dt.timedelta(minutes=minutes * i)).strftime("%Y-%m-%d %H:%M:%S")
        lines.append(stamp + "," + ",".join(f"{v:.3f}" for v in values[i]))
    Path(path).write_text("\n".join(lines) + "\n")
    return values


@pytest.fixture(scope="session")
def ett_like_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("ett") / "ETTh1.csv"
    write_ett_like(path)
    return path


def etth1_path():
    """Real ETTh1.csv if the user has provided one, else None."""
    candidates = [os.environ.get("PURETS_ETTH1")]
    if os.environ.get("PURETS_DATA_DIR"):
        candidates.append(os.path.join(os.environ["PURETS_DATA_DIR"], "ETTh1.csv"))
    candidates.append("data/ETTh1.csv")
    for c in candidates:
        if c and Path(c).is_file():
            return Path(c)
    return None


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
