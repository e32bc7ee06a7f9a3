import numpy as np
import pytest

from mbsinr.core import Environment, Link
from mbsinr.gains import GainMatrix, NodeLayout, geometric_gain


def random_links(rng, n, side=12.0, length=(1.0, 3.0), alpha=3.0, power=1.0):
    """``n`` links with random sender positions and short random lengths."""
    senders = rng.uniform(0, side, size=(n, 2))
    d = rng.uniform(*length, size=n)
    t = rng.uniform(0, 2 * np.pi, size=n)
    receivers = senders + np.column_stack([d * np.cos(t), d * np.sin(t)])
    gains = geometric_gain(NodeLayout(np.vstack([senders, receivers])), alpha)
    links = [Link(j, j, n + j, power) for j in range(n)]
    return links, gains


def two_node_gains(g01, g10=None):
    g10 = g01 if g10 is None else g10
    return GainMatrix(np.array([[np.nan, g01], [g10, np.nan]]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quiet_env():
    return Environment(noise_mw=0.0, beta=1.0)


def cli_workspace(d):
    """Input files for every CLI subcommand, written under directory ``d``."""
    from mbsinr.cli import run

    d.mkdir(parents=True, exist_ok=True)
    for ch, seed in ((0, 1), (1, 2), (2, 3)):
        rc = run(["generate", "--layout", "grid4x5", "--alpha", "2.18", "--sigma", "1.0",
                  "--seed", str(seed), "--out", str(d / f"ch{ch}.csv"),
                  "--layout-out", str(d / "layout.csv")])
        assert rc == 0
    (d / "links.csv").write_text("id,sender,receiver,power_mw\n0,0,1,\n1,5,6,\n2,10,11,\n3,15,16,\n4,3,8,\n5,13,18,\n")
    (d / "elig.csv").write_text("link_id,channel\n0,0\n1,0\n2,0\n3,1\n4,1\n5,0\n5,1\n")
    (d / "trials.csv").write_text(
        "sender,receiver,interferer_ids,prr,channel\n"
        "0,1,,1.0,0\n0,1,2;3,0.9,0\n5,6,7,0.1,1\n10,11,12;13;14,0.0,2\n15,16,,0.95,1\n3,8,9,0.5,0\n"
    )
    (d / "cases.csv").write_text("senders,receiver,measured_dbm\n0,1,-45\n0;2,1,-44\n4;8;12,19,\n")
    (d / "env.txt").write_text("noise_dbm = -99.1\nbeta = 2.15\n")
    return d


def cli_commands(d, out):
    """``(name, argv)`` for one invocation of every subcommand; outputs go under ``out``."""
    return [
        ("generate", ["generate", "--layout", "random12", "--seed", "4", "--alpha", "3", "--sigma", "2",
                      "--out", str(out / "gen.csv"), "--layout-out", str(out / "gen_layout.csv")]),
        ("zeta", ["zeta", "--gains", str(d / "ch0.csv"), "--out-dir", str(out / "zeta")]),
        ("fit-alpha", ["fit-alpha", "--gains", str(d / "ch0.csv"), "--layout-file", str(d / "layout.csv"),
                       "--out", str(out / "fit.json")]),
        ("median-rss", ["median-rss", "--gains", str(d / "ch0.csv"), str(d / "ch1.csv"), str(d / "ch2.csv"),
                        "--out", str(out / "median.csv")]),
        ("capacity", ["capacity", "--links", str(d / "links.csv"), "--eligibility", str(d / "elig.csv"),
                      "--gains", str(d / "ch0.csv"), str(d / "ch1.csv"), "--env", str(d / "env.txt"),
                      "--brute-force", "--out-dir", str(out / "cap")]),
        ("ratio-harness", ["ratio-harness", "--trials", "15", "--seed", "3", "--out", str(out / "ratio.csv")]),
        ("roc", ["roc", "--trials", str(d / "trials.csv"), "--gains", str(d / "ch0.csv"), str(d / "ch1.csv"),
                 str(d / "ch2.csv"), "--out", str(out / "roc.csv")]),
        ("additivity", ["additivity", "--gains", str(d / "ch0.csv"), "--cases", str(d / "cases.csv"),
                        "--out", str(out / "add.csv")]),
    ]



ACCEPTANCE_LINES: list[str] = []


class Criterion:
    """Holds the number, title and measured detail of one acceptance criterion."""

    def __init__(self):
        self.number = None
        self.title = ""
        self.detail = ""

    def __call__(self, number, title):
        self.number, self.title = number, title

    def line(self, passed):
        text = f"{'PASS' if passed else 'FAIL'} criterion {self.number:>2}: {self.title}"
        return text + (f" [{self.detail}]" if self.detail else "")


@pytest.fixture
def criterion():
    return Criterion()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    c = getattr(item, "funcargs", {}).get("criterion")
    if rep.when != "call" or c is None or c.number is None:
        return
    ACCEPTANCE_LINES.append(c.line(rep.passed))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
