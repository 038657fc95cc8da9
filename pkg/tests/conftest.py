import numpy as np
import pytest

from fdh import closed_form_hinf, first_order_lowpass, lift_error_system, split_delay

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def design_example():
    """Design example: T = 1, D = 5.5, W(s) = 0.1 / (s + 0.1)."""
    sys = first_order_lowpass(0.1)
    delay = split_delay(1.0, 5.5)
    lifted = lift_error_system(sys, delay)
    return sys, delay, lifted, closed_form_hinf(0.1, delay)


@pytest.fixture
def rng():
    return np.random.default_rng(20121015)


@pytest.fixture
def criterion():
    """Record a pass/fail line for the acceptance summary, then assert."""

    def check(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
