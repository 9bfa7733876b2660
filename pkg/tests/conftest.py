import numpy as np
import pytest
from hypothesis import settings

from ilcbench.filters import NoncausalFilter, band_mask, design_inverse_L, design_Q
from ilcbench.plant_lab import default_printer_scenario, printer_models, printer_reference
from ilcbench.signal_lti import default_grid, freq_response

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile("ci")


class Printer:
    """Shared printer objects; built once per session because L and Q design
    take a moment."""

    def __init__(self):
        self.sc = default_printer_scenario()
        self.nf = self.sc.noise_free()
        self.ts = self.sc.ts
        self.profile = printer_reference()
        self.r = self.profile.position
        self.grid = default_grid(self.ts)
        self.mask = band_mask(self.grid, 1.0, 500.0)
        self.frf = freq_response(self.sc.PS, self.grid)
        self.ps_rigid, self.ps_acc = printer_models()
        self.L_exact = design_inverse_L(self.sc.PS, 200)
        self.L_rigid = design_inverse_L(self.ps_rigid, 200)
        self.L_acc = design_inverse_L(self.ps_acc, 200)
        self.Q = design_Q(self.frf, self.L_acc, self.mask)
        self.I = NoncausalFilter.identity(self.ts)


@pytest.fixture(scope="session")
def printer():
    return Printer()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance verdict lines, printed in the terminal summary so they show without -s
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
