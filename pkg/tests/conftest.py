"""Shared surface instances for the test suite.

The instances are the same closed-form data used by the frozen curvature
oracle (tests/oracle/derive_curvature.py), so builder output can be checked
against coordinates computed without the frame machinery.
"""

from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from kahlerqch import scalar as sf
from kahlerqch.scalar import Box
from kahlerqch.surfaces import AlphaProfile, SurfaceSpec, build, manufacture_h_from_H

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
DATA = Path(__file__).resolve().parent / "data"

COTH_DOMAIN = Box(x=(-0.25, 0.25), y=(-0.25, 0.25), z=(-2.0, -0.5))
H_COTH = sf.exp(sf.x**2 + sf.y**2)
H_GRADIENT = sf.exp((sf.x**2 + sf.y**2) / 10)
H_HALF = sf.const(1 / np.sqrt(2))


def _spec_factories():
    h_tan = 1 + sf.x**2
    return {
        "calabi_const": lambda: SurfaceSpec(
            "calabi", Box(z=(0.1, 1.0)), alpha=AlphaProfile.constant(1.0), l2=-sf.y / 2, n2=sf.x / 2
        ),
        "calabi_tan": lambda: SurfaceSpec(
            "calabi",
            Box(z=(0.1, 0.6)),
            alpha=AlphaProfile.user(2 * sf.tan(2 * sf.z), -sf.ln(sf.cos(2 * sf.z))),
            h=h_tan,
            l2=sf.ZERO,
            n2=sf.x + 2 * sf.x**3 / 3 + sf.x**5 / 5,
        ),
        "tan_const": lambda: SurfaceSpec("tan", Box(z=(0.1, 0.7)), a=1.0, H=H_HALF),
        "tan_gradient": lambda: SurfaceSpec(
            "tan",
            Box(z=(0.1, 0.7)),
            a=1.0,
            H=H_GRADIENT,
            h=sf.sqrt((sf.laplacian_xy(sf.ln(H_GRADIENT)) + 4 * H_GRADIENT**2) / 2),
        ),
        "tanh_const": lambda: SurfaceSpec("tanh", Box(z=(-1.0, -0.1)), a=1.0, H=H_HALF),
        "coth_manufactured": lambda: SurfaceSpec(
            "coth", COTH_DOMAIN, a=0.5, h=manufacture_h_from_H(H_COTH, 0.5, "coth", COTH_DOMAIN), H=H_COTH
        ),
    }


SPECS = _spec_factories()

# one exact-input representative per family
FAMILY_INSTANCE = {
    "calabi": "calabi_const",
    "tan": "tan_const",
    "tanh": "tanh_const",
    "coth": "coth_manufactured",
}


@lru_cache(maxsize=None)
def model(name):
    """Built SurfaceModel for a named instance (cached: models are immutable)."""
    return build(SPECS[name]())


@pytest.fixture(params=sorted(FAMILY_INSTANCE))
def family_model(request):
    return request.param, model(FAMILY_INSTANCE[request.param])


@pytest.fixture
def cli(capsys):
    """Run the CLI in-process; returns (exit_code, stdout, stderr)."""
    from kahlerqch.cli import main

    def run(*argv):
        code = main([str(a) for a in argv])
        out = capsys.readouterr()
        return code, out.out, out.err

    return run


# -- acceptance summary -----------------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(key, ok, detail):
    """Store one PASS/FAIL line for the acceptance summary; returns ok for chaining into an assert."""
    ACCEPTANCE[key] = f"{'PASS' if ok else 'FAIL'}  criterion {key:<4} {detail}"
    return ok


def _criterion_order(key):
    num = "".join(c for c in key if c.isdigit())
    return int(num), key


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=_criterion_order):
            terminalreporter.write_line(ACCEPTANCE[key])
