#!/usr/bin/env python3
"""
Import smoke test: every module loads and the launcher finds the CLI
"""
import importlib

import pytest

MODULES = [
    'src.config',
    'src.utils.logger',
    'src.utils.errors',
    'src.utils.io',
    'src.services.graph_core',
    'src.services.operators',
    'src.services.heat_kernel',
    'src.services.integrator',
    'src.services.semilinear',
    'src.services.picard',
    'src.services.plotting',
    'src.run_config',
    'src.cli',
]


@pytest.mark.parametrize('name', MODULES)
def test_module_imports(name):
    assert importlib.import_module(name) is not None


def test_exit_codes_cover_every_category():
    from src.config import Config
    from src.utils import errors

    categories = {cls.category for cls in vars(errors).values()
                  if isinstance(cls, type) and issubclass(cls, errors.ToolkitError)}
    assert categories <= set(Config.EXIT_CODES)


def test_launcher_exposes_main():
    launcher = importlib.import_module('run_toolkit')
    assert callable(launcher.main)
