# -*- coding: utf-8 -*-
import ast
import logging
import sys
from functools import lru_cache
from pathlib import Path

import structlog

PACKAGE_ROOT = Path(__file__).resolve().parent


@lru_cache(maxsize=1)
def load_manifest():
    """Read the package manifest as a plain dict"""
    source = (PACKAGE_ROOT / '__manifest__.py').read_text(encoding='utf-8')
    return ast.literal_eval(source)


def package_version():
    return load_manifest()['version']


def data_path(relative):
    """Resolve a manifest data entry to an absolute path"""
    return PACKAGE_ROOT / relative


def bundled_task_files():
    return [data_path(entry) for entry in load_manifest()['data'] if entry.startswith('data/tasks/')]


def post_init_hook(verbosity=0, json_logs=False):
    """Process start-up hook: configure structured logging once"""
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG

    renderer = structlog.processors.JSONRenderer() if json_logs else structlog.dev.ConsoleRenderer(colors=False)
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt='iso'),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def seed_library_hook(path=None, resolution=16, lattice=5, solver_config=None, rebuild=False):
    """Make sure a seed library exists on disk and return it"""
    from .models.design_simulator import build_seed_library
    from .models.microstructure import SeedLibrary

    _logger = structlog.get_logger(__name__)
    target = Path(path) if path else data_path(load_manifest()['seed_library'])

    if target.exists() and not rebuild:
        return SeedLibrary.load(target)

    _logger.info("seed_library_build_started", path=str(target), resolution=resolution, lattice=lattice)
    library = build_seed_library(resolution=resolution, lattice=lattice, solver_config=solver_config)
    library.save(target)
    _logger.info("seed_library_build_finished", path=str(target), entries=len(library.entries))
    return library
