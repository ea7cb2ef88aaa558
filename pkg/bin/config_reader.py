#!/usr/bin/env python3
"""
Utility module to read configuration files.
"""

import os
import sys

THREADS_ENV = "SPHEREVAL_THREADS"


def _parse_value(value):
    if value.isdigit():
        return int(value)
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    try:
        return float(value)
    except ValueError:
        return value


def read_config_file(filename):
    """Read a config file and return a dictionary of key-value pairs."""
    config = {}
    config_path = os.path.join(get_repo_root(), "config", filename)

    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Config file not found: {config_path}")

    with open(config_path, "r") as f:
        for line in f:
            line = line.strip()

            # Skip empty lines and comments
            if not line or line.startswith("#"):
                continue

            if "=" in line:
                key, value = line.split("=", 1)
                config[key.strip()] = _parse_value(value.strip())

    return config


def get_config():
    """Get application defaults, overlaid by local.config and the thread-count override."""
    app_config = read_config_file("application.config")

    try:
        app_config.update(read_config_file("local.config"))
    except FileNotFoundError:
        print("Warning: local.config not found, using application defaults", file=sys.stderr)

    threads = os.environ.get(THREADS_ENV)
    if threads:
        if not threads.isdigit() or int(threads) < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {threads!r}")
        app_config["MAX_WORKERS"] = int(threads)

    return app_config


def get_repo_root():
    """Get the repository root directory."""
    script_dir = os.path.dirname(os.path.abspath(__file__))
    return os.path.dirname(script_dir)
