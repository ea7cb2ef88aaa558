"""Common utility functions shared across the sphereval commands."""

import csv
import logging
import sys
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed

from bin import __version__

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

progress_lock = threading.Lock()


def configure_logging(verbose=False, quiet=False):
    """Configure root logging on stderr so stdout stays parseable.

    Args:
        verbose: Log at DEBUG
        quiet: Log only errors
    """
    level = logging.WARNING
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def output_progress(successful, failures, processed, total, current_item):
    """Output standardized progress information for long-running commands.

    Args:
        successful: Number of successfully processed items
        failures: Number of failed items
        processed: Total number of items processed so far
        total: Total number of items to process
        current_item: Description of the current item being processed

    Output Format:
        PROGRESS|successful|failures|processed|total|current_item

    Example:
        PROGRESS|3|0|3|6|k=256
    """
    with progress_lock:
        print(f"PROGRESS|{successful}|{failures}|{processed}|{total}|{current_item}", flush=True)


def run_parallel(tasks, max_workers=1, progress=False, label="task"):
    """Run keyed callables on a thread pool and return their results in key order.

    Args:
        tasks: List of (key, callable) pairs; keys must be sortable
        max_workers: Thread count, at least 1
        progress: Emit a PROGRESS line per finished task
        label: Prefix of the progress descriptions

    Returns:
        List of results ordered by key, independent of completion order
    """
    max_workers = max(1, int(max_workers))
    total = len(tasks)
    results = {}
    failures = 0

    if progress:
        output_progress(0, 0, 0, total, f"Starting {total} {label}(s)")

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_key = {executor.submit(fn): key for key, fn in tasks}
        for future in as_completed(future_to_key):
            key = future_to_key[future]
            try:
                results[key] = future.result()
            except Exception:
                failures += 1
                if progress:
                    output_progress(len(results), failures, len(results) + failures, total,
                                    f"Failed: {label} {key}")
                raise
            if progress:
                output_progress(len(results), failures, len(results), total, f"{label} {key}")

    return [results[key] for key in sorted(results)]


def write_csv(path, header, rows, metadata=None):
    """Write rows as CSV with a trailing `# version,grid,seed` style comment line.

    Args:
        path: Output file, or "-" for stdout
        header: Column names
        rows: Iterable of row sequences
        metadata: Optional mapping appended as a final comment line
    """
    handle = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])
        trailer = {"version": __version__}
        trailer.update(metadata or {})
        handle.write("# " + ",".join(f"{k}={v}" for k, v in trailer.items()) + "\n")
    finally:
        if handle is not sys.stdout:
            handle.close()


def _format_cell(cell):
    if isinstance(cell, bool):
        return "pass" if cell else "fail"
    if isinstance(cell, float):
        return repr(cell)
    if isinstance(cell, complex):
        return repr(cell.real) if cell.imag == 0 else f"{cell.real!r}{cell.imag:+.17g}j"
    return cell
