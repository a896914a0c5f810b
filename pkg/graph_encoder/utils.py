import os
import tempfile


def check_readable(path):
    """
    Check that an input file exists and can be read.

    Parameters:
        path (str): The path of the file to be checked.

    Returns:
        str: The same path, for chaining.

    Raises:
        FileNotFoundError: If the path is missing or not a readable file.
    """
    if not os.path.isfile(path) or not os.access(path, os.R_OK):
        raise FileNotFoundError(f"cannot read input file: {path}")
    return path


def atomic_write(path, write_fn, mode='w'):
    """
    Write a file atomically: the content goes to a temporary file in the
    target directory which is then renamed over the destination.

    Parameters:
        path (str): Destination path.
        write_fn (callable): Called with the open temporary file handle.
        mode (str): File mode for the temporary file ('w' or 'wb').

    Returns:
        str: The destination path.
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, encoding=None if 'b' in mode else 'utf-8') as handle:
            write_fn(handle)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    return path


def resolve_threads(flag_value, default):
    """
    Resolve the worker cap from the --threads flag, falling back to the configured default.

    Parameters:
        flag_value (int | None): Value given on the command line.
        default (int): Configured default (GEE_THREADS).

    Returns:
        int: Worker count, at least 1.
    """
    threads = flag_value if flag_value is not None else default
    return max(1, int(threads))
