#!/usr/bin/env python

# File utilities

import os
import tempfile
from contextlib import contextmanager


@contextmanager
def atomic_write(filename : str, mode : str = "w", encoding : str = "utf-8"):
    """
    Open a temporary file next to ``filename`` and move it into place on success.

    Readers never observe a half written output: the temporary file is
    renamed over the target only when the block exits without an
    exception, otherwise it is removed.

    :param filename: The final name of the file.
    :type filename: str
    :param mode: The open mode, "w" or "wb".
    :type mode: str
    :param encoding: Text encoding, ignored for binary modes.
    :type encoding: str
    """
    directory = os.path.dirname(os.path.abspath(filename))
    os.makedirs(directory, exist_ok=True)
    fd, tmpname = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        if "b" in mode:
            stream = os.fdopen(fd, mode)
        else:
            stream = os.fdopen(fd, mode, encoding=encoding, newline="\n")
        with stream:
            yield stream
        os.chmod(tmpname, 0o644)
        os.replace(tmpname, filename)
    except BaseException:
        if os.path.exists(tmpname):
            os.remove(tmpname)
        raise


def ensure_directory(directory : str) -> str:
    """
    Create a directory (and parents) if it does not exist.

    :param directory: The directory to create.
    :type directory: str
    :return: The directory.
    :rtype: str
    """
    os.makedirs(directory, exist_ok=True)
    return directory
