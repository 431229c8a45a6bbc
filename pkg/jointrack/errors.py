"""
Exceptions raised across jointrack.

Every exception derives from :class:`JointrackError` so the command line
front end can map them onto a single validation exit status.
"""


class JointrackError(Exception):
    """Base exception for jointrack errors."""
    pass


class FileFormatError(JointrackError):
    """
    Exception raised for a malformed record in an input file.
    """
    def __init__(self, line, msg=None, field=None, filename=None):
        if msg is None:
            msg = "File format error occured on line {line}".format(line=line)
        else:
            msg = "Line {line}: {msg}".format(line=line, msg=msg)
        if field is not None:
            msg += " field: {field}".format(field=field)
        if filename is not None:
            msg += " file: {filename}".format(filename=filename)
        self.line = line
        self.field = field
        super(FileFormatError, self).__init__(msg)


class ValidationError(JointrackError, ValueError):
    """Raised when a value violates a domain invariant."""
    pass


class ConfigurationError(JointrackError, ValueError):
    """Raised when configuration is missing, unknown or out of range."""
    pass


class DimensionMismatchError(ValidationError):
    """Raised when a feature vector does not fit a model."""
    pass


class InstanceTooLargeError(ValidationError):
    """Raised when exhaustive enumeration is requested on a large instance."""
    pass


class InfeasibleError(JointrackError):
    """Raised when the fixed part of an instance admits no feasible completion."""
    pass


class MissingCorrespondenceError(JointrackError, KeyError):
    """Raised when no correspondence record covers a pair of frames."""
    def __init__(self, frame_a, frame_b):
        self.frame_a = frame_a
        self.frame_b = frame_b
        super(MissingCorrespondenceError, self).__init__(
            f"No correspondences for frame pair ({frame_a}, {frame_b})."
        )

    def __str__(self):
        return self.args[0]
