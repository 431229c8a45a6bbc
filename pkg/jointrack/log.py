import os
import logging

LEVELS = {
    "debug": logging.DEBUG,
    "info": logging.INFO,
    "warning": logging.WARNING,
    "error": logging.ERROR,
    "critical": logging.CRITICAL,
}

FORMAT = "%(levelname)s:%(name)s:%(asctime)s:%(message)s"


def to_level(level):
    """
    Convert a symbolic or numeric level to a logging level.

    :param level: The level as a name ("debug", "INFO", ...) or a number.
    :type level: str or int
    :return: The numeric logging level.
    :rtype: int
    """
    if isinstance(level, str):
        key = level.lower()
        if key in LEVELS:
            return LEVELS[key]
        if key.isdigit():
            return int(key)
        raise ValueError(f'Unrecognised logging level "{level}".')
    return int(level)


class Logger:
    def __init__(self, name=None, level=20, filename=None, directory="."):
        self.level = to_level(level)
        self.filename = filename
        self.name = name
        if filename is None:
            # No file configured so messages go to the error stream.
            logging.basicConfig(level=self.level, format=FORMAT)
        else:
            logging.basicConfig(
                level=self.level,
                filename=os.path.join(directory, filename),
                format=FORMAT,
            )
        self.logger = logging.getLogger(name)

    def set_level(self, level):
        """Change the level of this logger and of the root handlers."""
        self.level = to_level(level)
        logging.getLogger().setLevel(self.level)
        self.logger.setLevel(self.level)

    def debug(self, message):
        self.logger.debug(message)

    def info(self, message):
        self.logger.info(message)

    def warning(self, message):
        self.logger.warning(message)

    def error(self, message):
        self.logger.error(message)

    def critical(self, message):
        self.logger.critical(message)
