from rich.console import Console

_stderr = Console(stderr=True, highlight=False, soft_wrap=True)
_stdout = Console(highlight=False, soft_wrap=True)

_STYLES = {
    "ERROR": "bold red",
    "WARN": "yellow",
    "FATE": "cyan",
    "SAVE": "green",
    "VERIFY": "magenta",
}


def lab_log(level: str, message: str) -> None:
    """
    Logs a message to stderr with a specified log level.

    Args:
        level (str): The severity or topic of the log (e.g., "INFO", "TRIAL", "ERROR").
        message (str): The message to log.
    """
    _stderr.print(f"{level}: {message}", style=_STYLES.get(level), markup=False)


def summary(message: str) -> None:
    """
    Prints the one-line run summary on stdout.

    Args:
        message (str): The summary line.
    """
    _stdout.print(message, markup=False)
