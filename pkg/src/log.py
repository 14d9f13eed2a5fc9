"""Logging setup: a single rich handler on stderr for the root logger."""
import logging

import rich.console
import rich.logging

_configured = False


def setup_logging(level: str = "INFO", verbose: bool = False) -> None:
    """Attach a RichHandler to the root logger.

    Library modules only call ``logging.getLogger(__name__)``; everything
    traverses back to the root logger configured here.
    """
    global _configured

    root = logging.getLogger()
    root.setLevel(logging.DEBUG if verbose else level.upper())
    if _configured:
        return

    handler = rich.logging.RichHandler(
        console=rich.console.Console(stderr=True),
        show_time=False,
        show_path=verbose,
        markup=False,
        rich_tracebacks=verbose,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)

    # matplotlib is chatty at DEBUG
    logging.getLogger("matplotlib").setLevel(logging.WARNING)
    _configured = True
