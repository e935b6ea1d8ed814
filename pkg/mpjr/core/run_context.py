"""Run-scoped logging context for command tracking."""

import uuid
from contextlib import contextmanager
from typing import Iterator, Optional

import structlog

from mpjr.core.logging_config import bind_run_id, clear_run_id

logger = structlog.get_logger()


@contextmanager
def run_context(command: str, run_id: Optional[str] = None) -> Iterator[str]:
    """
    Bind a run ID to every log line emitted inside the block.

    The ID is the resolved config hash when one exists, a random one otherwise.
    """
    run_id = run_id or uuid.uuid4().hex[:12]
    bind_run_id(run_id)

    try:
        logger.info("command_started", command=command)
        yield run_id
        logger.info("command_completed", command=command)

    except Exception as e:
        logger.error("command_failed", command=command, error=str(e))
        raise

    finally:
        clear_run_id()
