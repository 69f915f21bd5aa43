# infra/logging.py
"""
Structured JSON event logging.
"""
import json
import logging
import os
import uuid

import numpy as np

logging.basicConfig(
    level=os.environ.get("CUTPOINT_LOG_LEVEL", "INFO").upper(),
    format="%(message)s",
)

_logger = logging.getLogger("cutpoint.events")


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def log_event(event: str, **kwargs):
    """
    Log a structured event with run_id and custom fields.
    Automatically generates run_id if not provided.
    """
    rec = {"event": event, "run_id": kwargs.pop("run_id", str(uuid.uuid4())), **kwargs}
    _logger.info(json.dumps(rec, default=_default))


def log_warning(event: str, **kwargs):
    rec = {"event": event, "level": "warning", "run_id": kwargs.pop("run_id", str(uuid.uuid4())), **kwargs}
    _logger.warning(json.dumps(rec, default=_default))


def log_error(error: str, **kwargs):
    """
    Log an error event.
    """
    rec = {"event": "error", "error": error, "run_id": kwargs.pop("run_id", str(uuid.uuid4())), **kwargs}
    _logger.error(json.dumps(rec, default=_default))
