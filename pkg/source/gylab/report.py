"""Report documents: JSON serialisation with schema validation, and CSV tables.
"""
import datetime
import json
import logging
from importlib import resources

import jsonschema
import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_FILE = "report.schema.json"
CSV_FLOAT_FORMAT = "%.17g"


def sanitise(obj):
    """Convert numpy scalars and arrays to plain Python, non-finite floats to
    None."""
    if isinstance(obj, dict):
        return {str(k): sanitise(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitise(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return sanitise(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


class JsonRecord:
    """Mixin giving a record with ``to_dict`` JSON output."""

    def to_json(self, **kwargs) -> str:
        """Serialise to a JSON string.

        Parameters
        ----------
        Any keyword arguments are passed onto the JSON serialiser.

        Returns
        -------
        str
            String of JSON.
        """
        return json.dumps(sanitise(self.to_dict()), **kwargs)

    def save(self, filename: str, **kwargs):
        """Serialise to a JSON file.

        Parameters
        ----------
        filename : str
            Filename to write to, if the filename doesn't end in .json then
            this will be appended.
        Any keyword arguments are passed onto the JSON serialiser.
        """
        if not filename.endswith(".json"):
            filename += ".json"
        with open(filename, "w") as fh:
            json.dump(sanitise(self.to_dict()), fh, **kwargs)


def load_schema() -> dict:
    """The report schema shipped with the package."""
    text = (
        resources.files("gylab")
        .joinpath("schema")
        .joinpath(SCHEMA_FILE)
        .read_text()
    )
    return json.loads(text)


def validate_report(document: dict):
    """Validate a report document.

    Raises
    ------
    jsonschema.ValidationError
        If the document does not match the schema.
    """
    jsonschema.validate(instance=document, schema=load_schema())


def build_report(command: str, payload: dict, timestamp: bool = True) -> dict:
    """Wrap a command's payload in a validated report document.

    Parameters
    ----------
    command : str
        ``solve``, ``verify`` or ``converge``.
    payload : dict
        The command specific report.
    timestamp : bool, optional
        Include a UTC timestamp; disable for byte-identical reruns.

    Returns
    -------
    dict
    """
    from . import __version__

    body = {
        "version": __version__,
        "command": command,
        "report": sanitise(payload),
    }
    if timestamp:
        body["timestamp"] = datetime.datetime.now(
            datetime.timezone.utc
        ).isoformat(timespec="seconds")
    document = {"gylab": body}
    validate_report(document)
    return document


def write_json(document: dict, filename: str):
    """Write a report deterministically (sorted keys, LF line endings)."""
    with open(filename, "w", newline="\n") as fh:
        json.dump(document, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    logger.info("Wrote %s", filename)


def write_csv(frame: pd.DataFrame, filename: str):
    """Write a table with a header, 17 significant digits, LF line endings
    and empty cells for missing values."""
    frame.to_csv(
        filename,
        index=False,
        float_format=CSV_FLOAT_FORMAT,
        lineterminator="\n",
        na_rep="",
    )
    logger.info("Wrote %s", filename)
