"""
json_export.py - JSON reports and the per-run manifest
"""
import json
import logging
import math
import platform
from datetime import datetime
from pathlib import Path

import numpy as np

from logic import __version__
from utils.dataset_io import FORMAT_VERSION

logger = logging.getLogger(__name__)

RUN_MANIFEST_NAME = "run_manifest.json"


def _plain(value):
    """JSON-ready copy; non-finite floats become null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class JsonExporter:

    def write(self, payload, output_path, what="Report"):
        try:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            with open(output_path, "w", encoding="utf-8") as f:
                json.dump(_plain(payload), f, indent=4, allow_nan=False)
                f.write("\n")
            return True, f"{what} written to {output_path}"
        except (OSError, TypeError, ValueError) as e:
            logger.error("Could not write %s to %s: %s", what, output_path, e)
            return False, f"Failed to write {what}: {e}"

    def export_sweep(self, report, output_path, include_timing=False):
        payload = {"format_version": FORMAT_VERSION}
        payload.update(report.to_dict(include_timing))
        return self.write(payload, output_path, "Sweep report")

    def export_analysis(self, analysis, output_path):
        """`analysis` is the dict assembled by the analyze command"""
        payload = {"format_version": FORMAT_VERSION}
        payload.update(analysis)
        return self.write(payload, output_path, "Bijectivity report")

    def export_run_manifest(self, output_dir, command, config, timings=None, outputs=None):
        payload = {
            "format_version": FORMAT_VERSION,
            "tool": "mimo_workbench",
            "tool_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "command": command,
            "created": datetime.now().strftime("%Y-%m-%d %H:%M:%S"),
            "config": config.to_dict(),
            "timings": timings or {},
            "outputs": [str(p) for p in (outputs or [])],
        }
        return self.write(payload, Path(output_dir) / RUN_MANIFEST_NAME, "Run manifest")
