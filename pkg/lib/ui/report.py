"""Report rendering: JSON and CSV to stdout or files, plus run manifests."""
import json
import logging
import math
import os
import sys

import numpy as np

from lib.core.errors import InputError

log = logging.getLogger(__name__)


def plain(value):
    """Convert numpy values, tuples and non-finite floats into JSON-safe Python objects."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        if hasattr(value, '_asdict'):
            return plain(value._asdict())
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        if math.isnan(value):
            return 'nan'
        return value
    return value


def dumps(data):
    return json.dumps(plain(data), indent=2) + '\n'


def manifest_path(output):
    return output + '.manifest.json'


class ReportWriter:
    """Write reports to stdout, or to a file with a sibling manifest."""

    def __init__(self, output=None, stream=None):
        self.output = output
        self.stream = stream if stream is not None else sys.stdout
        self.written = []

    def _write(self, path, text):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', newline='') as f:
            f.write(text)
        self.written.append(path)
        log.info('Ausgabe nach %s geschrieben', path)

    def emit_json(self, data, path=None):
        text = dumps(data)
        target = path or self.output
        if target:
            self._write(target, text)
        else:
            self.stream.write(text)
        return text

    def emit_text(self, text, path=None):
        target = path or self.output
        if target:
            self._write(target, text)
        else:
            self.stream.write(text)
        return text

    def write_manifest(self, command, argv, params, seeds=(), inputs=(), version='0',
                       wall_clock=None):
        """One <output>.manifest.json per written file; nothing for stdout-only runs."""
        data = {
            'command': command,
            'argv': list(argv),
            'params': params,
            'seeds': list(seeds),
            'inputs': list(inputs),
            'outputs': list(self.written),
            'version': version,
            'wall_clock_sec': wall_clock,
        }
        paths = []
        for out in list(self.written):
            path = manifest_path(out)
            with open(path, 'w') as f:
                f.write(dumps(data))
            paths.append(path)
        return paths


def load_manifest(path):
    with open(path, 'r') as f:
        data = json.load(f)
    if 'argv' not in data:
        raise InputError('Manifest %s ohne argv' % path)
    return data
