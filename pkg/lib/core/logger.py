import csv
import io
import logging
import os

TRIAL_FIELDS = ('trial', 'path_len', 'realized', 'optimal')

_configured = False


def setup_logging(level='INFO'):
    global _configured
    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        root.addHandler(handler)
        _configured = True
    root.setLevel(getattr(logging, str(level).upper(), logging.INFO))


class TrialLogger:
    """Per-trial CSV table, header written once per file."""

    def __init__(self, path=None, fields=TRIAL_FIELDS):
        self.path = path
        self.fields = tuple(fields)
        self.rows = []

    def log_trial(self, **row):
        missing = [f for f in self.fields if f not in row]
        if missing:
            raise KeyError('fehlende Spalten: %s' % ', '.join(missing))
        self.rows.append({f: row[f] for f in self.fields})

    def render(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=self.fields, lineterminator='\n')
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()

    def flush(self):
        if not self.path:
            return
        directory = os.path.dirname(self.path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.path, 'w', newline='') as f:
            f.write(self.render())
        logging.getLogger(__name__).info('%d Versuche nach %s geschrieben', len(self.rows), self.path)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value
