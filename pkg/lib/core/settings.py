import copy
import json
import logging

log = logging.getLogger(__name__)

DEFAULT_SETTINGS = {
    'system': {'name': 'Multi-Embedding Toolkit', 'version': '1.0'},
    'numerics': {'tolerance': 1e-9},
    'budgets': {
        'star_nodes': 10_000_000,
        'tree_groups': 14,
        'oracle_choices': 100_000,
        'oracle_vertices': 20,
        'rep_enumeration': 100_000,
        'audit_exhaustive': 2000,
    },
    'generators': {'weight_low': 1.0, 'weight_high': 10.0, 'regular_retries': 100},
    'distortion': {'walk_length': 16, 'sampler': 'uniform', 'neighbors': 3},
    'logging': {'level': 'INFO'},
}


def _merge(base, override):
    for key, value in override.items():
        if key == 'comment':
            continue
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


class Settings:
    """Sectioned run settings loaded from config.json over built-in defaults."""

    def __init__(self, data=None, path=None):
        self.path = path
        self.data = _merge(copy.deepcopy(DEFAULT_SETTINGS), data or {})

    @classmethod
    def load(cls, path='config.json'):
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except (OSError, ValueError) as e:
            log.warning('Konfiguration %s nicht lesbar (%s), nutze Standardwerte', path, e)
            return cls(path=path)
        return cls(data, path=path)

    def section(self, name):
        return self.data.get(name, {})

    def get(self, section, key, default=None):
        return self.data.get(section, {}).get(key, default)

    @property
    def version(self):
        return self.get('system', 'version', '0')

    @property
    def tolerance(self):
        return float(self.get('numerics', 'tolerance'))

    def budget(self, key):
        return int(self.get('budgets', key))
