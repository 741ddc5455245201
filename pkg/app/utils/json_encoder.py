import json

import numpy as np


class NumpyJSONEncoder(json.JSONEncoder):
    """JSON encoder that understands numpy scalars and arrays"""

    def default(self, obj):
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (tuple, set)):
            return list(obj)
        return super().default(obj)


def canonical_json(document):
    """Sorted, whitespace-free dump used for hashing configs"""
    return json.dumps(document, cls=NumpyJSONEncoder, sort_keys=True, separators=(',', ':'))
