import datetime
import json
import logging
import os

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, (datetime.date, datetime.datetime)):
            return obj.isoformat()
        if isinstance(obj, tuple):
            return list(obj)
        return super(NumpyEncoder, self).default(obj)


def dumps(record):
    return json.dumps(record, cls=NumpyEncoder)


class DataCollector:
    """Collects result records of one run and writes them as JSON lines or CSV."""

    def __init__(self, base_path, run_name):
        self.base_path = base_path
        self.run_name = run_name
        self.data_path = os.path.join(self.base_path, self.run_name)
        self.data = []
        self.create_data_directory()

    def create_data_directory(self):
        os.makedirs(self.data_path, exist_ok=True)

    def collect_data(self, record):
        self.data.append(record)

    def save_to_jsonl(self, file_name="results.jsonl"):
        path = os.path.join(self.data_path, file_name)
        with open(path, "w") as f:
            for record in self.data:
                f.write(dumps(record) + "\n")
        logger.info(f"Wrote {len(self.data)} records to {path}")
        return path

    def save_to_csv(self, file_name="results.csv"):
        path = os.path.join(self.data_path, file_name)
        pd.DataFrame(self.data).to_csv(path, index=False)
        logger.info(f"Wrote {len(self.data)} rows to {path}")
        return path
