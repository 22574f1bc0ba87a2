"""
Atomic artifact writers: every output is written to a temp file in the target
directory and renamed into place, so readers never see a partial file.
"""
import json
import os
import tempfile
from contextlib import contextmanager
from typing import Any, Iterator

import pandas as pd


@contextmanager
def atomic_path(path: str) -> Iterator[str]:
    """Yield a temp path next to ``path``; rename it over ``path`` on success"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix='.tmp-', suffix=os.path.basename(path), dir=directory)
    os.close(fd)
    try:
        yield tmp_path
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_text(path: str, text: str) -> str:
    with atomic_path(path) as tmp:
        with open(tmp, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
    return path


def write_json(path: str, data: Any) -> str:
    """Save JSON with sorted keys so identical data gives identical bytes"""
    return write_text(path, json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + '\n')


def write_csv(path: str, frame: pd.DataFrame) -> str:
    with atomic_path(path) as tmp:
        frame.to_csv(tmp, index=False, float_format='%.17g', lineterminator='\n')
    return path
