# Copyright 2026 The lexstat Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


import json
import os
import shutil
import subprocess
from pathlib import Path

import pytest


@pytest.fixture(scope="session")
def planted(tmp_path_factory) -> Path:
    tool = os.environ.get("LEXSTAT_PLANTED") or shutil.which("lexstat-planted")
    if not tool:
        pytest.skip("lexstat-planted not available")
    out = tmp_path_factory.mktemp("planted")
    subprocess.run([tool, str(out), "-n", "40"], check=True, capture_output=True)
    return out


@pytest.fixture
def service(tmp_path, planted):
    import lexstat

    cfg = {
        "data_dir": str(tmp_path / "data"),
        "llm_backend": "mock",
        "mock_rules": str(planted / "mock_rules.json"),
        "parallelism": 2,
    }
    shim = os.environ.get("LEXSTAT_STUB_SHIM")
    if shim:
        cfg["shim"] = shim
        cfg["shim_env"] = {"STUB_SHIM_EPOCH_MS": "1"}
    return lexstat.Service(cfg)


def gold_lines(planted: Path) -> list[dict]:
    return [json.loads(l) for l in (planted / "gold.jsonl").read_text().splitlines() if l.strip()]
