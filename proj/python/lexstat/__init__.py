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


"""Python access to the lexstat core.

Structured values cross the native boundary as JSON text; this package
turns them into plain dicts and lists.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping

try:
    from . import _lexstat
except ImportError:  # in-tree build: the module sits on PYTHONPATH
    import _lexstat

__version__ = _lexstat.__version__

__all__ = [
    "LexstatError",
    "Service",
    "cost_curve",
    "evaluate",
    "normalize_value",
    "run_cli",
    "schema",
]


class LexstatError(Exception):
    """A domain error from the core: `code`, `message` and `detail`."""

    def __init__(self, code: str, message: str, detail: str = ""):
        super().__init__(code, message, detail)
        self.code = code
        self.message = message
        self.detail = detail

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


_lexstat._set_error_class(LexstatError)


def _dump(obj: Any) -> str:
    if obj is None:
        return ""
    return json.dumps(obj, ensure_ascii=False)


def normalize_value(raw: str, kind: str) -> str:
    return _lexstat.normalize_value(raw, kind)


def evaluate(body: Mapping[str, Any]) -> dict:
    """Same request shape as POST /eval, limited to file and inline sources."""
    return json.loads(_lexstat.eval_request(_dump(body)))


def cost_curve(grid: Iterable[float] | None = None, **body: Any) -> dict:
    if grid is not None:
        body["grid"] = list(grid)
    return json.loads(_lexstat.cost_curve_request(_dump(body)))


def schema() -> dict:
    return json.loads(_lexstat.schema())


def run_cli(*args: str) -> tuple[int, str, str]:
    """Runs the command line in-process: (exit code, stdout, stderr)."""
    return _lexstat.run_cli([str(a) for a in args])


class Service:
    """In-process service; methods mirror the HTTP endpoints."""

    def __init__(self, config: Mapping[str, Any] | None = None, **kwargs: Any):
        cfg = dict(config or {})
        cfg.update({k: str(v) if hasattr(v, "__fspath__") else v for k, v in kwargs.items()})
        self._svc = _lexstat.Service(_dump(cfg))

    @property
    def config(self) -> dict:
        return json.loads(self._svc.config())

    def ingest(self, docs: str | Iterable[Mapping[str, Any]], corpus_id: str = "") -> dict:
        if not isinstance(docs, str):
            docs = "".join(_dump(d) + "\n" for d in docs)
        return json.loads(self._svc.ingest(docs, corpus_id))

    def list_corpora(self) -> list:
        return json.loads(self._svc.list_corpora())["corpora"]

    def get_ontology(self, corpus_id: str) -> dict:
        return json.loads(self._svc.get_ontology(corpus_id))

    def put_ontology(self, corpus_id: str, ontology: Mapping[str, Any]) -> dict:
        return json.loads(self._svc.put_ontology(corpus_id, _dump(ontology)))

    def search(self, corpus_id: str, query: str | None = None, **body: Any) -> dict:
        if query is not None:
            body["query"] = query
        return json.loads(self._svc.search(corpus_id, _dump(body)))

    def get_document(self, corpus_id: str, doc_id: str) -> dict:
        return json.loads(self._svc.get_document(corpus_id, doc_id))

    def put_label(self, corpus_id: str, doc_id: str, parse: Mapping[str, Any], **body: Any) -> dict:
        body["parse"] = parse
        return json.loads(self._svc.put_label(corpus_id, doc_id, _dump(body)))

    def get_labels(self, corpus_id: str, **query: Any) -> list:
        return json.loads(self._svc.get_labels(corpus_id, _dump(query)))["labels"]

    def augment(self, corpus_id: str, wait: bool = True, **body: Any) -> dict:
        return json.loads(self._svc.augment(corpus_id, _dump(body), wait))

    def train(self, dataset_id: str, hyperparams: Mapping[str, Any] | None = None, wait: bool = True) -> dict:
        body: dict = {"dataset_id": dataset_id}
        if hyperparams:
            body["hyperparams"] = dict(hyperparams)
        return json.loads(self._svc.train(_dump(body), wait))

    def extract(self, corpus_id: str, extractor: Mapping[str, Any], wait: bool = True, **body: Any) -> dict:
        body["extractor"] = extractor
        return json.loads(self._svc.extract(corpus_id, _dump(body), wait))

    def job(self, job_id: str) -> dict:
        return json.loads(self._svc.job(job_id))

    def wait_job(self, job_id: str) -> dict:
        return json.loads(self._svc.wait_job(job_id))

    def jobs(self) -> list:
        return json.loads(self._svc.jobs())

    def eval(self, body: Mapping[str, Any]) -> dict:
        return json.loads(self._svc.eval(_dump(body)))

    def chat(self, body: Mapping[str, Any]) -> dict:
        return json.loads(self._svc.chat(_dump(body)))

    def cost_curve(self, grid: Iterable[float], **body: Any) -> dict:
        body["grid"] = list(grid)
        return json.loads(self._svc.cost_curve(_dump(body)))

    def tools(self) -> list:
        return json.loads(self._svc.tools())
