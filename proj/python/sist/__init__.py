"""Python bindings for the sist simultaneous-translation toolkit."""

import json

from ._sist import (
    BackendError,
    DataError,
    ProtocolError,
    SistError,
    UsageError,
    __version__,
    average_lagging,
    flal,
    kendall_tau_b,
    laal,
    round_tenth,
)
from . import _sist

__all__ = [
    "BackendError",
    "DataError",
    "ProtocolError",
    "SistError",
    "UsageError",
    "__version__",
    "annotation_bundle",
    "average_lagging",
    "eq2_pairs",
    "flal",
    "kendall_tau_b",
    "laal",
    "latency",
    "oracle_session",
    "round_tenth",
    "run_cli",
    "vip",
]


def oracle_session(sample, config=None):
    """Run one session against the oracle backend; returns the result dict."""
    return json.loads(_sist.oracle_session_json(json.dumps(sample), json.dumps(config or {})))


def eq2_pairs(sample, n, seed):
    return [json.loads(p) for p in _sist.eq2_pairs_json(json.dumps(sample), n, seed)]


def latency(events, source_duration_s, n_ref, tokenization="whitespace"):
    """AL, LAAL and FLAL for a list of emission event dicts."""
    lines = "\n".join(json.dumps(e) for e in events)
    return _sist.latency_json(lines, source_duration_s, n_ref, tokenization)


def vip(annotations):
    """Returns (valid, total, percent) for an AnnotationSet dict."""
    return _sist.vip_json(json.dumps(annotations))


def annotation_bundle(result, sample):
    return json.loads(_sist.annotation_bundle_json(json.dumps(result), json.dumps(sample)))


def run_cli(args):
    """Runs the command-line tool in-process; returns (exit_code, stdout, stderr)."""
    return _sist.run_cli([str(a) for a in args])
